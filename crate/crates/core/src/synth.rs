//! Seeded synthetic detectors and scenes.
//!
//! [`generate`] turns ground truth into a pseudo-model's output: each
//! annotation survives with probability `1 - drop_rate` and has its four
//! coordinates perturbed by independent uniform noise of amplitude
//! `jitter * w` (x and w) or `jitter * h` (y and h), then clipped to the
//! image. Each image also receives `Poisson(fp_rate)` random low-scoring
//! false positives.
//!
//! Randomness comes from [`SplitMix64::fork`] with the image's manifest
//! position as stream index, so each image's output depends only on the
//! seed and that image's annotations.

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::io::DetectionFile;
use crate::model::{
    ClassId, ClassRegistry, DatasetManifest, Detection, GroundTruthAnnotation, ImageInfo,
};
use crate::rng::SplitMix64;

/// Maps realized jitter to a confidence: `clamp(base - slope * j, floor, 1)`,
/// where `j` is the mean absolute normalized perturbation of the four
/// coordinates (0 for an exact box, up to `jitter`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreModel {
    pub base: f64,
    pub slope: f64,
    pub floor: f64,
    /// False positives score uniformly in `[0, fp_score_max)`.
    pub fp_score_max: f64,
}

impl Default for ScoreModel {
    fn default() -> Self {
        Self {
            base: 0.95,
            slope: 2.0,
            floor: 0.05,
            fp_score_max: 0.3,
        }
    }
}

impl ScoreModel {
    pub fn score(&self, realized_jitter: f64) -> f64 {
        (self.base - self.slope * realized_jitter).clamp(self.floor, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbConfig {
    pub seed: u64,
    pub jitter: f64,
    pub drop_rate: f64,
    /// Expected false positives per image.
    pub fp_rate: f64,
    pub score_model: ScoreModel,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jitter: 0.1,
            drop_rate: 0.1,
            fp_rate: 0.5,
            score_model: ScoreModel::default(),
        }
    }
}

impl PerturbConfig {
    pub fn exact(seed: u64) -> Self {
        Self {
            seed,
            jitter: 0.0,
            drop_rate: 0.0,
            fp_rate: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::Config(format!("jitter must be >= 0, got {}", self.jitter)));
        }
        if !unit(self.drop_rate) {
            return Err(Error::Config(format!("drop rate must lie in [0, 1], got {}", self.drop_rate)));
        }
        if !(self.fp_rate >= 0.0 && self.fp_rate.is_finite()) {
            return Err(Error::Config(format!("fp rate must be >= 0, got {}", self.fp_rate)));
        }
        let s = &self.score_model;
        if !(unit(s.base) && unit(s.floor) && unit(s.fp_score_max) && s.slope.is_finite()) {
            return Err(Error::Config("score model parameters out of range".into()));
        }
        Ok(())
    }
}

/// Perturbs one axis interval `[start, start + len)` inside `[0, limit]`.
///
/// Returns the new `(start, len)` and the two normalized offsets. Falls
/// back to the original interval if noise pushes it entirely off-image.
fn jitter_axis(
    rng: &mut SplitMix64,
    start: f64,
    len: f64,
    jitter: f64,
    limit: f64,
) -> (f64, f64, f64) {
    let u_pos = rng.uniform(-1.0, 1.0);
    let u_len = rng.uniform(-1.0, 1.0);
    if jitter == 0.0 {
        return (start, len, 0.0);
    }
    let new_start = start + u_pos * jitter * len;
    let new_len = (len + u_len * jitter * len).max(len * 1e-3);
    let lo = new_start.max(0.0);
    let hi = (new_start + new_len).min(limit);
    if hi > lo {
        (lo, hi - lo, (u_pos.abs() + u_len.abs()) * jitter)
    } else {
        (start, len, 0.0)
    }
}

fn perturb(
    rng: &mut SplitMix64,
    gt: &GroundTruthAnnotation,
    img: &ImageInfo,
    cfg: &PerturbConfig,
    model_id: &str,
) -> Detection {
    let b = gt.bbox;
    let (x, w, jx) = jitter_axis(rng, b.x(), b.w(), cfg.jitter, img.width as f64);
    let (y, h, jy) = jitter_axis(rng, b.y(), b.h(), cfg.jitter, img.height as f64);
    let bbox = if cfg.jitter == 0.0 {
        b
    } else {
        BoundingBox::new(x, y, w, h).unwrap_or(b)
    };
    let realized = (jx + jy) / 4.0;
    Detection {
        image_id: gt.image_id.clone(),
        class_id: gt.class_id,
        bbox,
        score: cfg.score_model.score(realized),
        model_id: model_id.to_owned(),
    }
}

fn false_positive(
    rng: &mut SplitMix64,
    img: &ImageInfo,
    registry: &ClassRegistry,
    cfg: &PerturbConfig,
    model_id: &str,
) -> Detection {
    let (iw, ih) = (img.width as f64, img.height as f64);
    let w = iw * rng.uniform(0.05, 0.3);
    let h = ih * rng.uniform(0.05, 0.3);
    let x = rng.uniform(0.0, iw - w);
    let y = rng.uniform(0.0, ih - h);
    let class_id = ClassId(rng.below(registry.len().max(1) as u64) as usize);
    let score = rng.uniform(0.0, cfg.score_model.fp_score_max);
    Detection {
        image_id: img.id.clone(),
        class_id,
        bbox: BoundingBox::new(x, y, w, h).expect("positive extent inside the image"),
        score,
        model_id: model_id.to_owned(),
    }
}

/// Synthesizes a detector's output from the manifest's ground truth.
///
/// Output is in manifest image order; within an image, surviving
/// annotations come first (in file order), then false positives.
pub fn generate(
    manifest: &DatasetManifest,
    cfg: &PerturbConfig,
    model_id: &str,
) -> Result<DetectionFile> {
    cfg.validate()?;
    let by_image = manifest.annotations_by_image();
    let mut detections = Vec::new();
    for (pos, (img, gts)) in manifest.images().iter().zip(&by_image).enumerate() {
        let mut rng = SplitMix64::fork(cfg.seed, pos as u64);
        for gt in gts {
            // Every annotation draws its keep decision and noise, kept or not.
            let keep = !rng.bernoulli(cfg.drop_rate);
            let det = perturb(&mut rng, gt, img, cfg, model_id);
            if keep {
                detections.push(det);
            }
        }
        let n_fp = rng.poisson(cfg.fp_rate);
        for _ in 0..n_fp {
            detections.push(false_positive(&mut rng, img, manifest.registry(), cfg, model_id));
        }
    }
    Ok(DetectionFile {
        model_id: model_id.to_owned(),
        detections,
        registry: manifest.registry().clone(),
    })
}

/// Shape of a random ground-truth scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub seed: u64,
    pub n_images: usize,
    /// Annotations per image are uniform in `[0, max_boxes]`.
    pub max_boxes: usize,
    pub width: u32,
    pub height: u32,
    /// Box sides as a fraction of the image side, uniform in this range.
    pub min_size: f64,
    pub max_size: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_images: 10,
            max_boxes: 6,
            width: 416,
            height: 416,
            min_size: 0.05,
            max_size: 0.3,
        }
    }
}

/// Random manifest with uniformly drawn box positions, sizes and classes.
pub fn random_manifest(cfg: &SceneConfig, registry: ClassRegistry) -> Result<DatasetManifest> {
    if registry.is_empty() {
        return Err(Error::Config("registry must hold at least one class".into()));
    }
    if !(cfg.min_size > 0.0 && cfg.min_size <= cfg.max_size && cfg.max_size <= 1.0) {
        return Err(Error::Config("box size fractions must satisfy 0 < min <= max <= 1".into()));
    }
    let mut rng = SplitMix64::new(cfg.seed);
    let (iw, ih) = (cfg.width as f64, cfg.height as f64);
    let mut images = Vec::with_capacity(cfg.n_images);
    let mut annotations = Vec::new();
    for i in 0..cfg.n_images {
        let id = format!("img{i:05}");
        let n_boxes = rng.below(cfg.max_boxes as u64 + 1);
        for _ in 0..n_boxes {
            let w = iw * rng.uniform(cfg.min_size, cfg.max_size);
            let h = ih * rng.uniform(cfg.min_size, cfg.max_size);
            let bbox = BoundingBox::new(rng.uniform(0.0, iw - w), rng.uniform(0.0, ih - h), w, h)?;
            annotations.push(GroundTruthAnnotation {
                image_id: id.clone(),
                class_id: ClassId(rng.below(registry.len() as u64) as usize),
                bbox,
            });
        }
        images.push(ImageInfo {
            id,
            width: cfg.width,
            height: cfg.height,
        });
    }
    DatasetManifest::new(images, annotations, registry)
}
