//! Greedy hard non-maximum suppression, per image.
//!
//! A candidate is suppressed when its IoU with an already-kept detection in
//! scope is `>= iou_threshold`. Scope is the same class in
//! [`NmsMode::ClassAware`] and every detection in [`NmsMode::ClassAgnostic`].

use crate::error::{Error, Result};
use crate::io::DetectionFile;
use crate::model::Detection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NmsMode {
    #[default]
    ClassAware,
    ClassAgnostic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmsConfig {
    pub iou_threshold: f64,
    pub mode: NmsMode,
    /// Detections scoring below this are dropped before suppression.
    pub score_floor: f64,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            mode: NmsMode::ClassAware,
            score_floor: 0.0,
        }
    }
}

impl NmsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("nms iou threshold", self.iou_threshold),
            ("score floor", self.score_floor),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Indices of `dets` ordered by descending score, ties by input position.
pub(crate) fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    order
}

/// Suppresses overlapping detections of a single image.
///
/// Kept detections are returned unmodified, sorted by descending score.
pub fn nms(dets: &[Detection], cfg: &NmsConfig) -> Result<Vec<Detection>> {
    cfg.validate()?;
    if let Some(first) = dets.first() {
        if let Some(other) = dets.iter().find(|d| d.image_id != first.image_id) {
            return Err(Error::MixedImage {
                first: first.image_id.clone(),
                other: other.image_id.clone(),
            });
        }
    }
    let mut kept: Vec<&Detection> = Vec::new();
    for i in score_order(dets) {
        let cand = &dets[i];
        if cand.score < cfg.score_floor {
            continue;
        }
        let suppressed = kept.iter().any(|k| {
            let in_scope = cfg.mode == NmsMode::ClassAgnostic || k.class_id == cand.class_id;
            in_scope && k.bbox.iou(&cand.bbox) >= cfg.iou_threshold
        });
        if !suppressed {
            kept.push(cand);
        }
    }
    Ok(kept.into_iter().cloned().collect())
}

/// Applies [`nms`] to each image of a detection file.
///
/// Images appear in order of first occurrence in the file; detections of an
/// image are sorted by descending score.
pub fn nms_file(file: &DetectionFile, cfg: &NmsConfig) -> Result<DetectionFile> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_image: std::collections::HashMap<&str, Vec<Detection>> = Default::default();
    for d in &file.detections {
        by_image
            .entry(d.image_id.as_str())
            .or_insert_with(|| {
                order.push(d.image_id.as_str());
                Vec::new()
            })
            .push(d.clone());
    }
    let mut out = Vec::with_capacity(file.detections.len());
    for image in order {
        out.extend(nms(&by_image[image], cfg)?);
    }
    Ok(DetectionFile {
        model_id: file.model_id.clone(),
        detections: out,
        registry: file.registry.clone(),
    })
}
