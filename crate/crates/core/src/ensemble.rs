//! Cross-model voting ensemble.
//!
//! The pipeline for a set of per-model detection files is:
//!
//! 1. optional per-model NMS ([`crate::nms`]);
//! 2. for every `(image, class)` partition, greedy grouping of the pooled
//!    detections into candidate objects ([`group_detections`]);
//! 3. a vote over each group's distinct supporting models ([`vote`]);
//! 4. fusion of every surviving group into one detection ([`fuse_group`]).
//!
//! Grouping is seed-anchored: the highest-scored unassigned detection seeds
//! a group, and each *other* model contributes at most one detection to it,
//! namely its unassigned detection with the highest IoU against the seed,
//! provided that IoU is `>= group_iou`. A group therefore never holds two
//! boxes of the same model, and with a single model every detection is its
//! own group.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::io::DetectionFile;
use crate::model::{ClassId, DatasetManifest, Detection};
use crate::nms::{nms_file, NmsConfig};

/// Model id carried by fused detections.
pub const ENSEMBLE_MODEL_ID: &str = "ensemble";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VotingStrategy {
    /// A single supporting model suffices.
    Affirmative,
    /// Strictly more than half of the models must support the group.
    Consensus,
    /// Every model must support the group.
    Unanimous,
}

impl VotingStrategy {
    pub fn required_votes(self, n_models: usize) -> usize {
        match self {
            VotingStrategy::Affirmative => 1,
            VotingStrategy::Consensus => n_models / 2 + 1,
            VotingStrategy::Unanimous => n_models,
        }
    }

    pub fn accepts(self, supporters: usize, n_models: usize) -> bool {
        supporters >= self.required_votes(n_models).max(1)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VotingStrategy::Affirmative => "affirmative",
            VotingStrategy::Consensus => "consensus",
            VotingStrategy::Unanimous => "unanimous",
        }
    }
}

impl std::str::FromStr for VotingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "affirmative" => Ok(Self::Affirmative),
            "consensus" => Ok(Self::Consensus),
            "unanimous" => Ok(Self::Unanimous),
            other => Err(Error::Config(format!("unknown voting strategy `{other}`"))),
        }
    }
}

/// Detections believed to be the same object, plus their fused output.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedGroup {
    /// Seed first, then the absorbed detections in pooled score order.
    pub members: Vec<Detection>,
    pub supporting_models: BTreeSet<String>,
    /// Set by [`vote`] on groups that pass.
    pub fused: Option<Detection>,
}

impl FusedGroup {
    fn from_members(members: Vec<Detection>) -> Self {
        let supporting_models = members.iter().map(|d| d.model_id.clone()).collect();
        Self {
            members,
            supporting_models,
            fused: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub strategy: VotingStrategy,
    pub group_iou: f64,
    /// Per-model suppression before grouping; `None` skips it.
    pub nms: Option<NmsConfig>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            strategy: VotingStrategy::Consensus,
            group_iou: 0.5,
            nms: Some(NmsConfig::default()),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.group_iou) {
            return Err(Error::Config(format!(
                "group iou must lie in [0, 1], got {}",
                self.group_iou
            )));
        }
        if let Some(nms) = &self.nms {
            nms.validate()?;
        }
        Ok(())
    }
}

struct Candidate<'a> {
    det: &'a Detection,
    index: usize,
}

fn pooled_order(pool: &mut [Candidate<'_>]) {
    pool.sort_by(|a, b| {
        b.det
            .score
            .total_cmp(&a.det.score)
            .then_with(|| a.det.model_id.cmp(&b.det.model_id))
            .then(a.index.cmp(&b.index))
    });
}

fn group_pool(mut pool: Vec<Candidate<'_>>, group_iou: f64) -> Vec<FusedGroup> {
    pooled_order(&mut pool);
    let mut assigned = vec![false; pool.len()];
    let mut groups = Vec::new();
    for seed in 0..pool.len() {
        if assigned[seed] {
            continue;
        }
        assigned[seed] = true;
        let seed_det = pool[seed].det;
        // model -> (iou, pooled position); strict `>` keeps the earliest on ties.
        let mut best: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for (j, cand) in pool.iter().enumerate().skip(seed + 1) {
            if assigned[j] || cand.det.model_id == seed_det.model_id {
                continue;
            }
            let overlap = seed_det.bbox.iou(&cand.det.bbox);
            if overlap < group_iou {
                continue;
            }
            let slot = best.entry(cand.det.model_id.as_str()).or_insert((overlap, j));
            if overlap > slot.0 {
                *slot = (overlap, j);
            }
        }
        let mut picked: Vec<usize> = best.values().map(|&(_, j)| j).collect();
        picked.sort_unstable();
        let mut members = vec![seed_det.clone()];
        for j in picked {
            assigned[j] = true;
            members.push(pool[j].det.clone());
        }
        groups.push(FusedGroup::from_members(members));
    }
    groups
}

/// Groups the detections of one `(image, class)` partition across models.
///
/// Detections of other images or classes are ignored. `per_model` should
/// already be NMS-filtered if suppression is wanted.
pub fn group_detections(
    per_model: &[DetectionFile],
    image_id: &str,
    class_id: ClassId,
    group_iou: f64,
) -> Vec<FusedGroup> {
    let pool = per_model
        .iter()
        .flat_map(|f| f.detections.iter().enumerate())
        .filter(|(_, d)| d.image_id == image_id && d.class_id == class_id)
        .map(|(index, det)| Candidate { det, index })
        .collect();
    group_pool(pool, group_iou)
}

/// Keeps the groups the strategy accepts and computes their fused detection.
pub fn vote(
    groups: Vec<FusedGroup>,
    strategy: VotingStrategy,
    n_models: usize,
) -> Result<Vec<FusedGroup>> {
    if n_models == 0 {
        return Err(Error::Config("voting needs at least one model".into()));
    }
    Ok(groups
        .into_iter()
        .filter(|g| strategy.accepts(g.supporting_models.len(), n_models))
        .map(|mut g| {
            g.fused = Some(fuse_group(&g));
            g
        })
        .collect())
}

/// Score-weighted average box and mean score of a group's members.
///
/// A singleton is returned as-is (relabeled). Zero total score falls back
/// to equal weights. Coordinates are clamped to the members' envelope.
pub fn fuse_group(group: &FusedGroup) -> Detection {
    let members = &group.members;
    let first = members.first().expect("groups have at least one member");
    let n = members.len() as f64;
    let score = members.iter().map(|d| d.score).sum::<f64>() / n;

    let bbox = if members.len() == 1 {
        first.bbox
    } else {
        let total: f64 = members.iter().map(|d| d.score).sum();
        let weight = |d: &Detection| if total > 0.0 { d.score / total } else { 1.0 / n };
        let coord = |pick: fn(&BoundingBox) -> f64| {
            let avg: f64 = members.iter().map(|d| weight(d) * pick(&d.bbox)).sum();
            let (lo, hi) = members
                .iter()
                .map(|d| pick(&d.bbox))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            avg.clamp(lo, hi)
        };
        BoundingBox::new(
            coord(BoundingBox::x),
            coord(BoundingBox::y),
            coord(BoundingBox::w),
            coord(BoundingBox::h),
        )
        .expect("convex combination of valid boxes is valid")
    };

    Detection {
        image_id: first.image_id.clone(),
        class_id: first.class_id,
        bbox,
        score: score.clamp(0.0, 1.0),
        model_id: ENSEMBLE_MODEL_ID.to_owned(),
    }
}

fn check_inputs(per_model: &[DetectionFile], manifest: &DatasetManifest) -> Result<()> {
    if per_model.is_empty() {
        return Err(Error::Config("ensemble needs at least one detection file".into()));
    }
    let mut seen = HashSet::new();
    for f in per_model {
        if !seen.insert(f.model_id.as_str()) {
            return Err(Error::Config(format!(
                "model id `{}` appears in more than one detection file",
                f.model_id
            )));
        }
        f.validate(manifest)?;
    }
    Ok(())
}

/// Voted groups of the whole pipeline, in manifest image order then class
/// order, each partition in seed order.
pub fn ensemble_groups(
    per_model: &[DetectionFile],
    manifest: &DatasetManifest,
    cfg: &EnsembleConfig,
) -> Result<Vec<FusedGroup>> {
    cfg.validate()?;
    check_inputs(per_model, manifest)?;
    let filtered: Vec<DetectionFile> = match &cfg.nms {
        Some(nms) => per_model
            .iter()
            .map(|f| nms_file(f, nms))
            .collect::<Result<_>>()?,
        None => per_model.to_vec(),
    };

    let mut partitions: BTreeMap<(usize, ClassId), Vec<Candidate<'_>>> = BTreeMap::new();
    for f in &filtered {
        for (index, det) in f.detections.iter().enumerate() {
            let pos = manifest
                .image_position(&det.image_id)
                .expect("validated against manifest");
            partitions
                .entry((pos, det.class_id))
                .or_default()
                .push(Candidate { det, index });
        }
    }

    let mut out = Vec::new();
    for pool in partitions.into_values() {
        let groups = group_pool(pool, cfg.group_iou);
        out.extend(vote(groups, cfg.strategy, per_model.len())?);
    }
    Ok(out)
}

/// Fuses several detectors' outputs into one detection file.
///
/// Output is sorted by image id, then descending score.
pub fn run_ensemble(
    per_model: &[DetectionFile],
    manifest: &DatasetManifest,
    cfg: &EnsembleConfig,
) -> Result<DetectionFile> {
    let groups = ensemble_groups(per_model, manifest, cfg)?;
    let mut detections: Vec<Detection> = groups.into_iter().filter_map(|g| g.fused).collect();
    detections.sort_by(|a, b| {
        a.image_id
            .cmp(&b.image_id)
            .then(b.score.total_cmp(&a.score))
    });
    Ok(DetectionFile {
        model_id: ENSEMBLE_MODEL_ID.to_owned(),
        detections,
        registry: manifest.registry().clone(),
    })
}
