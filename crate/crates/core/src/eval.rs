//! Detection scoring: greedy matching, precision/recall, AP and mAP.
//!
//! Within an `(image, class)` partition, detections are visited by
//! descending score (ties by input position) and each is matched to the
//! unmatched annotation of highest IoU, provided that IoU reaches the
//! threshold; IoU ties go to the lower annotation index.
//!
//! Per class, verdicts from all images are ranked by descending score (ties
//! by image id, then detection index) and AP is the all-point interpolated
//! area under the precision/recall curve:
//!
//! ```text
//! AP = sum over true positives i of (1 / n_gt) * max { precision_j : j >= i }
//! ```
//!
//! mAP is the mean AP over classes with at least one annotation.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::DetectionFile;
use crate::model::{ClassId, DatasetManifest, Detection, GroundTruthAnnotation};

/// IoU at or above which a detection may match an annotation.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct IouThreshold(f64);

impl IouThreshold {
    /// The 0.25 / 0.50 / 0.75 evaluation triple.
    pub const CANONICAL: [IouThreshold; 3] =
        [IouThreshold(0.25), IouThreshold(0.5), IouThreshold(0.75)];

    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::Config(format!("IoU threshold must lie in (0, 1], got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Threshold as a percentage label, e.g. `25` for 0.25.
    pub fn percent_label(self) -> String {
        let pct = self.0 * 100.0;
        if (pct - pct.round()).abs() < 1e-9 {
            format!("{}", pct.round() as i64)
        } else {
            format!("{pct}")
        }
    }
}

impl fmt::Display for IouThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    TruePositive { annotation: usize, iou: f64 },
    FalsePositive,
}

impl Verdict {
    pub fn is_tp(&self) -> bool {
        matches!(self, Verdict::TruePositive { .. })
    }
}

/// Outcome of matching one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// One verdict per detection, indexed like the input detections.
    pub verdicts: Vec<Verdict>,
    /// One flag per annotation, indexed like the input annotations.
    pub matched: Vec<bool>,
}

fn check_partition(dets: &[&Detection], gts: &[&GroundTruthAnnotation]) -> Result<()> {
    let mut keys = dets
        .iter()
        .map(|d| (d.image_id.as_str(), d.class_id))
        .chain(gts.iter().map(|g| (g.image_id.as_str(), g.class_id)));
    if let Some(first) = keys.next() {
        if let Some(other) = keys.find(|k| *k != first) {
            return Err(Error::Partition(format!(
                "found image `{}` class {} alongside image `{}` class {}",
                first.0, first.1, other.0, other.1
            )));
        }
    }
    Ok(())
}

fn match_refs(dets: &[&Detection], gts: &[&GroundTruthAnnotation], t: IouThreshold) -> MatchResult {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    let mut matched = vec![false; gts.len()];
    let mut verdicts = vec![Verdict::FalsePositive; dets.len()];
    for i in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if matched[g] {
                continue;
            }
            let overlap = dets[i].bbox.iou(&gt.bbox);
            if overlap >= t.0 && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((g, overlap));
            }
        }
        if let Some((g, overlap)) = best {
            matched[g] = true;
            verdicts[i] = Verdict::TruePositive {
                annotation: g,
                iou: overlap,
            };
        }
    }
    MatchResult { verdicts, matched }
}

/// Matches the detections of one `(image, class)` partition against its
/// annotations.
pub fn match_detections(
    dets: &[Detection],
    gts: &[GroundTruthAnnotation],
    t: IouThreshold,
) -> Result<MatchResult> {
    let dets: Vec<&Detection> = dets.iter().collect();
    let gts: Vec<&GroundTruthAnnotation> = gts.iter().collect();
    check_partition(&dets, &gts)?;
    Ok(match_refs(&dets, &gts, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Continuous all-point area.
    #[default]
    AllPoint,
    /// Mean interpolated precision at recall 0.00, 0.01, ..., 1.00.
    Coco101,
}

impl Interpolation {
    pub fn as_str(self) -> &'static str {
        match self {
            Interpolation::AllPoint => "all-point",
            Interpolation::Coco101 => "coco-101",
        }
    }
}

/// One detection's verdict placed in the class-wide ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedVerdict {
    pub score: f64,
    pub image_id: String,
    pub index: usize,
    pub true_positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassAp {
    /// The class has no annotations and is left out of mAP.
    Skipped,
    Scored {
        ap: f64,
        /// Interpolated precision at each recall step.
        curve: Vec<PrPoint>,
    },
}

impl ClassAp {
    pub fn ap(&self) -> Option<f64> {
        match self {
            ClassAp::Skipped => None,
            ClassAp::Scored { ap, .. } => Some(*ap),
        }
    }
}

/// Average precision of one class from its ranked verdicts.
pub fn average_precision(verdicts: &[RankedVerdict], n_gt: usize, interp: Interpolation) -> ClassAp {
    if n_gt == 0 {
        return ClassAp::Skipped;
    }
    let mut ranked: Vec<&RankedVerdict> = verdicts.iter().collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.image_id.cmp(&b.image_id))
            .then(a.index.cmp(&b.index))
    });

    let mut tp_cum = Vec::with_capacity(ranked.len());
    let mut precision = Vec::with_capacity(ranked.len());
    let mut tp = 0usize;
    for (k, v) in ranked.iter().enumerate() {
        tp += v.true_positive as usize;
        tp_cum.push(tp);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    // Envelope: best precision at this rank or deeper.
    let mut envelope = precision;
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }

    let mut curve = Vec::new();
    let mut area_sum = 0.0;
    for (k, v) in ranked.iter().enumerate() {
        if v.true_positive {
            area_sum += envelope[k];
            curve.push(PrPoint {
                recall: tp_cum[k] as f64 / n_gt as f64,
                precision: envelope[k],
            });
        }
    }

    let ap = match interp {
        Interpolation::AllPoint => area_sum / n_gt as f64,
        Interpolation::Coco101 => {
            let mut sum = 0.0;
            let mut k = 0;
            for r in 0..=100usize {
                // First rank whose recall reaches r / 100, compared in integers.
                while k < tp_cum.len() && tp_cum[k] * 100 < r * n_gt {
                    k += 1;
                }
                if k < tp_cum.len() {
                    sum += envelope[k];
                }
            }
            sum / 101.0
        }
    };
    ClassAp::Scored {
        ap: ap.clamp(0.0, 1.0),
        curve,
    }
}

/// Thresholds, interpolation and any extra provenance folded into the
/// report's config hash.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub thresholds: Vec<IouThreshold>,
    pub interpolation: Interpolation,
    pub provenance: Vec<(String, String)>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thresholds: IouThreshold::CANONICAL.to_vec(),
            interpolation: Interpolation::AllPoint,
            provenance: Vec::new(),
        }
    }
}

impl EvalConfig {
    /// SHA-256 over the sorted `key=value` lines, first 16 hex digits.
    pub fn hash(&self) -> String {
        let iou: Vec<String> = self.thresholds.iter().map(|t| t.to_string()).collect();
        let mut pairs = vec![
            ("interpolation".to_string(), self.interpolation.as_str().to_string()),
            ("iou".to_string(), iou.join(",")),
        ];
        pairs.extend(self.provenance.iter().cloned());
        config_hash(&pairs)
    }
}

/// Order-independent hash of configuration pairs.
pub fn config_hash(pairs: &[(String, String)]) -> String {
    use sha2::{Digest, Sha256};
    let mut lines: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    lines.sort();
    let mut hasher = Sha256::new();
    for line in &lines {
        hasher.update(line.as_bytes());
    }
    hex::encode(&hasher.finalize()[..8])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    pub n_gt: usize,
    /// `None` when the class has no annotations.
    pub ap: Option<f64>,
    #[serde(default)]
    pub pr_curve: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub iou: f64,
    pub map: f64,
    pub classes: Vec<ClassReport>,
}

/// Full evaluation result. AP and mAP are fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool: String,
    pub version: String,
    pub detections_id: String,
    pub manifest_id: String,
    pub config_hash: String,
    pub interpolation: String,
    pub thresholds: Vec<ThresholdReport>,
}

impl EvalReport {
    pub fn map_at(&self, iou: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .find(|t| (t.iou - iou).abs() < 1e-12)
            .map(|t| t.map)
    }

    /// Checks value ranges and, where per-class APs are listed, that each
    /// mAP is their mean.
    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(Error::Validation("report has no thresholds".into()));
        }
        for t in &self.thresholds {
            IouThreshold::new(t.iou)?;
            let in_unit = |v: f64| (0.0..=1.0).contains(&v);
            if !in_unit(t.map) {
                return Err(Error::Validation(format!("mAP {} at IoU {} outside [0, 1]", t.map, t.iou)));
            }
            let scored: Vec<f64> = t.classes.iter().filter_map(|c| c.ap).collect();
            if let Some(bad) = scored.iter().find(|v| !in_unit(**v)) {
                return Err(Error::Validation(format!("AP {bad} at IoU {} outside [0, 1]", t.iou)));
            }
            if !scored.is_empty() {
                let mean = scored.iter().sum::<f64>() / scored.len() as f64;
                if (mean - t.map).abs() > 1e-9 {
                    return Err(Error::Validation(format!(
                        "mAP {} at IoU {} is not the mean of its class APs ({mean})",
                        t.map, t.iou
                    )));
                }
            }
        }
        Ok(())
    }
}

type PartitionKey = (usize, ClassId);

/// Scores a detection file against a manifest's ground truth.
pub fn evaluate(
    dets: &DetectionFile,
    manifest: &DatasetManifest,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if cfg.thresholds.is_empty() {
        return Err(Error::Config("at least one IoU threshold is required".into()));
    }
    dets.validate(manifest)?;
    if manifest.annotations().is_empty() {
        return Err(Error::Eval("manifest has no ground-truth annotations".into()));
    }
    let registry = manifest.registry();

    let mut gt_parts: HashMap<PartitionKey, Vec<&GroundTruthAnnotation>> = HashMap::new();
    let mut n_gt = vec![0usize; registry.len()];
    for gt in manifest.annotations() {
        let pos = manifest.image_position(&gt.image_id).expect("manifest is consistent");
        gt_parts.entry((pos, gt.class_id)).or_default().push(gt);
        n_gt[gt.class_id.index()] += 1;
    }
    let mut det_parts: HashMap<PartitionKey, Vec<(usize, &Detection)>> = HashMap::new();
    for (i, d) in dets.detections.iter().enumerate() {
        let pos = manifest.image_position(&d.image_id).expect("validated");
        det_parts.entry((pos, d.class_id)).or_default().push((i, d));
    }
    let mut keys: Vec<PartitionKey> = det_parts.keys().copied().collect();
    keys.sort_unstable();

    let mut thresholds = Vec::with_capacity(cfg.thresholds.len());
    for &t in &cfg.thresholds {
        let mut ranked: Vec<Vec<RankedVerdict>> = vec![Vec::new(); registry.len()];
        for key in &keys {
            let part = &det_parts[key];
            let refs: Vec<&Detection> = part.iter().map(|&(_, d)| d).collect();
            let gts = gt_parts.get(key).map(Vec::as_slice).unwrap_or(&[]);
            let result = match_refs(&refs, gts, t);
            for (&(index, d), verdict) in part.iter().zip(&result.verdicts) {
                ranked[key.1.index()].push(RankedVerdict {
                    score: d.score,
                    image_id: d.image_id.clone(),
                    index,
                    true_positive: verdict.is_tp(),
                });
            }
        }

        let mut classes = Vec::with_capacity(registry.len());
        let mut scored = Vec::new();
        for id in registry.ids() {
            let class_ap = average_precision(&ranked[id.index()], n_gt[id.index()], cfg.interpolation);
            let (ap, pr_curve) = match class_ap {
                ClassAp::Skipped => (None, Vec::new()),
                ClassAp::Scored { ap, curve } => {
                    scored.push(ap);
                    (Some(ap), curve)
                }
            };
            classes.push(ClassReport {
                class: registry.name(id).unwrap_or_default().to_owned(),
                n_gt: n_gt[id.index()],
                ap,
                pr_curve,
            });
        }
        let map = scored.iter().sum::<f64>() / scored.len() as f64;
        thresholds.push(ThresholdReport {
            iou: t.value(),
            map,
            classes,
        });
    }

    Ok(EvalReport {
        tool: env!("CARGO_PKG_NAME").to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        detections_id: dets.model_id.clone(),
        manifest_id: manifest.fingerprint(),
        config_hash: cfg.hash(),
        interpolation: cfg.interpolation.as_str().to_owned(),
        thresholds,
    })
}
