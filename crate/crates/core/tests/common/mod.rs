//! Independent reference implementations and random instance generators
//! shared by the integration and acceptance tests.
//!
//! Nothing here calls the library's geometry, matching, AP, NMS or grouping
//! code; only its data types are reused.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use detfuse::io::DetectionFile;
use detfuse::model::{
    ClassId, ClassRegistry, DatasetManifest, Detection, GroundTruthAnnotation, ImageInfo,
};
use detfuse::rng::SplitMix64;
use detfuse::BoundingBox;
use num_rational::Rational64;

pub type Q = Rational64;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

pub fn to_f64(r: Q) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Integer box corners `(x1, y1, x2, y2)`; panics on non-integer input.
fn int_corners(b: &BoundingBox) -> (i64, i64, i64, i64) {
    let c = b.corners();
    for v in c {
        assert_eq!(v.fract(), 0.0, "oracle needs integer boxes");
    }
    (c[0] as i64, c[1] as i64, c[2] as i64, c[3] as i64)
}

/// IoU by rasterizing both boxes on the unit grid and counting cells.
pub fn grid_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax1, ay1, ax2, ay2) = int_corners(a);
    let (bx1, by1, bx2, by2) = int_corners(b);
    let (mut inter, mut union) = (0u64, 0u64);
    for x in ax1.min(bx1)..ax2.max(bx2) {
        for y in ay1.min(by1)..ay2.max(by2) {
            let in_a = x >= ax1 && x < ax2 && y >= ay1 && y < ay2;
            let in_b = x >= bx1 && x < bx2 && y >= by1 && y < by2;
            inter += (in_a && in_b) as u64;
            union += (in_a || in_b) as u64;
        }
    }
    inter as f64 / union as f64
}

/// Exact IoU of integer boxes.
pub fn exact_iou(a: &BoundingBox, b: &BoundingBox) -> Q {
    let (ax1, ay1, ax2, ay2) = int_corners(a);
    let (bx1, by1, bx2, by2) = int_corners(b);
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0);
    let inter = iw * ih;
    let union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter;
    q(inter, union)
}

/// Exact version of a float threshold that is a multiple of 1/100.
pub fn exact_threshold(t: f64) -> Q {
    let hundredths = (t * 100.0).round() as i64;
    assert!(((hundredths as f64) / 100.0 - t).abs() < 1e-12);
    q(hundredths, 100)
}

/// mAP per threshold by exhaustive PR enumeration in exact arithmetic.
///
/// Matching: detections of each (image, class) visited by descending score,
/// then file index; each takes the unmatched annotation of largest exact IoU
/// (lowest annotation index on ties) if that IoU reaches the threshold.
/// AP: every prefix of the class ranking (score desc, image id, file index)
/// gives an exact (precision, recall); AP sums recall increments times the
/// best precision at that prefix or any longer one.
pub fn oracle_map(manifest: &DatasetManifest, dets: &DetectionFile, thresholds: &[f64]) -> Vec<f64> {
    let n_classes = manifest.registry().len();
    thresholds
        .iter()
        .map(|&t| {
            let t = exact_threshold(t);
            let mut tp_flags: BTreeMap<usize, bool> = BTreeMap::new();
            for img in manifest.images() {
                for c in 0..n_classes {
                    let gts: Vec<&GroundTruthAnnotation> = manifest
                        .annotations()
                        .iter()
                        .filter(|g| g.image_id == img.id && g.class_id.0 == c)
                        .collect();
                    let mut ds: Vec<(usize, &Detection)> = dets
                        .detections
                        .iter()
                        .enumerate()
                        .filter(|(_, d)| d.image_id == img.id && d.class_id.0 == c)
                        .collect();
                    ds.sort_by(|a, b| b.1.score.partial_cmp(&a.1.score).unwrap().then(a.0.cmp(&b.0)));
                    let mut used = vec![false; gts.len()];
                    for (idx, d) in ds {
                        let mut best: Option<(usize, Q)> = None;
                        for (g, gt) in gts.iter().enumerate() {
                            if used[g] {
                                continue;
                            }
                            let v = exact_iou(&d.bbox, &gt.bbox);
                            if v >= t && best.is_none_or(|(_, bv)| v > bv) {
                                best = Some((g, v));
                            }
                        }
                        if let Some((g, _)) = best {
                            used[g] = true;
                        }
                        tp_flags.insert(idx, best.is_some());
                    }
                }
            }

            let mut aps = Vec::new();
            for c in 0..n_classes {
                let n_gt = manifest.annotations().iter().filter(|g| g.class_id.0 == c).count() as i64;
                if n_gt == 0 {
                    continue;
                }
                let mut ranked: Vec<(usize, &Detection)> = dets
                    .detections
                    .iter()
                    .enumerate()
                    .filter(|(_, d)| d.class_id.0 == c)
                    .collect();
                ranked.sort_by(|a, b| {
                    b.1.score
                        .partial_cmp(&a.1.score)
                        .unwrap()
                        .then_with(|| a.1.image_id.cmp(&b.1.image_id))
                        .then(a.0.cmp(&b.0))
                });
                let mut prefixes: Vec<(Q, Q)> = Vec::new();
                for k in 1..=ranked.len() {
                    let tp = ranked[..k].iter().filter(|(i, _)| tp_flags[i]).count() as i64;
                    prefixes.push((q(tp, k as i64), q(tp, n_gt)));
                }
                let mut ap = q(0, 1);
                let mut prev_recall = q(0, 1);
                for k in 0..prefixes.len() {
                    let recall = prefixes[k].1;
                    if recall > prev_recall {
                        let best = prefixes[k..].iter().map(|p| p.0).max().unwrap();
                        ap += (recall - prev_recall) * best;
                        prev_recall = recall;
                    }
                }
                aps.push(ap);
            }
            let sum: Q = aps.iter().copied().fold(q(0, 1), |a, b| a + b);
            to_f64(sum / Q::from_integer(aps.len() as i64))
        })
        .collect()
}

/// Greedy NMS result found by exhaustive subset search.
///
/// The greedy output is the unique subset S of the above-floor detections
/// such that no two members of S (in scope) overlap at or above the
/// threshold and every excluded detection overlaps some higher-priority
/// member of S. Priority is descending score, then input index.
pub fn oracle_nms(dets: &[Detection], threshold: f64, agnostic: bool, floor: f64) -> Vec<usize> {
    let n = dets.len();
    assert!(n <= 12);
    let higher = |a: usize, b: usize| {
        dets[a].score > dets[b].score || (dets[a].score == dets[b].score && a < b)
    };
    let conflict = |a: usize, b: usize| {
        (agnostic || dets[a].class_id == dets[b].class_id)
            && reference_iou(&dets[a].bbox, &dets[b].bbox) >= threshold
    };
    let eligible: Vec<usize> = (0..n).filter(|&i| dets[i].score >= floor).collect();
    let mut solutions = Vec::new();
    for mask in 0u32..(1 << eligible.len()) {
        let members: Vec<usize> = eligible
            .iter()
            .enumerate()
            .filter(|(bit, _)| mask & (1 << bit) != 0)
            .map(|(_, &i)| i)
            .collect();
        let independent = members
            .iter()
            .all(|&a| members.iter().all(|&b| a == b || !conflict(a, b)));
        let dominated = eligible
            .iter()
            .filter(|i| !members.contains(i))
            .all(|&i| members.iter().any(|&m| higher(m, i) && conflict(m, i)));
        if independent && dominated {
            solutions.push(members);
        }
    }
    assert_eq!(solutions.len(), 1, "greedy NMS fixed point must be unique");
    let mut out = solutions.pop().unwrap();
    out.sort_by(|&a, &b| if higher(a, b) { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater });
    out
}

/// Plain-formula IoU on corners, written independently of the library.
pub fn reference_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let [ax1, ay1, ax2, ay2] = a.corners();
    let [bx1, by1, bx2, by2] = b.corners();
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    inter / ((ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter)
}

pub fn int_box(x: i64, y: i64, w: i64, h: i64) -> BoundingBox {
    BoundingBox::new(x as f64, y as f64, w as f64, h as f64).unwrap()
}

/// Random integer box inside a `size x size` canvas.
pub fn random_int_box(rng: &mut SplitMix64, size: i64, max_side: i64) -> BoundingBox {
    let w = 1 + rng.below(max_side as u64) as i64;
    let h = 1 + rng.below(max_side as u64) as i64;
    let x = rng.below((size - w + 1) as u64) as i64;
    let y = rng.below((size - h + 1) as u64) as i64;
    int_box(x, y, w, h)
}

pub struct EvalInstance {
    pub manifest: DatasetManifest,
    pub detections: DetectionFile,
}

/// Small random evaluation instance: up to 5 images, 10 annotations,
/// 10 detections and 3 classes, with integer boxes clustered so that
/// matches at every threshold occur, and scores on a coarse grid so ties
/// happen.
pub fn random_eval_instance(seed: u64) -> EvalInstance {
    let mut rng = SplitMix64::new(seed);
    let n_classes = 1 + rng.below(3) as usize;
    let registry = ClassRegistry::new((0..n_classes).map(|c| format!("c{c}"))).unwrap();
    let n_images = 1 + rng.below(5) as usize;
    let size = 24;
    let images: Vec<ImageInfo> = (0..n_images)
        .map(|i| ImageInfo {
            id: format!("im{}", (b'a' + (n_images - 1 - i) as u8) as char),
            width: size as u32,
            height: size as u32,
        })
        .collect();
    let n_gt = 1 + rng.below(10) as usize;
    let annotations: Vec<GroundTruthAnnotation> = (0..n_gt)
        .map(|_| GroundTruthAnnotation {
            image_id: images[rng.below(n_images as u64) as usize].id.clone(),
            class_id: ClassId(rng.below(n_classes as u64) as usize),
            bbox: random_int_box(&mut rng, size, 12),
        })
        .collect();
    let n_det = rng.below(11) as usize;
    let detections: Vec<Detection> = (0..n_det)
        .map(|_| {
            let score = rng.below(6) as f64 / 5.0;
            if !annotations.is_empty() && rng.bernoulli(0.7) {
                // Near an annotation: shift and resize by a pixel or two.
                let g = &annotations[rng.below(annotations.len() as u64) as usize];
                let c = g.bbox.corners();
                let jig = |rng: &mut SplitMix64| rng.below(5) as i64 - 2;
                let x1 = (c[0] as i64 + jig(&mut rng)).clamp(0, size - 1);
                let y1 = (c[1] as i64 + jig(&mut rng)).clamp(0, size - 1);
                let x2 = (c[2] as i64 + jig(&mut rng)).clamp(x1 + 1, size);
                let y2 = (c[3] as i64 + jig(&mut rng)).clamp(y1 + 1, size);
                let class_id = if rng.bernoulli(0.85) {
                    g.class_id
                } else {
                    ClassId(rng.below(n_classes as u64) as usize)
                };
                Detection::new(g.image_id.clone(), class_id, int_box(x1, y1, x2 - x1, y2 - y1), score, "m")
                    .unwrap()
            } else {
                Detection::new(
                    images[rng.below(n_images as u64) as usize].id.clone(),
                    ClassId(rng.below(n_classes as u64) as usize),
                    random_int_box(&mut rng, size, 12),
                    score,
                    "m",
                )
                .unwrap()
            }
        })
        .collect();
    let manifest = DatasetManifest::new(images, annotations, registry.clone()).unwrap();
    EvalInstance {
        manifest,
        detections: DetectionFile::new("m", detections, registry),
    }
}

/// Detections equal to the manifest's ground truth, all scored 1.
pub fn perfect_detections(manifest: &DatasetManifest) -> DetectionFile {
    let dets = manifest
        .annotations()
        .iter()
        .map(|g| Detection::new(g.image_id.clone(), g.class_id, g.bbox, 1.0, "perfect").unwrap())
        .collect();
    DetectionFile::new("perfect", dets, manifest.registry().clone())
}

/// Expected ensemble output for well-separated scenes.
///
/// Groups are the connected components of the graph joining same-class
/// detections of different models with IoU >= `group_iou` (all pairs
/// enumerated). A component survives when its distinct model count meets
/// `required`; its fused box is the score-weighted mean of members and its
/// score their mean.
/// image, class, fused box, fused score, supporting models
pub type OracleGroup = (String, ClassId, [f64; 4], f64, BTreeSet<String>);

pub fn oracle_ensemble(
    files: &[DetectionFile],
    group_iou: f64,
    required: usize,
) -> Vec<OracleGroup> {
    let pool: Vec<&Detection> = files.iter().flat_map(|f| f.detections.iter()).collect();
    let n = pool.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            i = parent[i];
        }
        i
    }
    for a in 0..n {
        for b in a + 1..n {
            let (da, db) = (pool[a], pool[b]);
            if da.image_id == db.image_id
                && da.class_id == db.class_id
                && da.model_id != db.model_id
                && reference_iou(&da.bbox, &db.bbox) >= group_iou
            {
                let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    let mut comps: BTreeMap<usize, Vec<&Detection>> = BTreeMap::new();
    for (i, d) in pool.iter().enumerate() {
        let r = root(&mut parent, i);
        comps.entry(r).or_default().push(*d);
    }
    let mut out = Vec::new();
    for members in comps.into_values() {
        let models: BTreeSet<String> = members.iter().map(|d| d.model_id.clone()).collect();
        if models.len() < required {
            continue;
        }
        let total: f64 = members.iter().map(|d| d.score).sum();
        let mut coords = [0.0; 4];
        for d in &members {
            for (c, v) in coords.iter_mut().zip(d.bbox.to_array()) {
                *c += d.score / total * v;
            }
        }
        let score = total / members.len() as f64;
        out.push((members[0].image_id.clone(), members[0].class_id, coords, score, models));
    }
    out
}
