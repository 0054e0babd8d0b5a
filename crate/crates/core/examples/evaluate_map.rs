// Matching, per-class AP and mAP at IoU 0.25 / 0.50 / 0.75.
//
// Run with `cargo run --example evaluate_map`.

use detfuse::eval::{average_precision, ClassAp, RankedVerdict};
use detfuse::synth::{generate, random_manifest, PerturbConfig, SceneConfig};
use detfuse::{evaluate, ClassRegistry, EvalConfig, Interpolation};

fn run_example() -> anyhow::Result<()> {
    // The textbook case: 2 annotations, ranked TP, FP, TP.
    let ranked: Vec<RankedVerdict> = [(0.9, true), (0.8, false), (0.7, true)]
        .iter()
        .enumerate()
        .map(|(index, &(score, true_positive))| RankedVerdict {
            score,
            image_id: "img".into(),
            index,
            true_positive,
        })
        .collect();
    if let ClassAp::Scored { ap, curve } = average_precision(&ranked, 2, Interpolation::AllPoint) {
        println!("AP of TP/FP/TP over 2 annotations = {ap:.6}");
        for p in curve {
            println!("  recall {:.2} precision {:.4}", p.recall, p.precision);
        }
    }

    let manifest = random_manifest(&SceneConfig { seed: 3, n_images: 25, ..Default::default() }, ClassRegistry::ead())?;
    let dets = generate(&manifest, &PerturbConfig { seed: 8, jitter: 0.2, ..Default::default() }, "synth")?;
    let report = evaluate(&dets, &manifest, &EvalConfig::default())?;
    println!("\n{} detections, config {}", dets.detections.len(), report.config_hash);
    for t in &report.thresholds {
        println!("IoU {:.2}: mAP {:.2}", t.iou, t.map * 100.0);
        for c in t.classes.iter().filter(|c| c.ap.is_some()) {
            println!("    {:<12} n_gt {:>3}  AP {:>6.2}", c.class, c.n_gt, c.ap.unwrap_or(0.0) * 100.0);
        }
    }
    let maps: Vec<f64> = report.thresholds.iter().map(|t| t.map).collect();
    anyhow::ensure!(maps[0] >= maps[1] && maps[1] >= maps[2]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
