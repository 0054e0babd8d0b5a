// Affirmative, consensus and unanimous voting over two synthetic detectors.
//
// Run with `cargo run --example voting_strategies`.

use detfuse::ensemble::ensemble_groups;
use detfuse::synth::{generate, random_manifest, PerturbConfig, SceneConfig};
use detfuse::{evaluate, run_ensemble, ClassRegistry, EnsembleConfig, EvalConfig, VotingStrategy};

fn run_example() -> anyhow::Result<()> {
    let manifest = random_manifest(
        &SceneConfig {
            seed: 11,
            n_images: 40,
            ..Default::default()
        },
        ClassRegistry::ead(),
    )?;
    let precise = generate(
        &manifest,
        &PerturbConfig { seed: 1, jitter: 0.05, drop_rate: 0.2, fp_rate: 1.0, ..Default::default() },
        "yolact",
    )?;
    let loose = generate(
        &manifest,
        &PerturbConfig { seed: 2, jitter: 0.15, drop_rate: 0.1, fp_rate: 1.5, ..Default::default() },
        "yolov4",
    )?;
    let models = [precise.clone(), loose.clone()];

    println!("{:<12} {:>8} {:>8} {:>8} {:>8}", "input", "boxes", "mAP25", "mAP50", "mAP75");
    let row = |name: &str, file: &detfuse::DetectionFile| -> anyhow::Result<Vec<f64>> {
        let r = evaluate(file, &manifest, &EvalConfig::default())?;
        let maps: Vec<f64> = r.thresholds.iter().map(|t| t.map).collect();
        println!(
            "{:<12} {:>8} {:>8.2} {:>8.2} {:>8.2}",
            name,
            file.detections.len(),
            maps[0] * 100.0,
            maps[1] * 100.0,
            maps[2] * 100.0
        );
        Ok(maps)
    };
    row("yolact", &precise)?;
    row("yolov4", &loose)?;

    let mut sizes = Vec::new();
    for strategy in [VotingStrategy::Affirmative, VotingStrategy::Consensus, VotingStrategy::Unanimous] {
        let cfg = EnsembleConfig { strategy, ..Default::default() };
        let fused = run_ensemble(&models, &manifest, &cfg)?;
        row(strategy.as_str(), &fused)?;
        sizes.push(ensemble_groups(&models, &manifest, &cfg)?.len());
    }
    // With two models, consensus needs both, exactly like unanimous.
    anyhow::ensure!(sizes[1] == sizes[2] && sizes[1] <= sizes[0]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
