// End-to-end file pipeline: manifest -> two synthetic detectors -> consensus
// fusion -> evaluation reports -> benchmark table, all through the on-disk
// formats.
//
// Run with `cargo run --example synthetic_pipeline -- [out_dir]`.

use std::path::PathBuf;

use detfuse::io::{load_detections, load_manifest, load_report, write_detections, write_manifest, write_report};
use detfuse::report::{Report, ReportFormat, BenchmarkTable};
use detfuse::synth::{generate, random_manifest, PerturbConfig, SceneConfig};
use detfuse::{evaluate, run_ensemble, ClassRegistry, EnsembleConfig, EvalConfig, IouThreshold};

fn run_example() -> anyhow::Result<()> {
    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => std::env::temp_dir().join("detfuse_pipeline"),
    };
    std::fs::create_dir_all(&dir)?;

    let manifest = random_manifest(&SceneConfig { seed: 5, n_images: 30, ..Default::default() }, ClassRegistry::ead())?;
    write_manifest(&manifest, dir.join("manifest.json"))?;
    let manifest = load_manifest(dir.join("manifest.json"))?;

    let specs = [("yolact", 1u64, 0.06), ("yolov4", 2, 0.14)];
    let mut files = Vec::new();
    for (model, seed, jitter) in specs {
        let cfg = PerturbConfig { seed, jitter, ..Default::default() };
        let path = dir.join(format!("detections.{model}.json"));
        write_detections(&generate(&manifest, &cfg, model)?, &path)?;
        files.push(load_detections(&path, &manifest)?);
    }
    let fused = run_ensemble(&files, &manifest, &EnsembleConfig::default())?;
    write_detections(&fused, dir.join("detections.ensemble.json"))?;
    files.push(fused);

    let mut table = BenchmarkTable::new(&IouThreshold::CANONICAL);
    for (file, name) in files.iter().zip(["YOLACT", "YOLOv4", "CEM"]) {
        let report = evaluate(file, &manifest, &EvalConfig::default())?;
        let path = dir.join(format!("report.{}.json", file.model_id));
        write_report(Report::Eval(&report), &path, ReportFormat::Json)?;
        table.push_report(name, None, &load_report(&path)?)?;
    }
    write_report(Report::Benchmark(&table), dir.join("benchmark.csv"), ReportFormat::Csv)?;
    write_report(Report::Benchmark(&table), dir.join("benchmark.svg"), ReportFormat::Svg)?;
    print!("{}", std::fs::read_to_string(dir.join("benchmark.csv"))?);
    println!("artifacts in {}", dir.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
