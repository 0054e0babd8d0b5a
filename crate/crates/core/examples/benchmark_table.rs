// Table-style benchmark CSV and the per-threshold mAP scatter plot.
//
// Run with `cargo run --example benchmark_table -- [out_dir]`; the SVG is
// written to `out_dir` (default: the system temp directory).

use detfuse::report::{benchmark_csv, plot_svg, BenchmarkRow, BenchmarkTable};
use detfuse::IouThreshold;

fn run_example() -> anyhow::Result<()> {
    let mut table = BenchmarkTable::new(&IouThreshold::CANONICAL);
    for (method, map) in [
        ("YOLACT", [0.9188, 0.8195, 0.598]),
        ("YOLOv4", [0.6583, 0.5122, 0.3155]),
        ("CEM", [0.8544, 0.755, 0.6047]),
    ] {
        table.push_row(BenchmarkRow { method: method.into(), run: None, map: map.to_vec() })?;
    }
    let csv = benchmark_csv(&table);
    print!("{csv}");
    anyhow::ensure!(csv.lines().nth(3) == Some("CEM,85.44,75.50,60.47"));

    // Scatter over several experiment runs, as in an augmentation study.
    let mut runs = BenchmarkTable::new(&IouThreshold::CANONICAL);
    for (run, shift) in [("original", 0.0), ("geometric", 0.02), ("distortion", -0.01), ("flips", 0.03)] {
        for (method, base) in [("YOLOv4", [0.62, 0.48, 0.29]), ("YOLACT", [0.88, 0.78, 0.56]), ("CEM", [0.83, 0.73, 0.58])] {
            runs.push_row(BenchmarkRow {
                method: method.into(),
                run: Some(run.into()),
                map: base.iter().map(|v| v + shift).collect(),
            })?;
        }
    }
    let dir = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let path = dir.join("detfuse_map_scatter.svg");
    std::fs::write(&path, plot_svg(&runs))?;
    println!("plot written to {}", path.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
