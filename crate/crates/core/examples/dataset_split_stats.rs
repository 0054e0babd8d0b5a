// Class distribution and a seeded image-level train/test split.
//
// Run with `cargo run --example dataset_split_stats`.

use detfuse::model::{class_distribution, split_manifest};
use detfuse::synth::{random_manifest, SceneConfig};
use detfuse::ClassRegistry;

fn run_example() -> anyhow::Result<()> {
    let manifest = random_manifest(
        &SceneConfig { seed: 2020, n_images: 120, max_boxes: 12, ..Default::default() },
        ClassRegistry::ead(),
    )?;
    let dist = class_distribution(&manifest);
    print!("{}", dist.to_csv());

    let (train, test) = split_manifest(&manifest, 0.2, 7)?;
    println!(
        "split: {} train images ({} boxes), {} test images ({} boxes)",
        train.images().len(),
        train.annotations().len(),
        test.images().len(),
        test.annotations().len()
    );
    anyhow::ensure!(train.images().len() == 96 && test.images().len() == 24);
    anyhow::ensure!(train.annotations().len() + test.annotations().len() == dist.total);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
