// Class-aware versus class-agnostic non-maximum suppression.
//
// Run with `cargo run --example nms_modes`.

use detfuse::model::{ClassRegistry, Detection};
use detfuse::{nms, BoundingBox, NmsConfig, NmsMode};

fn run_example() -> anyhow::Result<()> {
    let reg = ClassRegistry::ead();
    let blur = reg.id("blur").expect("EAD class");
    let blood = reg.id("blood").expect("EAD class");
    let same = BoundingBox::new(40.0, 40.0, 60.0, 60.0)?;
    let shifted = BoundingBox::new(45.0, 42.0, 60.0, 60.0)?;

    let dets = vec![
        Detection::new("frame_001", blur, same, 0.92, "yolov4")?,
        Detection::new("frame_001", blur, shifted, 0.81, "yolov4")?,
        Detection::new("frame_001", blood, same, 0.66, "yolov4")?,
    ];

    let aware = nms(&dets, &NmsConfig::default())?;
    let agnostic = nms(
        &dets,
        &NmsConfig {
            mode: NmsMode::ClassAgnostic,
            ..Default::default()
        },
    )?;
    for (label, kept) in [("class-aware", &aware), ("class-agnostic", &agnostic)] {
        println!("{label}: kept {} of {}", kept.len(), dets.len());
        for d in kept {
            println!("  {:<6} score {:.2}", reg.name(d.class_id).unwrap_or("?"), d.score);
        }
    }
    anyhow::ensure!(aware.len() == 2 && agnostic.len() == 1);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
