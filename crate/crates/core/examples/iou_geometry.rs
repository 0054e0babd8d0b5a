// Box construction, corner conversion and IoU.
//
// Run with `cargo run --example iou_geometry`.

use detfuse::geometry::{iou, BoundingBox};

fn run_example() -> anyhow::Result<()> {
    let a = BoundingBox::new(0.0, 0.0, 2.0, 2.0)?;
    let b = BoundingBox::new(1.0, 1.0, 2.0, 2.0)?;
    let far = BoundingBox::new(10.0, 10.0, 2.0, 2.0)?;
    println!("area(a)      = {}", a.area());
    println!("iou(a, a)    = {}", iou(&a, &a));
    println!("iou(a, b)    = {:.6}  (one shared cell of seven)", iou(&a, &b));
    println!("iou(a, far)  = {}", iou(&a, &far));

    let from_corners = BoundingBox::from_corners(10.0, 5.0, 30.0, 25.0)?;
    println!("corners [10, 5, 30, 25] -> xywh {:?}", from_corners.to_array());

    match BoundingBox::new(3.0, 3.0, 0.0, 4.0) {
        Ok(_) => anyhow::bail!("degenerate box was accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    anyhow::ensure!(iou(&a, &b) == iou(&b, &a));
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
