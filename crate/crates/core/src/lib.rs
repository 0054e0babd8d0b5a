//! Detection ensembling and evaluation.
//!
//! Combines bounding-box predictions from several object detectors by
//! affirmative, consensus or unanimous voting, and scores any detection set
//! with mean average precision at IoU 0.25, 0.50 and 0.75.
//!
//! ```
//! use detfuse::geometry::{iou, BoundingBox};
//!
//! let a = BoundingBox::new(0.0, 0.0, 2.0, 2.0).unwrap();
//! let b = BoundingBox::new(1.0, 1.0, 2.0, 2.0).unwrap();
//! assert!((iou(&a, &b) - 1.0 / 7.0).abs() < 1e-12);
//! ```
//!
//! The `examples/` directory has one runnable program per capability.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod model;
pub mod nms;
pub mod report;
pub mod rng;
pub mod synth;

pub use ensemble::{run_ensemble, EnsembleConfig, FusedGroup, VotingStrategy};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalConfig, EvalReport, Interpolation, IouThreshold};
pub use geometry::BoundingBox;
pub use io::DetectionFile;
pub use model::{ClassId, ClassRegistry, DatasetManifest, Detection, GroundTruthAnnotation, ImageInfo};
pub use nms::{nms, NmsConfig, NmsMode};
