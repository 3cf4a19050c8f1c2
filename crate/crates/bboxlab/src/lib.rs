//! # bboxlab
//!
//! A bounding-box regression metric laboratory: every metric of the IoU
//! family (IoU, GIoU, DIoU, CIoU, EIoU, SIoU), the tiny-object metrics
//! (DotD, NWD), and their shape-aware variants (Shape-IoU, Shape-DotD,
//! Shape-NWD), together with
//!
//! - exact loss gradients w.r.t. the predicted box (forward-mode duals),
//!   verified against central finite differences;
//! - brute-force IoU oracles (seeded Monte-Carlo sampling and grid
//!   rasterization) validating the analytic geometry;
//! - a simulation lab for deviation sweeps and synthetic gradient-descent
//!   regression runs comparing losses;
//! - dataset statistics (mean target size, NWD constant) from COCO-style
//!   JSON or YOLO-style txt annotations.
//!
//! The `bboxlab` binary exposes all of it on the command line.

pub mod boxcore;
pub mod cli;
pub mod datasets;
pub mod grad;
pub mod metrics;
pub mod oracle;
pub mod scalar;
pub mod simlab;

pub use boxcore::{BBox, BoxError, CornerBox, EnclosureInfo};
pub use grad::{BoxGradient, GradCheckReport};
pub use metrics::{MetricId, MetricParams, MetricResult, ShapeWeights};
pub use oracle::OracleEstimate;
pub use simlab::{Scenario, SweepCurve, SweepSpec, Trajectory};
