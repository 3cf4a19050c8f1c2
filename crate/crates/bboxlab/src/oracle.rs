//! Independent brute-force IoU estimators used to validate the analytic
//! geometry: Monte-Carlo point sampling and grid rasterization.
//!
//! The Monte-Carlo sampler draws from ChaCha12 (a portable, documented
//! stream cipher RNG), so estimates are bit-reproducible across platforms
//! for a given seed. Sampling is restricted to the enclosing box of the
//! pair, the smallest region carrying any mass of the ratio.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::boxcore::{enclosure, BBox};

/// Name of the random generator backing [`mc_iou`], recorded in every
/// estimate for provenance.
pub const GENERATOR: &str = "chacha12";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("degenerate sample: no point fell in either box ({n_samples} samples, seed {seed})")]
    DegenerateSample { n_samples: u64, seed: u64 },
    #[error("sample count must be at least 1")]
    EmptySampleCount,
    #[error("grid resolution must be at least 2 cells per axis, got {0}")]
    ResolutionTooLow(u32),
}

/// A Monte-Carlo IoU estimate with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub value: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// Conservative standard-error bound `0.5 / sqrt(n)` for the ratio
    /// estimator.
    pub stderr_bound: f64,
    pub generator: String,
}

/// Estimate IoU by sampling `n` uniform points in the enclosing box and
/// counting membership: `(#in both) / (#in either)`.
pub fn mc_iou(a: &BBox, b: &BBox, n: u64, seed: u64) -> Result<OracleEstimate, OracleError> {
    if n == 0 {
        return Err(OracleError::EmptySampleCount);
    }
    let enc = enclosure(a, b).enclosing;
    let ac = a.to_corners();
    let bc = b.to_corners();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let (w, h) = (enc.width(), enc.height());
    let mut in_both = 0u64;
    let mut in_either = 0u64;
    for _ in 0..n {
        let x = enc.x_min + rng.gen::<f64>() * w;
        let y = enc.y_min + rng.gen::<f64>() * h;
        let ia = ac.contains_point(x, y);
        let ib = bc.contains_point(x, y);
        if ia && ib {
            in_both += 1;
        }
        if ia || ib {
            in_either += 1;
        }
    }
    if in_either == 0 {
        return Err(OracleError::DegenerateSample {
            n_samples: n,
            seed,
        });
    }
    Ok(OracleEstimate {
        value: in_both as f64 / in_either as f64,
        n_samples: n,
        seed,
        stderr_bound: 0.5 / (n as f64).sqrt(),
        generator: GENERATOR.to_string(),
    })
}

/// Estimate IoU by rasterizing the enclosing box into
/// `cells_per_axis x cells_per_axis` cells and counting cell-center
/// membership. Error is O(perimeter / cells_per_axis) relative to the
/// enclosing size.
pub fn grid_iou(a: &BBox, b: &BBox, cells_per_axis: u32) -> Result<f64, OracleError> {
    if cells_per_axis < 2 {
        return Err(OracleError::ResolutionTooLow(cells_per_axis));
    }
    let enc = enclosure(a, b).enclosing;
    let ac = a.to_corners();
    let bc = b.to_corners();
    let n = cells_per_axis as usize;
    let dx = enc.width() / cells_per_axis as f64;
    let dy = enc.height() / cells_per_axis as f64;
    let mut in_both = 0u64;
    let mut in_either = 0u64;
    for j in 0..n {
        let y = enc.y_min + (j as f64 + 0.5) * dy;
        let ay = y >= ac.y_min && y <= ac.y_max;
        let by = y >= bc.y_min && y <= bc.y_max;
        if !ay && !by {
            continue;
        }
        for i in 0..n {
            let x = enc.x_min + (i as f64 + 0.5) * dx;
            let ia = ay && x >= ac.x_min && x <= ac.x_max;
            let ib = by && x >= bc.x_min && x <= bc.x_max;
            if ia && ib {
                in_both += 1;
            }
            if ia || ib {
                in_either += 1;
            }
        }
    }
    if in_either == 0 {
        return Ok(0.0);
    }
    Ok(in_both as f64 / in_either as f64)
}
