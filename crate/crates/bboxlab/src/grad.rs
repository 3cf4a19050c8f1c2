//! Gradients of every loss with respect to the predicted box's
//! `(x_c, y_c, w, h)`, plus a central finite-difference verifier.
//!
//! The gradient path evaluates the same generic formulas as
//! [`crate::metrics`], instantiated with [`Dual4`] forward-mode duals, so
//! analytic gradients agree with the implemented loss by construction. At
//! kinks the subgradient conventions documented in [`crate::scalar`] apply.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxcore::{self, BBox};
use crate::metrics::{self, MetricError, MetricId, MetricParams};
use crate::scalar::Dual4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("evaluation point is not generic for step {step}: {reason}")]
    NonGenericPoint { step: f64, reason: String },
    #[error("finite-difference step must be positive, got {0}")]
    NonPositiveStep(f64),
}

/// Partials of a loss w.r.t. the predicted box parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxGradient {
    pub d_xc: f64,
    pub d_yc: f64,
    pub d_w: f64,
    pub d_h: f64,
}

impl BoxGradient {
    pub fn as_array(&self) -> [f64; 4] {
        [self.d_xc, self.d_yc, self.d_w, self.d_h]
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Result of comparing an analytic gradient against central differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub per_component_err: [f64; 4],
    pub analytic: BoxGradient,
    pub numeric: [f64; 4],
    pub step: f64,
    pub pred: BBox,
    pub gt: BBox,
    pub metric: MetricId,
    pub params: MetricParams,
}

/// Gradient of `evaluate(id, pred, gt, params).loss` w.r.t. `pred`.
pub fn loss_gradient(
    id: MetricId,
    pred: &BBox,
    gt: &BBox,
    params: &MetricParams,
) -> Result<BoxGradient, MetricError> {
    let rp = metrics::resolve_params(id, params)?;
    let p = pred.params();
    let vars = [
        Dual4::var(p[0], 0),
        Dual4::var(p[1], 1),
        Dual4::var(p[2], 2),
        Dual4::var(p[3], 3),
    ];
    let (value, _) = metrics::eval_generic::<Dual4>(id, &vars, &gt.params(), &rp);
    // loss = 1 - value for every metric in the catalog
    Ok(BoxGradient {
        d_xc: -value.g[0],
        d_yc: -value.g[1],
        d_w: -value.g[2],
        d_h: -value.g[3],
    })
}

/// Genericity predicate: the point is far (relative to `step`) from every
/// kink of the catalog — center offsets, size ties, and box-edge alignments
/// — and the boxes overlap.
pub fn is_generic_point(pred: &BBox, gt: &BBox, step: f64) -> bool {
    generic_violation(pred, gt, step).is_none()
}

fn generic_violation(pred: &BBox, gt: &BBox, step: f64) -> Option<String> {
    let margin = 10.0 * step;
    let dx = (pred.x_c() - gt.x_c()).abs();
    let dy = (pred.y_c() - gt.y_c()).abs();
    if dx <= margin {
        return Some(format!("|dx| = {dx} <= {margin}"));
    }
    if dy <= margin {
        return Some(format!("|dy| = {dy} <= {margin}"));
    }
    if (pred.w() - gt.w()).abs() <= margin {
        return Some("|w - w_gt| too small".into());
    }
    if (pred.h() - gt.h()).abs() <= margin {
        return Some("|h - h_gt| too small".into());
    }
    if boxcore::intersection_area(pred, gt) <= 0.0 {
        return Some("boxes do not overlap".into());
    }
    let pc = pred.to_corners();
    let gc = gt.to_corners();
    for (p, g, name) in [
        (pc.x_min, gc.x_min, "x_min"),
        (pc.x_max, gc.x_max, "x_max"),
        (pc.y_min, gc.y_min, "y_min"),
        (pc.y_max, gc.y_max, "y_max"),
    ] {
        if (p - g).abs() <= margin {
            return Some(format!("edge gap {name} too small"));
        }
    }
    // near-diagonal centers sit at the kink of SIoU's asin
    if (dx - dy).abs() <= margin {
        return Some("|dx| == |dy| (SIoU angle kink)".into());
    }
    None
}

/// Central finite-difference check of [`loss_gradient`] at a generic point.
pub fn finite_diff_check(
    id: MetricId,
    pred: &BBox,
    gt: &BBox,
    params: &MetricParams,
    step: f64,
) -> Result<GradCheckReport, GradError> {
    if step <= 0.0 {
        return Err(GradError::NonPositiveStep(step));
    }
    if let Some(reason) = generic_violation(pred, gt, step) {
        return Err(GradError::NonGenericPoint { step, reason });
    }
    let analytic = loss_gradient(id, pred, gt, params)?;
    let base = pred.params();
    let mut numeric = [0.0; 4];
    for i in 0..4 {
        let mut hi = base;
        let mut lo = base;
        hi[i] += step;
        lo[i] -= step;
        let f = |p: [f64; 4]| -> Result<f64, GradError> {
            let b = BBox::from_params(p).expect("generic point stays valid under step");
            Ok(metrics::evaluate(id, &b, gt, params)?.loss)
        };
        numeric[i] = (f(hi)? - f(lo)?) / (2.0 * step);
    }
    let a = analytic.as_array();
    let mut per_component_err = [0.0; 4];
    let mut max_rel_err = 0.0f64;
    for i in 0..4 {
        per_component_err[i] = (a[i] - numeric[i]).abs() / numeric[i].abs().max(1.0);
        max_rel_err = max_rel_err.max(per_component_err[i]);
    }
    Ok(GradCheckReport {
        max_rel_err,
        per_component_err,
        analytic,
        numeric,
        step,
        pred: *pred,
        gt: *gt,
        metric: id,
        params: params.clone(),
    })
}
