//! The metric catalog: the IoU family (IoU, GIoU, DIoU, CIoU, EIoU, SIoU),
//! the tiny-object family (DotD, NWD), and the shape-aware family
//! (Shape-IoU, Shape-DotD, Shape-NWD).
//!
//! Every metric returns a [`MetricResult`]: a match value (higher is
//! better, 1 for identical boxes where applicable), the loss `1 - value`,
//! and a breakdown of named penalty components.
//!
//! The formulas are written once over the generic scalar from
//! [`crate::scalar`], so the f64 evaluation path and the dual-number
//! gradient path in [`crate::grad`] cannot drift apart.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxcore::{geom, BBox};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("metric {metric} requires parameter `{param}`")]
    MissingParam { metric: MetricId, param: &'static str },
    #[error("parameter `{param}` must be positive, got {value}")]
    NonPositiveParam { param: &'static str, value: f64 },
}

/// Identifier for every metric in the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricId {
    #[serde(rename = "iou")]
    Iou,
    #[serde(rename = "giou")]
    GIou,
    #[serde(rename = "diou")]
    DIou,
    #[serde(rename = "ciou")]
    CIou,
    #[serde(rename = "eiou")]
    EIou,
    #[serde(rename = "siou")]
    SIou,
    #[serde(rename = "shape-iou")]
    ShapeIou,
    #[serde(rename = "dotd")]
    DotD,
    #[serde(rename = "nwd")]
    Nwd,
    #[serde(rename = "shape-dotd")]
    ShapeDotD,
    #[serde(rename = "shape-nwd")]
    ShapeNwd,
}

impl MetricId {
    pub const ALL: [MetricId; 11] = [
        MetricId::Iou,
        MetricId::GIou,
        MetricId::DIou,
        MetricId::CIou,
        MetricId::EIou,
        MetricId::SIou,
        MetricId::ShapeIou,
        MetricId::DotD,
        MetricId::Nwd,
        MetricId::ShapeDotD,
        MetricId::ShapeNwd,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricId::Iou => "iou",
            MetricId::GIou => "giou",
            MetricId::DIou => "diou",
            MetricId::CIou => "ciou",
            MetricId::EIou => "eiou",
            MetricId::SIou => "siou",
            MetricId::ShapeIou => "shape-iou",
            MetricId::DotD => "dotd",
            MetricId::Nwd => "nwd",
            MetricId::ShapeDotD => "shape-dotd",
            MetricId::ShapeNwd => "shape-nwd",
        }
    }

    /// True for metrics whose distance term is normalized by the dataset
    /// mean size S.
    pub fn needs_mean_size(&self) -> bool {
        matches!(self, MetricId::DotD | MetricId::ShapeDotD)
    }

    /// True for metrics normalized by the dataset constant C.
    pub fn needs_nwd_c(&self) -> bool {
        matches!(self, MetricId::Nwd | MetricId::ShapeNwd)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown metric `{s}` (expected one of: iou, giou, diou, ciou, eiou, siou, shape-iou, dotd, nwd, shape-dotd, shape-nwd)"))
    }
}

/// Metric hyperparameters. Defaults are neutral: `scale = 0` (uniform shape
/// weights), `theta = 4`, omega coefficient `0.5`, SIoU stabilizer `1e-7`.
/// `mean_size_s` and `nwd_c` have no meaningful default and must be supplied
/// for the DotD / NWD families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    pub scale: f64,
    pub mean_size_s: Option<f64>,
    pub nwd_c: Option<f64>,
    pub siou_theta: f64,
    pub shape_omega_coeff: f64,
    pub eps: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            scale: 0.0,
            mean_size_s: None,
            nwd_c: None,
            siou_theta: 4.0,
            shape_omega_coeff: 0.5,
            eps: 1e-7,
        }
    }
}

impl MetricParams {
    pub fn with_scale(scale: f64) -> Self {
        MetricParams {
            scale,
            ..Default::default()
        }
    }

    pub fn with_mean_size(mean_size_s: f64) -> Self {
        MetricParams {
            mean_size_s: Some(mean_size_s),
            ..Default::default()
        }
    }

    pub fn with_nwd_c(nwd_c: f64) -> Self {
        MetricParams {
            nwd_c: Some(nwd_c),
            ..Default::default()
        }
    }
}

/// A metric evaluation: match value, loss `1 - value`, and named penalty
/// components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub value: f64,
    pub loss: f64,
    pub components: BTreeMap<String, f64>,
}

impl MetricResult {
    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.get(name).copied()
    }
}

/// Shape-IoU direction weights derived from the GT aspect ratio.
/// `ww + hh == 2`; both equal 1 for square GT or `scale == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeWeights {
    pub ww: f64,
    pub hh: f64,
}

pub fn shape_weights(gt: &BBox, scale: f64) -> ShapeWeights {
    let wp = gt.w().powf(scale);
    let hp = gt.h().powf(scale);
    ShapeWeights {
        ww: 2.0 * wp / (wp + hp),
        hh: 2.0 * hp / (wp + hp),
    }
}

/// Parameters after per-metric validation; only the fields a metric uses
/// carry meaningful values.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ResolvedParams {
    pub scale: f64,
    pub mean_size_s: f64,
    pub nwd_c: f64,
    pub theta: f64,
    pub omega_coeff: f64,
    pub eps: f64,
}

pub(crate) fn resolve_params(id: MetricId, p: &MetricParams) -> Result<ResolvedParams, MetricError> {
    let mean_size_s = if id.needs_mean_size() {
        let s = p.mean_size_s.ok_or(MetricError::MissingParam {
            metric: id,
            param: "mean_size_s",
        })?;
        if s <= 0.0 {
            return Err(MetricError::NonPositiveParam {
                param: "mean_size_s",
                value: s,
            });
        }
        s
    } else {
        1.0
    };
    let nwd_c = if id.needs_nwd_c() {
        let c = p.nwd_c.ok_or(MetricError::MissingParam {
            metric: id,
            param: "nwd_c",
        })?;
        if c <= 0.0 {
            return Err(MetricError::NonPositiveParam {
                param: "nwd_c",
                value: c,
            });
        }
        c
    } else {
        1.0
    };
    if p.scale < 0.0 {
        return Err(MetricError::NonPositiveParam {
            param: "scale",
            value: p.scale,
        });
    }
    if p.eps <= 0.0 {
        return Err(MetricError::NonPositiveParam {
            param: "eps",
            value: p.eps,
        });
    }
    Ok(ResolvedParams {
        scale: p.scale,
        mean_size_s,
        nwd_c,
        theta: p.siou_theta,
        omega_coeff: p.shape_omega_coeff,
        eps: p.eps,
    })
}

fn lift4<T: Real>(b: &[f64; 4]) -> [T; 4] {
    [T::lift(b[0]), T::lift(b[1]), T::lift(b[2]), T::lift(b[3])]
}

/// Evaluate a metric's value and components over the generic scalar.
/// `pred` carries the differentiation variables; `gt` is constant.
pub(crate) fn eval_generic<T: Real>(
    id: MetricId,
    pred: &[T; 4],
    gt: &[f64; 4],
    p: &ResolvedParams,
) -> (T, Vec<(&'static str, T)>) {
    let g: [T; 4] = lift4(gt);
    let one = T::lift(1.0);
    match id {
        MetricId::Iou => {
            let v = geom::iou(pred, &g);
            (v, vec![("iou", v)])
        }
        MetricId::GIou => {
            let iou = geom::iou(pred, &g);
            let union = geom::union_area(pred, &g);
            let (w_c, h_c, _) = geom::enclosure(pred, &g);
            let enc_area = w_c * h_c;
            let penalty = (enc_area - union) / enc_area;
            (iou - penalty, vec![("iou", iou), ("enclosure", penalty)])
        }
        MetricId::DIou => {
            let iou = geom::iou(pred, &g);
            let (_, _, c_sq) = geom::enclosure(pred, &g);
            let dist = geom::center_distance_sq(pred, &g) / c_sq;
            (iou - dist, vec![("iou", iou), ("distance", dist)])
        }
        MetricId::CIou => {
            let iou = geom::iou(pred, &g);
            let (_, _, c_sq) = geom::enclosure(pred, &g);
            let dist = geom::center_distance_sq(pred, &g) / c_sq;
            let d_atan = T::lift((gt[2] / gt[3]).atan()) - (pred[2] / pred[3]).atan();
            let v = T::lift(4.0 / (std::f64::consts::PI * std::f64::consts::PI)) * d_atan * d_atan;
            // alpha*v -> v^2/(1-IoU) near v = 0, so the zero branch is the
            // correct limit (and avoids 0/0 at identical boxes).
            let aspect = if v.val() == 0.0 {
                T::lift(0.0)
            } else {
                let alpha = v / ((one - iou) + v);
                alpha * v
            };
            (
                iou - dist - aspect,
                vec![("iou", iou), ("distance", dist), ("shape", aspect)],
            )
        }
        MetricId::EIou => {
            let iou = geom::iou(pred, &g);
            let (w_c, h_c, c_sq) = geom::enclosure(pred, &g);
            let dist = geom::center_distance_sq(pred, &g) / c_sq;
            let dw = pred[2] - g[2];
            let dh = pred[3] - g[3];
            let width = dw * dw / (w_c * w_c);
            let height = dh * dh / (h_c * h_c);
            (
                iou - dist - width - height,
                vec![
                    ("iou", iou),
                    ("distance", dist),
                    ("width", width),
                    ("height", height),
                ],
            )
        }
        MetricId::SIou => {
            let iou = geom::iou(pred, &g);
            let dx = pred[0] - g[0];
            let dy = pred[1] - g[1];
            let center_dist = (dx * dx + dy * dy).sqrt();
            // eps guards the coincident-center case only; adding it to the
            // denominator unconditionally would break exact scale invariance
            let sin_alpha = if center_dist.val() <= p.eps {
                T::lift(0.0)
            } else {
                dx.abs().min(dy.abs()) / center_dist
            };
            let lambda = (T::lift(2.0) * sin_alpha.asin()).sin();
            let gamma = T::lift(2.0) - lambda;
            let (w_c, h_c, _) = geom::enclosure(pred, &g);
            let rho_x = (dx / w_c) * (dx / w_c);
            let rho_y = (dy / h_c) * (dy / h_c);
            let delta = (one - (-gamma * rho_x).exp()) + (one - (-gamma * rho_y).exp());
            let omega_w = (pred[2] - g[2]).abs() / pred[2].max(g[2]);
            let omega_h = (pred[3] - g[3]).abs() / pred[3].max(g[3]);
            let omega = (one - (-omega_w).exp()).powf_const(p.theta)
                + (one - (-omega_h).exp()).powf_const(p.theta);
            (
                iou - (delta + omega) / T::lift(2.0),
                vec![
                    ("iou", iou),
                    ("angle", lambda),
                    ("distance", delta),
                    ("shape", omega),
                ],
            )
        }
        MetricId::ShapeIou => {
            let iou = geom::iou(pred, &g);
            let sw = shape_weights_raw(gt[2], gt[3], p.scale);
            let (ww, hh) = (T::lift(sw.ww), T::lift(sw.hh));
            let (_, _, c_sq) = geom::enclosure(pred, &g);
            let dx = pred[0] - g[0];
            let dy = pred[1] - g[1];
            let dist = (hh * dx * dx + ww * dy * dy) / c_sq;
            // cross-weighting: omega_w carries hh, omega_h carries ww
            let omega_w = hh * ((pred[2] - g[2]).abs() / pred[2].max(g[2]));
            let omega_h = ww * ((pred[3] - g[3]).abs() / pred[3].max(g[3]));
            let omega = (one - (-omega_w).exp()).powf_const(p.theta)
                + (one - (-omega_h).exp()).powf_const(p.theta);
            (
                iou - dist - T::lift(p.omega_coeff) * omega,
                vec![
                    ("iou", iou),
                    ("distance", dist),
                    ("shape", omega),
                    ("ww", ww),
                    ("hh", hh),
                ],
            )
        }
        MetricId::DotD => {
            let d = geom::center_distance_sq(pred, &g).sqrt();
            let value = (-d / T::lift(p.mean_size_s)).exp();
            (value, vec![("distance", d)])
        }
        MetricId::Nwd => {
            let d = (geom::center_distance_sq(pred, &g) + nwd_size_term(pred, &g)).sqrt();
            let value = (-d / T::lift(p.nwd_c)).exp();
            (value, vec![("distance", d)])
        }
        MetricId::ShapeDotD => {
            let sw = shape_weights_raw(gt[2], gt[3], p.scale);
            let d = shape_center_dist_sq(pred, &g, sw).sqrt();
            let value = (-d / T::lift(p.mean_size_s)).exp();
            (
                value,
                vec![("distance", d), ("ww", T::lift(sw.ww)), ("hh", T::lift(sw.hh))],
            )
        }
        MetricId::ShapeNwd => {
            let sw = shape_weights_raw(gt[2], gt[3], p.scale);
            let d = (shape_center_dist_sq(pred, &g, sw) + nwd_size_term(pred, &g)).sqrt();
            let value = (-d / T::lift(p.nwd_c)).exp();
            (
                value,
                vec![("distance", d), ("ww", T::lift(sw.ww)), ("hh", T::lift(sw.hh))],
            )
        }
    }
}

fn shape_weights_raw(gt_w: f64, gt_h: f64, scale: f64) -> ShapeWeights {
    let wp = gt_w.powf(scale);
    let hp = gt_h.powf(scale);
    ShapeWeights {
        ww: 2.0 * wp / (wp + hp),
        hh: 2.0 * hp / (wp + hp),
    }
}

/// `((w - w_gt)^2 + (h - h_gt)^2) / weight^2` with weight fixed at 2.
fn nwd_size_term<T: Real>(pred: &[T; 4], g: &[T; 4]) -> T {
    let dw = pred[2] - g[2];
    let dh = pred[3] - g[3];
    (dw * dw + dh * dh) / T::lift(4.0)
}

/// `hh*dx^2 + ww*dy^2`: the short-edge direction carries the larger weight.
fn shape_center_dist_sq<T: Real>(pred: &[T; 4], g: &[T; 4], sw: ShapeWeights) -> T {
    let dx = pred[0] - g[0];
    let dy = pred[1] - g[1];
    T::lift(sw.hh) * dx * dx + T::lift(sw.ww) * dy * dy
}

fn finish(value: f64, components: Vec<(&'static str, f64)>) -> MetricResult {
    MetricResult {
        value,
        loss: 1.0 - value,
        components: components
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
    }
}

/// Uniform dispatch over the metric catalog.
pub fn evaluate(
    id: MetricId,
    pred: &BBox,
    gt: &BBox,
    params: &MetricParams,
) -> Result<MetricResult, MetricError> {
    let rp = resolve_params(id, params)?;
    let (value, components) = eval_generic::<f64>(id, &pred.params(), &gt.params(), &rp);
    Ok(finish(value, components))
}

fn eval_infallible(id: MetricId, pred: &BBox, gt: &BBox, params: &MetricParams) -> MetricResult {
    evaluate(id, pred, gt, params).expect("metric has no required parameters")
}

pub fn iou_metric(pred: &BBox, gt: &BBox) -> MetricResult {
    eval_infallible(MetricId::Iou, pred, gt, &MetricParams::default())
}

pub fn giou(pred: &BBox, gt: &BBox) -> MetricResult {
    eval_infallible(MetricId::GIou, pred, gt, &MetricParams::default())
}

pub fn diou(pred: &BBox, gt: &BBox) -> MetricResult {
    eval_infallible(MetricId::DIou, pred, gt, &MetricParams::default())
}

pub fn ciou(pred: &BBox, gt: &BBox) -> MetricResult {
    eval_infallible(MetricId::CIou, pred, gt, &MetricParams::default())
}

pub fn eiou(pred: &BBox, gt: &BBox) -> MetricResult {
    eval_infallible(MetricId::EIou, pred, gt, &MetricParams::default())
}

pub fn siou(pred: &BBox, gt: &BBox, params: &MetricParams) -> MetricResult {
    eval_infallible(MetricId::SIou, pred, gt, params)
}

pub fn shape_iou(pred: &BBox, gt: &BBox, params: &MetricParams) -> MetricResult {
    eval_infallible(MetricId::ShapeIou, pred, gt, params)
}

pub fn dotd(pred: &BBox, gt: &BBox, params: &MetricParams) -> Result<MetricResult, MetricError> {
    evaluate(MetricId::DotD, pred, gt, params)
}

pub fn nwd(pred: &BBox, gt: &BBox, params: &MetricParams) -> Result<MetricResult, MetricError> {
    evaluate(MetricId::Nwd, pred, gt, params)
}

pub fn shape_dotd(
    pred: &BBox,
    gt: &BBox,
    params: &MetricParams,
) -> Result<MetricResult, MetricError> {
    evaluate(MetricId::ShapeDotD, pred, gt, params)
}

pub fn shape_nwd(
    pred: &BBox,
    gt: &BBox,
    params: &MetricParams,
) -> Result<MetricResult, MetricError> {
    evaluate(MetricId::ShapeNwd, pred, gt, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxcore;
    use proptest::prelude::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn giou_examples() {
        let a = bb(1.0, 1.0, 2.0, 2.0);
        assert_eq!(giou(&a, &a).value, 1.0);

        let pred = bb(0.5, 0.5, 1.0, 1.0);
        let gt = bb(2.5, 2.5, 1.0, 1.0);
        let r = giou(&pred, &gt);
        assert!((r.value - (-7.0 / 9.0)).abs() < 1e-12);
        assert_eq!(r.component("iou"), Some(0.0));

        // gt nested inside pred: enclosing box equals pred, penalty vanishes
        let pred = bb(0.0, 0.0, 10.0, 10.0);
        let gt = bb(1.0, 1.0, 2.0, 2.0);
        let r = giou(&pred, &gt);
        assert!((r.value - boxcore::iou(&pred, &gt)).abs() < 1e-12);
    }

    #[test]
    fn diou_examples() {
        let pred = bb(0.0, 0.0, 2.0, 6.0);
        let gt = bb(0.0, 0.0, 4.0, 2.0);
        // concentric: distance term zero
        let r = diou(&pred, &gt);
        assert!((r.value - boxcore::iou(&pred, &gt)).abs() < 1e-12);

        let pred = bb(1.0, 0.0, 2.0, 2.0);
        let gt = bb(0.0, 0.0, 2.0, 2.0);
        let r = diou(&pred, &gt);
        assert!((r.value - (1.0 / 3.0 - 1.0 / 13.0)).abs() < 1e-12);

        assert_eq!(diou(&gt, &gt).value, 1.0);
    }

    #[test]
    fn ciou_examples() {
        // equal aspect ratio: reduces to DIoU
        let pred = bb(1.0, 2.0, 4.0, 2.0);
        let gt = bb(0.0, 0.0, 2.0, 1.0);
        assert!((ciou(&pred, &gt).value - diou(&pred, &gt).value).abs() < 1e-12);

        // independent step-by-step evaluation
        let pred = bb(0.0, 0.0, 4.0, 2.0);
        let gt = bb(0.0, 0.0, 2.0, 4.0);
        let iou = 4.0 / 12.0;
        let v = 4.0 / (std::f64::consts::PI * std::f64::consts::PI)
            * (f64::atan(0.5) - f64::atan(2.0)).powi(2);
        let alpha = v / ((1.0 - iou) + v);
        let expected = iou - 0.0 - alpha * v;
        let r = ciou(&pred, &gt);
        assert!((r.value - expected).abs() < 1e-12);
        assert!(r.value < diou(&pred, &gt).value);

        assert_eq!(ciou(&gt, &gt).value, 1.0);
    }

    #[test]
    fn eiou_examples() {
        // same-size offset boxes: width/height terms vanish
        let pred = bb(1.0, 0.5, 2.0, 2.0);
        let gt = bb(0.0, 0.0, 2.0, 2.0);
        assert!((eiou(&pred, &gt).value - diou(&pred, &gt).value).abs() < 1e-12);

        let pred = bb(0.0, 0.0, 2.0, 2.0);
        let gt = bb(0.0, 0.0, 4.0, 4.0);
        assert!((eiou(&pred, &gt).value - (-0.25)).abs() < 1e-12);

        assert_eq!(eiou(&gt, &gt).value, 1.0);
    }

    #[test]
    fn siou_identical_boxes() {
        let a = bb(3.0, -1.0, 2.0, 5.0);
        let r = siou(&a, &a, &MetricParams::default());
        assert_eq!(r.value, 1.0);
        assert_eq!(r.component("angle"), Some(0.0));
        assert_eq!(r.component("distance"), Some(0.0));
        assert_eq!(r.component("shape"), Some(0.0));
    }

    #[test]
    fn siou_axis_aligned_offset() {
        let pred = bb(1.0, 0.0, 2.0, 2.0);
        let gt = bb(0.0, 0.0, 2.0, 2.0);
        let r = siou(&pred, &gt, &MetricParams::default());
        // step-by-step: lambda = 0, gamma = 2, rho_x = 1/9, rho_y = 0
        let delta = (1.0 - (-2.0 / 9.0f64).exp()) + 0.0;
        let expected = 1.0 / 3.0 - (delta + 0.0) / 2.0;
        assert!((r.value - expected).abs() < 1e-9);
        assert!((r.value - 0.23370).abs() < 1e-4);
        assert!(r.component("angle").unwrap().abs() < 1e-6);
        assert!((r.component("distance").unwrap() - 0.19926).abs() < 1e-4);
        assert_eq!(r.component("shape"), Some(0.0));
    }

    #[test]
    fn siou_diagonal_angle() {
        // centers on the 45-degree diagonal, equal shapes: lambda -> 1
        let pred = bb(1.0, 1.0, 2.0, 2.0);
        let gt = bb(0.0, 0.0, 2.0, 2.0);
        let r = siou(&pred, &gt, &MetricParams::default());
        assert!((r.component("angle").unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn shape_weights_examples() {
        let gt = bb(0.0, 0.0, 4.0, 2.0);
        let sw = shape_weights(&gt, 1.0);
        assert!((sw.ww - 4.0 / 3.0).abs() < 1e-12);
        assert!((sw.hh - 2.0 / 3.0).abs() < 1e-12);

        let square = bb(0.0, 0.0, 3.0, 3.0);
        let sw = shape_weights(&square, 2.5);
        assert_eq!(sw.ww, 1.0);
        assert_eq!(sw.hh, 1.0);

        let sw = shape_weights(&gt, 0.0);
        assert_eq!(sw.ww, 1.0);
        assert_eq!(sw.hh, 1.0);

        // larger scale amplifies the asymmetry
        let s1 = shape_weights(&gt, 1.0);
        let s2 = shape_weights(&gt, 2.0);
        assert!(s2.ww > s1.ww);
    }

    #[test]
    fn shape_iou_examples() {
        let gt = bb(0.0, 0.0, 4.0, 2.0);
        assert_eq!(shape_iou(&gt, &gt, &MetricParams::with_scale(1.0)).loss, 0.0);

        // long-edge (x) offset
        let pred = bb(0.5, 0.0, 4.0, 2.0);
        let r = shape_iou(&pred, &gt, &MetricParams::with_scale(1.0));
        let c_sq = 4.5 * 4.5 + 2.0 * 2.0;
        let expected_loss = 1.0 - 7.0 / 9.0 + (2.0 / 3.0) * 0.25 / c_sq;
        assert!((r.loss - expected_loss).abs() < 1e-12);
        assert!((r.loss - 0.22909).abs() < 1e-4);
        assert_eq!(r.component("shape"), Some(0.0));

        // same deviation magnitude along the short edge costs strictly more
        let pred_y = bb(0.0, 0.5, 4.0, 2.0);
        let ry = shape_iou(&pred_y, &gt, &MetricParams::with_scale(1.0));
        assert!(ry.component("distance").unwrap() > r.component("distance").unwrap());
        assert!(ry.loss > r.loss);
    }

    #[test]
    fn dotd_examples() {
        let p = MetricParams::with_mean_size(5.0);
        let pred = bb(1.0, 1.0, 2.0, 2.0);
        let gt = bb(4.0, 5.0, 7.0, 3.0);
        let r = dotd(&pred, &gt, &p).unwrap();
        assert!((r.value - (-1.0f64).exp()).abs() < 1e-12);

        // value independent of sizes
        let r2 = dotd(&bb(1.0, 1.0, 9.0, 0.5), &gt, &p).unwrap();
        assert_eq!(r.value, r2.value);

        let r3 = dotd(&gt, &gt, &p).unwrap();
        assert_eq!(r3.value, 1.0);

        // monotone in center distance
        let near = dotd(&bb(4.5, 5.0, 1.0, 1.0), &gt, &p).unwrap();
        let far = dotd(&bb(6.0, 5.0, 1.0, 1.0), &gt, &p).unwrap();
        assert!(near.value > far.value);
    }

    #[test]
    fn nwd_examples() {
        let p = MetricParams::with_nwd_c(2.0);
        let gt = bb(0.0, 0.0, 2.0, 2.0);
        assert_eq!(nwd(&gt, &gt, &p).unwrap().value, 1.0);

        let pred = bb(0.0, 0.0, 4.0, 4.0);
        let r = nwd(&pred, &gt, &p).unwrap();
        let expected = (-(2.0f64).sqrt() / 2.0).exp();
        assert!((r.value - expected).abs() < 1e-12);
        assert!((r.value - 0.49307).abs() < 1e-4);

        let p3 = MetricParams::with_nwd_c(3.0);
        let r = nwd(&bb(3.0, 0.0, 2.0, 2.0), &gt, &p3).unwrap();
        assert!((r.value - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn shape_dotd_examples() {
        let gt = bb(0.0, 0.0, 4.0, 2.0);
        let mut p = MetricParams::with_mean_size(5.0);
        p.scale = 1.0;
        let pred = bb(1.0, 0.0, 4.0, 2.0);
        let r = shape_dotd(&pred, &gt, &p).unwrap();
        let expected = (-(2.0f64 / 3.0).sqrt() / 5.0).exp();
        assert!((r.value - expected).abs() < 1e-12);

        assert_eq!(shape_dotd(&gt, &gt, &p).unwrap().value, 1.0);
    }

    #[test]
    fn shape_nwd_examples() {
        let gt = bb(0.0, 0.0, 4.0, 2.0);
        let mut p = MetricParams::with_nwd_c(2.0);
        p.scale = 1.0;
        assert_eq!(shape_nwd(&gt, &gt, &p).unwrap().value, 1.0);

        let pred = bb(0.0, 1.0, 4.0, 2.0);
        let r = shape_nwd(&pred, &gt, &p).unwrap();
        let expected = (-(4.0f64 / 3.0).sqrt() / 2.0).exp();
        assert!((r.value - expected).abs() < 1e-12);
    }

    #[test]
    fn evaluate_dispatch_and_missing_params() {
        let a = bb(1.0, 1.0, 2.0, 2.0);
        let b = bb(2.0, 2.0, 2.0, 2.0);
        let r = evaluate(MetricId::Iou, &a, &b, &MetricParams::default()).unwrap();
        assert_eq!(r.value, boxcore::iou(&a, &b));

        let err = evaluate(MetricId::DotD, &a, &b, &MetricParams::default()).unwrap_err();
        assert!(matches!(
            err,
            MetricError::MissingParam {
                param: "mean_size_s",
                ..
            }
        ));
        let err = evaluate(MetricId::ShapeNwd, &a, &b, &MetricParams::default()).unwrap_err();
        assert!(matches!(err, MetricError::MissingParam { param: "nwd_c", .. }));
    }

    #[test]
    fn shape_iou_scale_zero_matches_diou_distance() {
        let pred = bb(0.7, -0.3, 2.0, 1.0);
        let gt = bb(0.0, 0.0, 3.0, 1.5);
        let s = shape_iou(&pred, &gt, &MetricParams::with_scale(0.0));
        let d = diou(&pred, &gt);
        assert!((s.component("distance").unwrap() - d.component("distance").unwrap()).abs() < 1e-15);
        assert_eq!(s.component("ww"), Some(1.0));
    }

    #[test]
    fn metric_id_round_trip() {
        for id in MetricId::ALL {
            assert_eq!(id.name().parse::<MetricId>().unwrap(), id);
            let j = serde_json::to_string(&id).unwrap();
            assert_eq!(j, format!("\"{}\"", id.name()));
            assert_eq!(serde_json::from_str::<MetricId>(&j).unwrap(), id);
        }
        assert!("frobnicate".parse::<MetricId>().is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (-5.0..5.0f64, -5.0..5.0f64, 0.1..6.0f64, 0.1..6.0f64)
            .prop_map(|(x, y, w, h)| bb(x, y, w, h))
    }

    proptest! {
        #[test]
        fn ordering_chain(a in arb_box(), b in arb_box()) {
            let iou = boxcore::iou(&a, &b);
            let slack = 1e-12;
            prop_assert!(giou(&a, &b).value <= iou + slack);
            let dv = diou(&a, &b).value;
            prop_assert!(dv <= iou + slack);
            prop_assert!(ciou(&a, &b).value <= dv + slack);
            prop_assert!(eiou(&a, &b).value <= dv + slack);
        }

        #[test]
        fn shape_weights_sum_to_two(b in arb_box(), scale in 0.0..4.0f64) {
            let sw = shape_weights(&b, scale);
            prop_assert!((sw.ww + sw.hh - 2.0).abs() < 1e-12);
            prop_assert!(sw.ww > 0.0 && sw.ww < 2.0);
            if scale > 1e-6 && (b.w() - b.h()).abs() > 1e-9 {
                prop_assert_eq!(sw.ww > 1.0, b.w() > b.h());
            }
        }

        #[test]
        fn reduction_laws_square_gt(pred in arb_box(), xc in -3.0..3.0f64,
                                    yc in -3.0..3.0f64, side in 0.2..4.0f64,
                                    scale in 0.0..3.0f64) {
            let gt = bb(xc, yc, side, side);
            let mut p = MetricParams::with_mean_size(2.0);
            p.nwd_c = Some(2.0);
            p.scale = scale;
            let sd = shape_dotd(&pred, &gt, &p).unwrap();
            let d = dotd(&pred, &gt, &p).unwrap();
            prop_assert!((sd.value - d.value).abs() < 1e-12);
            let sn = shape_nwd(&pred, &gt, &p).unwrap();
            let n = nwd(&pred, &gt, &p).unwrap();
            prop_assert!((sn.value - n.value).abs() < 1e-12);
        }

        #[test]
        fn all_values_finite(a in arb_box(), b in arb_box()) {
            let p = MetricParams {
                mean_size_s: Some(1.5),
                nwd_c: Some(1.5),
                scale: 1.0,
                ..MetricParams::default()
            };
            for id in MetricId::ALL {
                let r = evaluate(id, &a, &b, &p).unwrap();
                prop_assert!(r.value.is_finite(), "{} produced {}", id, r.value);
                prop_assert!(r.loss.is_finite());
                for (k, v) in &r.components {
                    prop_assert!(v.is_finite(), "{}::{} = {}", id, k, v);
                }
            }
        }

        #[test]
        fn loss_is_one_minus_value(a in arb_box(), b in arb_box()) {
            let p = MetricParams {
                mean_size_s: Some(1.0),
                nwd_c: Some(1.0),
                ..MetricParams::default()
            };
            for id in MetricId::ALL {
                let r = evaluate(id, &a, &b, &p).unwrap();
                prop_assert!((r.loss - (1.0 - r.value)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scale_invariance_of_iou_family() {
        // deterministic random pairs; DotD/NWD checked for NON-invariance
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let p = MetricParams {
            scale: 1.0,
            ..MetricParams::default()
        };
        for _ in 0..200 {
            let a = bb(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.2..4.0),
                rng.gen_range(0.2..4.0),
            );
            let b = bb(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.2..4.0),
                rng.gen_range(0.2..4.0),
            );
            let s = rng.gen_range(0.5..20.0);
            let scale_box =
                |c: &BBox| bb(c.x_c() * s, c.y_c() * s, c.w() * s, c.h() * s);
            for id in [
                MetricId::Iou,
                MetricId::GIou,
                MetricId::DIou,
                MetricId::CIou,
                MetricId::EIou,
                MetricId::SIou,
                MetricId::ShapeIou,
            ] {
                let v0 = evaluate(id, &a, &b, &p).unwrap().value;
                let v1 = evaluate(id, &scale_box(&a), &scale_box(&b), &p).unwrap().value;
                assert!(
                    (v0 - v1).abs() <= 1e-10 * v0.abs().max(1.0),
                    "{} not scale invariant: {} vs {}",
                    id,
                    v0,
                    v1
                );
            }
        }

        // witness pair: DotD and NWD change under scaling with S, C fixed
        let mut ps = MetricParams::with_mean_size(2.0);
        ps.nwd_c = Some(2.0);
        let a = bb(0.0, 0.0, 1.0, 1.0);
        let b = bb(1.0, 0.0, 1.0, 2.0);
        let a2 = bb(0.0, 0.0, 2.0, 2.0);
        let b2 = bb(2.0, 0.0, 2.0, 4.0);
        assert!(
            (dotd(&a, &b, &ps).unwrap().value - dotd(&a2, &b2, &ps).unwrap().value).abs() > 1e-3
        );
        assert!((nwd(&a, &b, &ps).unwrap().value - nwd(&a2, &b2, &ps).unwrap().value).abs() > 1e-3);
    }
}
