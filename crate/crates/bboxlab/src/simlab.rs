//! Regression-characteristics laboratory: deviation sweeps quantifying how
//! GT shape and scale modulate metric sensitivity, and synthetic
//! gradient-descent regression runs comparing losses.
//!
//! Descent runs in `(x_c, y_c, log w, log h)` so positivity of the box
//! sizes is structural; gradients are chain-ruled accordingly. The
//! optimizer is plain explicit gradient descent with a fixed step so the
//! dynamics reflect the loss surface alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxcore::{self, BBox, BoxError};
use crate::grad::loss_gradient;
use crate::metrics::{evaluate, MetricError, MetricId, MetricParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Box(#[from] BoxError),
    #[error("deviations must be a non-empty strictly increasing list")]
    BadDeviations,
    #[error("shape deviation {deviation} would produce a non-positive size")]
    InvalidShapeDeviation { deviation: f64 },
    #[error("gt_large must be gt_small uniformly scaled by s > 1")]
    NotUniformlyScaled,
    #[error("scenario and metric lists must be non-empty")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Offsets displace the predicted box's center along the axis.
    PositionDeviation,
    /// Offsets perturb `w` (axis x) or `h` (axis y) at zero center offset.
    ShapeDeviation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub gt: BBox,
    pub axis: Axis,
    pub deviations: Vec<f64>,
    pub metric: MetricId,
    pub params: MetricParams,
    pub mode: SweepMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub spec: SweepSpec,
    pub values: Vec<f64>,
}

/// Metric value as the predicted box deviates from the GT box along one
/// axis, in position or in shape.
pub fn deviation_sweep(spec: &SweepSpec) -> Result<SweepCurve, SimError> {
    validate_deviations(&spec.deviations)?;
    let mut values = Vec::with_capacity(spec.deviations.len());
    for &d in &spec.deviations {
        let pred = deviated(&spec.gt, spec.axis, spec.mode, d)?;
        values.push(evaluate(spec.metric, &pred, &spec.gt, &spec.params)?.value);
    }
    Ok(SweepCurve {
        spec: spec.clone(),
        values,
    })
}

fn validate_deviations(devs: &[f64]) -> Result<(), SimError> {
    if devs.is_empty() || devs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::BadDeviations);
    }
    Ok(())
}

fn deviated(gt: &BBox, axis: Axis, mode: SweepMode, d: f64) -> Result<BBox, SimError> {
    let b = match (mode, axis) {
        (SweepMode::PositionDeviation, Axis::X) => {
            BBox::new(gt.x_c() + d, gt.y_c(), gt.w(), gt.h())
        }
        (SweepMode::PositionDeviation, Axis::Y) => {
            BBox::new(gt.x_c(), gt.y_c() + d, gt.w(), gt.h())
        }
        (SweepMode::ShapeDeviation, Axis::X) => {
            BBox::new(gt.x_c(), gt.y_c(), gt.w() + d, gt.h())
        }
        (SweepMode::ShapeDeviation, Axis::Y) => {
            BBox::new(gt.x_c(), gt.y_c(), gt.w(), gt.h() + d)
        }
    };
    b.map_err(|_| SimError::InvalidShapeDeviation { deviation: d })
}

/// The scale-sensitivity experiment: the same absolute deviations applied
/// to a small GT box and to its uniformly scaled-up copy.
pub fn scale_pair_sweep(
    gt_small: &BBox,
    gt_large: &BBox,
    metric: MetricId,
    deviations: &[f64],
    params: &MetricParams,
) -> Result<(SweepCurve, SweepCurve), SimError> {
    let s = gt_large.w() / gt_small.w();
    if s <= 1.0 || (gt_large.h() / gt_small.h() - s).abs() > 1e-9 * s {
        return Err(SimError::NotUniformlyScaled);
    }
    let mk = |gt: &BBox| SweepSpec {
        gt: *gt,
        axis: Axis::X,
        deviations: deviations.to_vec(),
        metric,
        params: params.clone(),
        mode: SweepMode::PositionDeviation,
    };
    Ok((deviation_sweep(&mk(gt_small))?, deviation_sweep(&mk(gt_large))?))
}

fn default_convergence_loss() -> f64 {
    1e-6
}

/// One synthetic regression problem: anchor, target, loss, and optimizer
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub anchor: BBox,
    pub gt: BBox,
    pub metric: MetricId,
    pub params: MetricParams,
    pub lr: f64,
    pub max_steps: u32,
    pub seed: u64,
    #[serde(default = "default_convergence_loss")]
    pub convergence_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxSteps,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub step: u32,
    pub pred: BBox,
    pub loss: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub scenario: Scenario,
    pub states: Vec<TrajectoryState>,
    pub stop_reason: StopReason,
}

impl Trajectory {
    pub fn final_state(&self) -> &TrajectoryState {
        self.states.last().expect("trajectory has at least one state")
    }
}

/// Explicit gradient descent of the scenario's loss from the anchor box.
/// Every state is recorded; divergence is a recorded outcome, not an error.
pub fn run_regression(scenario: &Scenario) -> Result<Trajectory, SimError> {
    let record = |step: u32, pred: &BBox| -> Result<TrajectoryState, SimError> {
        Ok(TrajectoryState {
            step,
            pred: *pred,
            loss: evaluate(scenario.metric, pred, &scenario.gt, &scenario.params)?.loss,
            iou: boxcore::iou(pred, &scenario.gt),
        })
    };

    let mut pred = scenario.anchor;
    let mut states = vec![record(0, &pred)?];
    if states[0].loss < scenario.convergence_loss {
        return Ok(Trajectory {
            scenario: scenario.clone(),
            states,
            stop_reason: StopReason::Converged,
        });
    }

    let mut stop_reason = StopReason::MaxSteps;
    for step in 1..=scenario.max_steps {
        let g = loss_gradient(scenario.metric, &pred, &scenario.gt, &scenario.params)?;
        let xc = pred.x_c() - scenario.lr * g.d_xc;
        let yc = pred.y_c() - scenario.lr * g.d_yc;
        // descend in log-size: d loss / d log w = w * d loss / d w
        let lw = pred.w().ln() - scenario.lr * pred.w() * g.d_w;
        let lh = pred.h().ln() - scenario.lr * pred.h() * g.d_h;
        let (w, h) = (lw.exp(), lh.exp());
        match BBox::new(xc, yc, w, h) {
            Ok(b) => pred = b,
            Err(_) => {
                stop_reason = StopReason::Diverged;
                break;
            }
        }
        let state = record(step, &pred)?;
        let loss = state.loss;
        states.push(state);
        if !loss.is_finite() {
            stop_reason = StopReason::Diverged;
            break;
        }
        if loss < scenario.convergence_loss {
            stop_reason = StopReason::Converged;
            break;
        }
    }
    Ok(Trajectory {
        scenario: scenario.clone(),
        states,
        stop_reason,
    })
}

/// Configuration for random scenario sampling. Anchors and GT boxes are
/// drawn in the unit canvas: centers uniform, aspect ratios log-uniform in
/// `aspect_range`, sizes (sqrt of area) log-uniform in `size_range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n: u32,
    pub seed: u64,
    pub lr: f64,
    pub max_steps: u32,
    pub params: MetricParams,
    pub aspect_range: (f64, f64),
    pub size_range: (f64, f64),
    /// Aspect range for the GT box, when it should differ from the anchor's
    /// (e.g. anisotropic-GT experiments).
    pub gt_aspect_range: Option<(f64, f64)>,
}

impl SamplerConfig {
    pub fn new(n: u32, seed: u64) -> Self {
        SamplerConfig {
            n,
            seed,
            lr: 0.05,
            max_steps: 2000,
            params: MetricParams::default(),
            aspect_range: (0.25, 4.0),
            size_range: (0.05, 0.5),
            gt_aspect_range: None,
        }
    }
}

fn log_uniform(rng: &mut ChaCha12Rng, range: (f64, f64)) -> f64 {
    (rng.gen_range(range.0.ln()..range.1.ln())).exp()
}

fn sample_box(rng: &mut ChaCha12Rng, size_range: (f64, f64), aspect_range: (f64, f64)) -> BBox {
    let size = log_uniform(rng, size_range);
    let aspect = log_uniform(rng, aspect_range);
    BBox::new(
        rng.gen_range(0.0..1.0),
        rng.gen_range(0.0..1.0),
        size * aspect.sqrt(),
        size / aspect.sqrt(),
    )
    .expect("sampled sizes are positive")
}

/// Sample `n` scenario templates (metric is a placeholder; `batch_compare`
/// swaps it per row). Per-scenario seeds are derived from the base seed so
/// scenarios stay independent and reproducible.
pub fn sample_scenarios(cfg: &SamplerConfig, metric: MetricId) -> Vec<Scenario> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    (0..cfg.n)
        .map(|i| {
            let anchor = sample_box(&mut rng, cfg.size_range, cfg.aspect_range);
            let gt = sample_box(
                &mut rng,
                cfg.size_range,
                cfg.gt_aspect_range.unwrap_or(cfg.aspect_range),
            );
            Scenario {
                anchor,
                gt,
                metric,
                params: cfg.params.clone(),
                lr: cfg.lr,
                max_steps: cfg.max_steps,
                seed: cfg.seed.wrapping_add(i as u64),
                convergence_loss: default_convergence_loss(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: MetricId,
    pub mean_final_iou: f64,
    pub mean_steps: f64,
    pub diverged: u32,
    pub converged: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub n_scenarios: u32,
    pub rows: Vec<ComparisonRow>,
}

/// Run every scenario template under every metric (paired design: the
/// scenario set is identical across rows) and aggregate.
pub fn batch_compare(
    templates: &[Scenario],
    metrics: &[MetricId],
) -> Result<ComparisonTable, SimError> {
    if templates.is_empty() || metrics.is_empty() {
        return Err(SimError::EmptyInput);
    }
    let mut rows = Vec::with_capacity(metrics.len());
    for &metric in metrics {
        let mut sum_iou = 0.0;
        let mut sum_steps = 0.0;
        let mut diverged = 0;
        let mut converged = 0;
        for template in templates {
            let scenario = Scenario {
                metric,
                ..template.clone()
            };
            let traj = run_regression(&scenario)?;
            sum_iou += traj.final_state().iou;
            sum_steps += traj.final_state().step as f64;
            match traj.stop_reason {
                StopReason::Diverged => diverged += 1,
                StopReason::Converged => converged += 1,
                StopReason::MaxSteps => {}
            }
        }
        let n = templates.len() as f64;
        rows.push(ComparisonRow {
            metric,
            mean_final_iou: sum_iou / n,
            mean_steps: sum_steps / n,
            diverged,
            converged,
        });
    }
    Ok(ComparisonTable {
        n_scenarios: templates.len() as u32,
        rows,
    })
}
