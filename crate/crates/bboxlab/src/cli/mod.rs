//! Command-line front end: evaluation, gradient checking, oracle
//! comparison, sweeps, regression simulation, and dataset statistics.
//!
//! Conventions:
//! - boxes are passed as `xc,yc,w,h` (center form); add `--corners` to
//!   pass `x_min,y_min,x_max,y_max` instead;
//! - flags override `--config` file values, which override defaults; the
//!   `BBOXLAB_SEED` env var supplies the default seed;
//! - every artifact carries a reproducibility header (version, seed, full
//!   resolved config); stripping `#` lines from CSV output leaves plain
//!   RFC-4180 rows. CSV is the authoritative output, SVG a convenience
//!   view;
//! - CSV column schemas: sweep `deviation,value` (axis `both`:
//!   `deviation,value_x,value_y`), trajectory `step,xc,yc,w,h,loss,iou`,
//!   compare `metric,mean_final_iou,mean_steps,diverged`;
//! - exit codes: 0 success, 1 runtime error, 2 usage error.

mod svg;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::boxcore::{self, BBox, CornerBox};
use crate::datasets::{self, SourceFormat};
use crate::grad;
use crate::metrics::{self, MetricId, MetricParams};
use crate::oracle;
use crate::simlab::{self, Axis, SamplerConfig, Scenario, SweepMode, SweepSpec};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: exit code 2.
    Usage(String),
    /// Failure while executing a valid config: exit code 1.
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

macro_rules! runtime_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Runtime(e.to_string())
            }
        })*
    };
}
runtime_from!(
    crate::metrics::MetricError,
    crate::simlab::SimError,
    crate::oracle::OracleError,
    crate::datasets::DatasetError,
    crate::grad::GradError,
    crate::boxcore::BoxError,
    std::io::Error
);

#[derive(Parser, Debug)]
#[command(
    name = "bboxlab",
    version,
    about = "Bounding-box regression metric laboratory",
    propagate_version = true
)]
struct Cli {
    /// JSON config file supplying defaults for any flag
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Random seed (default: $BBOXLAB_SEED, then 0)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output format
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    /// Write the artifact to this path instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate one metric on a box pair
    Eval(EvalArgs),
    /// Compare the analytic gradient against central finite differences
    GradCheck(GradCheckArgs),
    /// Compare analytic IoU against the Monte-Carlo and grid oracles
    Oracle(OracleArgs),
    /// Metric value as the predicted box deviates from the GT box
    Sweep(SweepArgs),
    /// Gradient-descent regression run from an anchor box to a GT box
    Simulate(SimulateArgs),
    /// Paired descent comparison across metrics on random scenarios
    Compare(CompareArgs),
    /// Dataset statistics (mean size S, NWD constant C) from annotations
    Stats(StatsArgs),
}

#[derive(Args, Debug, Default)]
struct MetricFlags {
    /// Shape-IoU scale factor (0 = neutral weights)
    #[arg(long)]
    scale: Option<f64>,
    /// Dataset mean size S (required by dotd / shape-dotd)
    #[arg(long)]
    mean_size: Option<f64>,
    /// NWD constant C (required by nwd / shape-nwd)
    #[arg(long)]
    nwd_c: Option<f64>,
    /// SIoU angle-term stabilizer
    #[arg(long)]
    eps: Option<f64>,
    /// Annotation file/dir to derive S (and C, when not given) from
    #[arg(long, value_name = "PATH")]
    annotations: Option<PathBuf>,
    /// Annotation format: coco-json or yolo-txt
    #[arg(long)]
    ann_format: Option<String>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Metric to evaluate
    #[arg(long)]
    metric: Option<String>,
    /// Predicted box as xc,yc,w,h
    #[arg(long)]
    pred: Option<String>,
    /// Ground-truth box as xc,yc,w,h
    #[arg(long)]
    gt: Option<String>,
    /// Interpret box flags as x_min,y_min,x_max,y_max
    #[arg(long)]
    corners: bool,
    #[command(flatten)]
    params: MetricFlags,
}

#[derive(Args, Debug)]
struct GradCheckArgs {
    #[arg(long)]
    metric: Option<String>,
    /// Predicted box as xc,yc,w,h
    #[arg(long)]
    pred: Option<String>,
    /// Ground-truth box as xc,yc,w,h
    #[arg(long)]
    gt: Option<String>,
    /// Interpret box flags as x_min,y_min,x_max,y_max
    #[arg(long)]
    corners: bool,
    /// Central-difference step
    #[arg(long)]
    step: Option<f64>,
    #[command(flatten)]
    params: MetricFlags,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// First box as xc,yc,w,h
    #[arg(long)]
    a: Option<String>,
    /// Second box as xc,yc,w,h
    #[arg(long)]
    b: Option<String>,
    /// Interpret box flags as x_min,y_min,x_max,y_max
    #[arg(long)]
    corners: bool,
    /// Monte-Carlo sample count
    #[arg(long)]
    n: Option<u64>,
    /// Grid resolution (cells per axis)
    #[arg(long)]
    cells: Option<u32>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Ground-truth box as xc,yc,w,h
    #[arg(long)]
    gt: Option<String>,
    /// Interpret box flags as x_min,y_min,x_max,y_max
    #[arg(long)]
    corners: bool,
    #[arg(long)]
    metric: Option<String>,
    /// Sweep axis: x, y, or both
    #[arg(long, value_enum)]
    axis: Option<AxisArg>,
    /// position-deviation (center offset) or shape-deviation (size offset)
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Largest deviation
    #[arg(long)]
    max_dev: Option<f64>,
    /// Number of steps between 0 and max-dev
    #[arg(long)]
    steps: Option<u32>,
    #[command(flatten)]
    params: MetricFlags,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Anchor (initial predicted) box as xc,yc,w,h
    #[arg(long)]
    anchor: Option<String>,
    /// Ground-truth box as xc,yc,w,h
    #[arg(long)]
    gt: Option<String>,
    /// Interpret box flags as x_min,y_min,x_max,y_max
    #[arg(long)]
    corners: bool,
    #[arg(long)]
    metric: Option<String>,
    /// Gradient-descent step size
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    max_steps: Option<u32>,
    #[command(flatten)]
    params: MetricFlags,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Comma-separated metric list (default: all)
    #[arg(long)]
    metrics: Option<String>,
    /// Number of random scenarios
    #[arg(long)]
    n_scenarios: Option<u32>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    max_steps: Option<u32>,
    /// GT aspect-ratio range as min,max (default 0.25,4)
    #[arg(long)]
    gt_aspect: Option<String>,
    #[command(flatten)]
    params: MetricFlags,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Annotation file (coco-json) or directory (yolo-txt)
    #[arg(long, value_name = "PATH")]
    annotations: Option<PathBuf>,
    /// Annotation format: coco-json or yolo-txt
    #[arg(long)]
    ann_format: Option<String>,
    /// Override the NWD constant C instead of defaulting it to S
    #[arg(long)]
    nwd_c: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Human,
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisArg {
    X,
    Y,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    PositionDeviation,
    ShapeDeviation,
}

impl From<ModeArg> for SweepMode {
    fn from(m: ModeArg) -> SweepMode {
        match m {
            ModeArg::PositionDeviation => SweepMode::PositionDeviation,
            ModeArg::ShapeDeviation => SweepMode::ShapeDeviation,
        }
    }
}

/// Flat file-config mirror of the flag set; any field may be omitted.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    format: Option<OutputFormat>,
    out: Option<PathBuf>,
    metric: Option<String>,
    metrics: Option<String>,
    pred: Option<String>,
    gt: Option<String>,
    anchor: Option<String>,
    a: Option<String>,
    b: Option<String>,
    corners: Option<bool>,
    scale: Option<f64>,
    mean_size: Option<f64>,
    nwd_c: Option<f64>,
    eps: Option<f64>,
    annotations: Option<PathBuf>,
    ann_format: Option<String>,
    step: Option<f64>,
    n: Option<u64>,
    cells: Option<u32>,
    axis: Option<AxisArg>,
    mode: Option<ModeArg>,
    max_dev: Option<f64>,
    steps: Option<u32>,
    lr: Option<f64>,
    max_steps: Option<u32>,
    n_scenarios: Option<u32>,
    gt_aspect: Option<String>,
}

/// Fully resolved run configuration; round-trips losslessly through JSON
/// and is embedded verbatim in every artifact's reproducibility header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    #[serde(flatten)]
    pub command: CommandConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum CommandConfig {
    Eval {
        metric: MetricId,
        pred: BBox,
        gt: BBox,
        params: MetricParams,
        annotations: Option<PathBuf>,
        ann_format: Option<SourceFormat>,
    },
    GradCheck {
        metric: MetricId,
        pred: BBox,
        gt: BBox,
        params: MetricParams,
        step: f64,
    },
    Oracle {
        a: BBox,
        b: BBox,
        n: u64,
        cells: u32,
    },
    Sweep {
        gt: BBox,
        metric: MetricId,
        params: MetricParams,
        axis: AxisArg,
        mode: ModeArg,
        max_dev: f64,
        steps: u32,
    },
    Simulate {
        scenario: Scenario,
    },
    Compare {
        metrics: Vec<MetricId>,
        sampler: SamplerConfig,
    },
    Stats {
        annotations: PathBuf,
        ann_format: SourceFormat,
        nwd_c_override: Option<f64>,
    },
}

/// Parse an argv vector into a resolved [`RunConfig`].
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
    resolve(cli)
}

/// CLI entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let config = match resolve(cli) {
        Ok(c) => c,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            return 2;
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            return 1;
        }
    };
    match execute(&config) {
        Ok(artifact) => {
            match &config.out {
                Some(path) => {
                    if let Err(e) = fs::write(path, &artifact) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return 1;
                    }
                }
                None => print!("{artifact}"),
            }
            0
        }
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

fn missing(flag: &str) -> CliError {
    CliError::Usage(format!("missing required flag --{flag}"))
}

fn parse_box(s: &str, corners: bool, flag: &str) -> Result<BBox, CliError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("--{flag}: cannot parse `{s}`: {e}")))?;
    if parts.len() != 4 {
        return Err(CliError::Usage(format!(
            "--{flag}: expected 4 comma-separated numbers, got {}",
            parts.len()
        )));
    }
    let b = if corners {
        CornerBox::new(parts[0], parts[1], parts[2], parts[3]).map(BBox::from_corners)
    } else {
        BBox::new(parts[0], parts[1], parts[2], parts[3])
    };
    b.map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}

fn parse_metric(s: &str) -> Result<MetricId, CliError> {
    s.parse::<MetricId>().map_err(CliError::Usage)
}

fn parse_format(s: &str) -> Result<SourceFormat, CliError> {
    s.parse::<SourceFormat>()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Runtime(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", p.display())))
        }
    }
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var("BBOXLAB_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .map(Some)
            .map_err(|e| CliError::Usage(format!("BBOXLAB_SEED=`{v}` is not a u64: {e}"))),
        Err(_) => Ok(None),
    }
}

/// Build MetricParams from flags merged over the config file; presence of
/// S/C is validated here (annotation-derived values are filled at
/// execution time).
fn build_params(
    flags: &MetricFlags,
    file: &FileConfig,
    metric: MetricId,
) -> Result<(MetricParams, Option<PathBuf>, Option<SourceFormat>), CliError> {
    let mut params = MetricParams::default();
    if let Some(s) = flags.scale.or(file.scale) {
        params.scale = s;
    }
    params.mean_size_s = flags.mean_size.or(file.mean_size);
    params.nwd_c = flags.nwd_c.or(file.nwd_c);
    if let Some(e) = flags.eps.or(file.eps) {
        params.eps = e;
    }
    let annotations = flags.annotations.clone().or_else(|| file.annotations.clone());
    let ann_format = match flags.ann_format.clone().or_else(|| file.ann_format.clone()) {
        Some(s) => Some(parse_format(&s)?),
        None => None,
    };
    if metric.needs_mean_size() && params.mean_size_s.is_none() && annotations.is_none() {
        return Err(CliError::Usage(format!(
            "metric {metric} requires --mean-size or --annotations"
        )));
    }
    if metric.needs_nwd_c() && params.nwd_c.is_none() && annotations.is_none() {
        return Err(CliError::Usage(format!(
            "metric {metric} requires --nwd-c or --annotations"
        )));
    }
    Ok((params, annotations, ann_format))
}

fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let file = load_file_config(&cli.config)?;
    let seed = match cli.seed.or(file.seed) {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let format = cli.format.or(file.format).unwrap_or(OutputFormat::Human);
    let out = cli.out.or_else(|| file.out.clone());

    let command = match cli.command {
        Command::Eval(args) => {
            let corners = args.corners || file.corners.unwrap_or(false);
            let metric = parse_metric(
                args.metric
                    .or_else(|| file.metric.clone())
                    .ok_or_else(|| missing("metric"))?
                    .as_str(),
            )?;
            let pred = parse_box(
                &args.pred.or_else(|| file.pred.clone()).ok_or_else(|| missing("pred"))?,
                corners,
                "pred",
            )?;
            let gt = parse_box(
                &args.gt.or_else(|| file.gt.clone()).ok_or_else(|| missing("gt"))?,
                corners,
                "gt",
            )?;
            let (params, annotations, ann_format) = build_params(&args.params, &file, metric)?;
            CommandConfig::Eval {
                metric,
                pred,
                gt,
                params,
                annotations,
                ann_format,
            }
        }
        Command::GradCheck(args) => {
            let corners = args.corners || file.corners.unwrap_or(false);
            let metric = parse_metric(
                args.metric
                    .or_else(|| file.metric.clone())
                    .ok_or_else(|| missing("metric"))?
                    .as_str(),
            )?;
            let pred = parse_box(
                &args.pred.or_else(|| file.pred.clone()).ok_or_else(|| missing("pred"))?,
                corners,
                "pred",
            )?;
            let gt = parse_box(
                &args.gt.or_else(|| file.gt.clone()).ok_or_else(|| missing("gt"))?,
                corners,
                "gt",
            )?;
            let (params, annotations, _) = build_params(&args.params, &file, metric)?;
            if annotations.is_some() {
                return Err(CliError::Usage(
                    "grad-check takes explicit --mean-size / --nwd-c, not --annotations".into(),
                ));
            }
            CommandConfig::GradCheck {
                metric,
                pred,
                gt,
                params,
                step: args.step.or(file.step).unwrap_or(1e-6),
            }
        }
        Command::Oracle(args) => {
            let corners = args.corners || file.corners.unwrap_or(false);
            let a = parse_box(
                &args.a.or_else(|| file.a.clone()).ok_or_else(|| missing("a"))?,
                corners,
                "a",
            )?;
            let b = parse_box(
                &args.b.or_else(|| file.b.clone()).ok_or_else(|| missing("b"))?,
                corners,
                "b",
            )?;
            CommandConfig::Oracle {
                a,
                b,
                n: args.n.or(file.n).unwrap_or(100_000),
                cells: args.cells.or(file.cells).unwrap_or(1000),
            }
        }
        Command::Sweep(args) => {
            let corners = args.corners || file.corners.unwrap_or(false);
            let gt = parse_box(
                &args.gt.or_else(|| file.gt.clone()).ok_or_else(|| missing("gt"))?,
                corners,
                "gt",
            )?;
            let metric = parse_metric(
                args.metric
                    .or_else(|| file.metric.clone())
                    .ok_or_else(|| missing("metric"))?
                    .as_str(),
            )?;
            let (params, annotations, _) = build_params(&args.params, &file, metric)?;
            if annotations.is_some() {
                return Err(CliError::Usage(
                    "sweep takes explicit --mean-size / --nwd-c, not --annotations".into(),
                ));
            }
            let max_dev = args.max_dev.or(file.max_dev).ok_or_else(|| missing("max-dev"))?;
            if max_dev <= 0.0 {
                return Err(CliError::Usage("--max-dev must be positive".into()));
            }
            let steps = args.steps.or(file.steps).unwrap_or(40);
            if steps == 0 {
                return Err(CliError::Usage("--steps must be at least 1".into()));
            }
            CommandConfig::Sweep {
                gt,
                metric,
                params,
                axis: args.axis.or(file.axis).unwrap_or(AxisArg::Both),
                mode: args.mode.or(file.mode).unwrap_or(ModeArg::PositionDeviation),
                max_dev,
                steps,
            }
        }
        Command::Simulate(args) => {
            let corners = args.corners || file.corners.unwrap_or(false);
            let anchor = parse_box(
                &args
                    .anchor
                    .or_else(|| file.anchor.clone())
                    .ok_or_else(|| missing("anchor"))?,
                corners,
                "anchor",
            )?;
            let gt = parse_box(
                &args.gt.or_else(|| file.gt.clone()).ok_or_else(|| missing("gt"))?,
                corners,
                "gt",
            )?;
            let metric = parse_metric(
                args.metric
                    .or_else(|| file.metric.clone())
                    .ok_or_else(|| missing("metric"))?
                    .as_str(),
            )?;
            let (params, annotations, _) = build_params(&args.params, &file, metric)?;
            if annotations.is_some() {
                return Err(CliError::Usage(
                    "simulate takes explicit --mean-size / --nwd-c, not --annotations".into(),
                ));
            }
            CommandConfig::Simulate {
                scenario: Scenario {
                    anchor,
                    gt,
                    metric,
                    params,
                    lr: args.lr.or(file.lr).unwrap_or(0.05),
                    max_steps: args.max_steps.or(file.max_steps).unwrap_or(2000),
                    seed,
                    convergence_loss: 1e-6,
                },
            }
        }
        Command::Compare(args) => {
            let metric_list = args.metrics.or_else(|| file.metrics.clone());
            let metrics = match metric_list {
                None => MetricId::ALL.to_vec(),
                Some(list) => list
                    .split(',')
                    .map(|m| parse_metric(m.trim()))
                    .collect::<Result<Vec<_>, _>>()?,
            };
            let needs_s = metrics.iter().any(|m| m.needs_mean_size());
            let needs_c = metrics.iter().any(|m| m.needs_nwd_c());
            let mut params = MetricParams::default();
            if let Some(s) = args.params.scale.or(file.scale) {
                params.scale = s;
            }
            params.mean_size_s = args.params.mean_size.or(file.mean_size);
            params.nwd_c = args.params.nwd_c.or(file.nwd_c);
            if needs_s && params.mean_size_s.is_none() {
                return Err(CliError::Usage(
                    "compare with a dotd-family metric requires --mean-size".into(),
                ));
            }
            if needs_c && params.nwd_c.is_none() {
                return Err(CliError::Usage(
                    "compare with an nwd-family metric requires --nwd-c".into(),
                ));
            }
            let mut sampler = SamplerConfig::new(
                args.n_scenarios.or(file.n_scenarios).unwrap_or(100),
                seed,
            );
            sampler.lr = args.lr.or(file.lr).unwrap_or(0.05);
            sampler.max_steps = args.max_steps.or(file.max_steps).unwrap_or(2000);
            sampler.params = params;
            if let Some(spec) = args.gt_aspect.or_else(|| file.gt_aspect.clone()) {
                let parts: Vec<f64> = spec
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| CliError::Usage(format!("--gt-aspect: {e}")))?;
                if parts.len() != 2 || parts[0] <= 0.0 || parts[1] <= parts[0] {
                    return Err(CliError::Usage(
                        "--gt-aspect expects `min,max` with 0 < min < max".into(),
                    ));
                }
                sampler.gt_aspect_range = Some((parts[0], parts[1]));
            }
            CommandConfig::Compare { metrics, sampler }
        }
        Command::Stats(args) => {
            let annotations = args
                .annotations
                .or_else(|| file.annotations.clone())
                .ok_or_else(|| missing("annotations"))?;
            let ann_format = match args.ann_format.or_else(|| file.ann_format.clone()) {
                Some(s) => parse_format(&s)?,
                None => SourceFormat::CocoJson,
            };
            CommandConfig::Stats {
                annotations,
                ann_format,
                nwd_c_override: args.nwd_c.or(file.nwd_c),
            }
        }
    };

    if format == OutputFormat::Svg && !matches!(command, CommandConfig::Sweep { .. }) {
        return Err(CliError::Usage(
            "--format svg is only supported for the sweep command".into(),
        ));
    }

    Ok(RunConfig {
        seed,
        format,
        out,
        command,
    })
}

/// Round a value to 6 significant digits for human-readable output.
fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (5 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

fn header(config: &RunConfig, comment: &str) -> String {
    let cfg = serde_json::to_string(config).expect("config serializes");
    format!(
        "{comment} bboxlab {VERSION}\n{comment} seed: {}\n{comment} config: {cfg}\n",
        config.seed
    )
}

fn json_artifact(config: &RunConfig, result: serde_json::Value) -> String {
    let doc = serde_json::json!({
        "version": VERSION,
        "seed": config.seed,
        "config": config,
        "result": result,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("artifact serializes");
    s.push('\n');
    s
}

/// Execute a resolved config and return the emitted artifact text.
pub fn execute(config: &RunConfig) -> Result<String, CliError> {
    match &config.command {
        CommandConfig::Eval {
            metric,
            pred,
            gt,
            params,
            annotations,
            ann_format,
        } => {
            let mut params = params.clone();
            if let Some(path) = annotations {
                fill_params_from_annotations(&mut params, *metric, path, *ann_format)?;
            }
            let result = metrics::evaluate(*metric, pred, gt, &params)?;
            Ok(match config.format {
                OutputFormat::Human => {
                    let mut s = header(config, "#");
                    s.push_str(&format!("metric: {metric}\n"));
                    s.push_str(&format!("value: {}\n", sig6(result.value)));
                    s.push_str(&format!("loss: {}\n", sig6(result.loss)));
                    s.push_str("components:\n");
                    for (k, v) in &result.components {
                        s.push_str(&format!("  {k}: {}\n", sig6(*v)));
                    }
                    s
                }
                OutputFormat::Csv => {
                    let mut s = header(config, "#");
                    s.push_str("quantity,value\r\n");
                    s.push_str(&format!("value,{}\r\n", result.value));
                    s.push_str(&format!("loss,{}\r\n", result.loss));
                    for (k, v) in &result.components {
                        s.push_str(&format!("component.{k},{v}\r\n"));
                    }
                    s
                }
                OutputFormat::Json => json_artifact(
                    config,
                    serde_json::to_value(&result).expect("result serializes"),
                ),
                OutputFormat::Svg => unreachable!("rejected at resolve"),
            })
        }

        CommandConfig::GradCheck {
            metric,
            pred,
            gt,
            params,
            step,
        } => {
            let report = grad::finite_diff_check(*metric, pred, gt, params, *step)?;
            Ok(match config.format {
                OutputFormat::Human => {
                    let mut s = header(config, "#");
                    s.push_str(&format!("metric: {metric}\n"));
                    s.push_str(&format!("step: {}\n", sig6(report.step)));
                    s.push_str(&format!("max_rel_err: {}\n", sig6(report.max_rel_err)));
                    let names = ["d_xc", "d_yc", "d_w", "d_h"];
                    let a = report.analytic.as_array();
                    for i in 0..4 {
                        s.push_str(&format!(
                            "{}: analytic {} numeric {} rel_err {}\n",
                            names[i],
                            sig6(a[i]),
                            sig6(report.numeric[i]),
                            sig6(report.per_component_err[i])
                        ));
                    }
                    s
                }
                OutputFormat::Csv => {
                    let mut s = header(config, "#");
                    s.push_str("component,analytic,numeric,rel_err\r\n");
                    let names = ["d_xc", "d_yc", "d_w", "d_h"];
                    let a = report.analytic.as_array();
                    for i in 0..4 {
                        s.push_str(&format!(
                            "{},{},{},{}\r\n",
                            names[i], a[i], report.numeric[i], report.per_component_err[i]
                        ));
                    }
                    s
                }
                OutputFormat::Json => json_artifact(
                    config,
                    serde_json::to_value(&report).expect("report serializes"),
                ),
                OutputFormat::Svg => unreachable!("rejected at resolve"),
            })
        }

        CommandConfig::Oracle { a, b, n, cells } => {
            let analytic = boxcore::iou(a, b);
            let mc = oracle::mc_iou(a, b, *n, config.seed)?;
            let grid = oracle::grid_iou(a, b, *cells)?;
            Ok(match config.format {
                OutputFormat::Human => {
                    let mut s = header(config, "#");
                    s.push_str(&format!("analytic_iou: {}\n", sig6(analytic)));
                    s.push_str(&format!(
                        "mc_iou: {} (n {}, seed {}, generator {}, stderr_bound {})\n",
                        sig6(mc.value),
                        mc.n_samples,
                        mc.seed,
                        mc.generator,
                        sig6(mc.stderr_bound)
                    ));
                    s.push_str(&format!("grid_iou: {} (cells {})\n", sig6(grid), cells));
                    s.push_str(&format!("mc_abs_diff: {}\n", sig6((mc.value - analytic).abs())));
                    s.push_str(&format!(
                        "grid_abs_diff: {}\n",
                        sig6((grid - analytic).abs())
                    ));
                    s
                }
                OutputFormat::Csv => {
                    let mut s = header(config, "#");
                    s.push_str("quantity,value\r\n");
                    s.push_str(&format!("analytic_iou,{analytic}\r\n"));
                    s.push_str(&format!("mc_iou,{}\r\n", mc.value));
                    s.push_str(&format!("mc_stderr_bound,{}\r\n", mc.stderr_bound));
                    s.push_str(&format!("grid_iou,{grid}\r\n"));
                    s
                }
                OutputFormat::Json => json_artifact(
                    config,
                    serde_json::json!({
                        "analytic_iou": analytic,
                        "mc": mc,
                        "grid_iou": grid,
                    }),
                ),
                OutputFormat::Svg => unreachable!("rejected at resolve"),
            })
        }

        CommandConfig::Sweep {
            gt,
            metric,
            params,
            axis,
            mode,
            max_dev,
            steps,
        } => {
            let deviations: Vec<f64> = (0..=*steps)
                .map(|i| i as f64 * max_dev / *steps as f64)
                .collect();
            let run_axis = |ax: Axis| -> Result<Vec<f64>, CliError> {
                Ok(simlab::deviation_sweep(&SweepSpec {
                    gt: *gt,
                    axis: ax,
                    deviations: deviations.clone(),
                    metric: *metric,
                    params: params.clone(),
                    mode: (*mode).into(),
                })?
                .values)
            };
            let curves: Vec<(&str, Vec<f64>)> = match axis {
                AxisArg::X => vec![("x", run_axis(Axis::X)?)],
                AxisArg::Y => vec![("y", run_axis(Axis::Y)?)],
                AxisArg::Both => {
                    vec![("x", run_axis(Axis::X)?), ("y", run_axis(Axis::Y)?)]
                }
            };
            Ok(match config.format {
                OutputFormat::Human | OutputFormat::Csv => {
                    let crlf = config.format == OutputFormat::Csv;
                    let eol = if crlf { "\r\n" } else { "\n" };
                    let mut s = header(config, "#");
                    if curves.len() == 1 {
                        s.push_str(&format!("deviation,value{eol}"));
                    } else {
                        s.push_str(&format!("deviation,value_x,value_y{eol}"));
                    }
                    for (i, d) in deviations.iter().enumerate() {
                        let row: Vec<String> = std::iter::once(if crlf {
                            format!("{d}")
                        } else {
                            sig6(*d)
                        })
                        .chain(curves.iter().map(|(_, v)| {
                            if crlf {
                                format!("{}", v[i])
                            } else {
                                sig6(v[i])
                            }
                        }))
                        .collect();
                        s.push_str(&row.join(","));
                        s.push_str(eol);
                    }
                    s
                }
                OutputFormat::Json => json_artifact(
                    config,
                    serde_json::json!({
                        "deviations": deviations,
                        "curves": curves
                            .iter()
                            .map(|(name, v)| serde_json::json!({"axis": name, "values": v}))
                            .collect::<Vec<_>>(),
                    }),
                ),
                OutputFormat::Svg => {
                    let chart_curves: Vec<svg::Curve> = curves
                        .iter()
                        .map(|(name, v)| svg::Curve {
                            label: format!("{name}-axis"),
                            points: deviations.iter().copied().zip(v.iter().copied()).collect(),
                        })
                        .collect();
                    let mut s = String::from("<!--\n");
                    s.push_str(&header(config, " "));
                    s.push_str("-->\n");
                    s.push_str(&svg::line_chart(
                        &format!("{metric} deviation sweep"),
                        "deviation",
                        &format!("{metric} value"),
                        &chart_curves,
                    ));
                    s
                }
            })
        }

        CommandConfig::Simulate { scenario } => {
            let traj = simlab::run_regression(scenario)?;
            Ok(match config.format {
                OutputFormat::Human => {
                    let mut s = header(config, "#");
                    let f = traj.final_state();
                    s.push_str(&format!("metric: {}\n", scenario.metric));
                    s.push_str(&format!("stop_reason: {:?}\n", traj.stop_reason));
                    s.push_str(&format!("steps: {}\n", f.step));
                    s.push_str(&format!("final_loss: {}\n", sig6(f.loss)));
                    s.push_str(&format!("final_iou: {}\n", sig6(f.iou)));
                    s
                }
                OutputFormat::Csv => {
                    let mut s = header(config, "#");
                    s.push_str("step,xc,yc,w,h,loss,iou\r\n");
                    for st in &traj.states {
                        s.push_str(&format!(
                            "{},{},{},{},{},{},{}\r\n",
                            st.step,
                            st.pred.x_c(),
                            st.pred.y_c(),
                            st.pred.w(),
                            st.pred.h(),
                            st.loss,
                            st.iou
                        ));
                    }
                    s
                }
                OutputFormat::Json => json_artifact(
                    config,
                    serde_json::to_value(&traj).expect("trajectory serializes"),
                ),
                OutputFormat::Svg => unreachable!("rejected at resolve"),
            })
        }

        CommandConfig::Compare { metrics, sampler } => {
            let templates = simlab::sample_scenarios(sampler, metrics[0]);
            let table = simlab::batch_compare(&templates, metrics)?;
            Ok(match config.format {
                OutputFormat::Human => {
                    let mut s = header(config, "#");
                    s.push_str(&format!(
                        "{:<12} {:>14} {:>12} {:>9}\n",
                        "metric", "mean_final_iou", "mean_steps", "diverged"
                    ));
                    for row in &table.rows {
                        s.push_str(&format!(
                            "{:<12} {:>14} {:>12} {:>9}\n",
                            row.metric.name(),
                            sig6(row.mean_final_iou),
                            sig6(row.mean_steps),
                            row.diverged
                        ));
                    }
                    s
                }
                OutputFormat::Csv => {
                    let mut s = header(config, "#");
                    s.push_str("metric,mean_final_iou,mean_steps,diverged\r\n");
                    for row in &table.rows {
                        s.push_str(&format!(
                            "{},{},{},{}\r\n",
                            row.metric.name(),
                            row.mean_final_iou,
                            row.mean_steps,
                            row.diverged
                        ));
                    }
                    s
                }
                OutputFormat::Json => json_artifact(
                    config,
                    serde_json::to_value(&table).expect("table serializes"),
                ),
                OutputFormat::Svg => unreachable!("rejected at resolve"),
            })
        }

        CommandConfig::Stats {
            annotations,
            ann_format,
            nwd_c_override,
        } => {
            let ann = datasets::load_annotations(annotations, *ann_format)?;
            let stats = datasets::compute_stats_with_nwd_c(&ann, *nwd_c_override)?;
            Ok(match config.format {
                OutputFormat::Human => {
                    let mut s = header(config, "#");
                    s.push_str(&format!("n_images: {}\n", stats.n_images));
                    s.push_str(&format!("n_boxes: {}\n", stats.n_boxes));
                    s.push_str(&format!("mean_size_s: {}\n", sig6(stats.mean_size_s)));
                    s.push_str(&format!(
                        "nwd_c: {} ({:?})\n",
                        sig6(stats.nwd_c),
                        stats.nwd_c_source
                    ));
                    s.push_str("size_histogram (sizes bucketed by powers of 2):\n");
                    for b in &stats.size_histogram {
                        s.push_str(&format!(
                            "  [2^{}, 2^{}): {}\n",
                            b.exponent,
                            b.exponent + 1,
                            b.count
                        ));
                    }
                    // no principled numeric mapping exists from target
                    // scale to the shape-iou scale factor; report the
                    // distribution and leave the choice to the user
                    s.push_str(
                        "note: pick the shape-iou scale factor according to the target \
                         scale of the dataset; use `sweep`/`compare` to explore candidates.\n",
                    );
                    s
                }
                OutputFormat::Csv => {
                    let mut s = header(config, "#");
                    s.push_str("quantity,value\r\n");
                    s.push_str(&format!("n_images,{}\r\n", stats.n_images));
                    s.push_str(&format!("n_boxes,{}\r\n", stats.n_boxes));
                    s.push_str(&format!("mean_size_s,{}\r\n", stats.mean_size_s));
                    s.push_str(&format!("nwd_c,{}\r\n", stats.nwd_c));
                    for b in &stats.size_histogram {
                        s.push_str(&format!("histogram.2^{},{}\r\n", b.exponent, b.count));
                    }
                    s
                }
                OutputFormat::Json => json_artifact(
                    config,
                    serde_json::to_value(&stats).expect("stats serializes"),
                ),
                OutputFormat::Svg => unreachable!("rejected at resolve"),
            })
        }
    }
}

fn fill_params_from_annotations(
    params: &mut MetricParams,
    metric: MetricId,
    path: &Path,
    format: Option<SourceFormat>,
) -> Result<(), CliError> {
    if (metric.needs_mean_size() && params.mean_size_s.is_none())
        || (metric.needs_nwd_c() && params.nwd_c.is_none())
    {
        let ann = datasets::load_annotations(path, format.unwrap_or(SourceFormat::CocoJson))?;
        let stats = datasets::compute_stats(&ann)?;
        if params.mean_size_s.is_none() {
            params.mean_size_s = Some(stats.mean_size_s);
        }
        if params.nwd_c.is_none() {
            params.nwd_c = Some(stats.nwd_c);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, CliError> {
        parse_args(std::iter::once("bboxlab").chain(args.iter().copied()))
    }

    #[test]
    fn eval_parse_example() {
        let cfg = parse(&[
            "eval",
            "--metric",
            "shape-iou",
            "--pred",
            "0.5,0,4,2",
            "--gt",
            "0,0,4,2",
            "--scale",
            "1",
        ])
        .unwrap();
        match &cfg.command {
            CommandConfig::Eval {
                metric,
                pred,
                params,
                ..
            } => {
                assert_eq!(*metric, MetricId::ShapeIou);
                assert_eq!(params.scale, 1.0);
                assert_eq!(pred.w(), 4.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eval_missing_param_is_usage_error() {
        let err = parse(&["eval", "--metric", "dotd", "--pred", "0,0,1,1", "--gt", "0,0,1,1"])
            .unwrap_err();
        match err {
            CliError::Usage(m) => {
                assert!(m.contains("mean-size"), "{m}");
                assert!(m.contains("annotations"), "{m}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_file_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(
            &path,
            r#"{"metric": "shape-iou", "pred": "0.5,0,4,2", "gt": "0,0,4,2", "scale": 1}"#,
        )
        .unwrap();
        let cfg = parse(&["eval", "--config", path.to_str().unwrap(), "--scale", "2"]).unwrap();
        match &cfg.command {
            CommandConfig::Eval { params, .. } => assert_eq!(params.scale, 2.0),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = parse(&["eval", "--config", path.to_str().unwrap()]).unwrap();
        match &cfg.command {
            CommandConfig::Eval { params, .. } => assert_eq!(params.scale, 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn corners_modifier() {
        let cfg = parse(&[
            "eval",
            "--metric",
            "iou",
            "--pred",
            "0,0,2,2",
            "--gt",
            "0,0,2,2",
            "--corners",
        ])
        .unwrap();
        match &cfg.command {
            CommandConfig::Eval { pred, .. } => {
                assert_eq!(pred.x_c(), 1.0);
                assert_eq!(pred.w(), 2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn run_config_round_trips() {
        for args in [
            vec!["eval", "--metric", "iou", "--pred", "0,0,1,1", "--gt", "0,0,2,2"],
            vec!["oracle", "--a", "0,0,1,1", "--b", "0.5,0,1,1", "--seed", "7"],
            vec![
                "sweep", "--gt", "0,0,4,2", "--metric", "iou", "--max-dev", "2", "--steps", "10",
            ],
            vec![
                "simulate", "--anchor", "1,1,2,2", "--gt", "0,0,2,2", "--metric", "diou",
            ],
            vec!["compare", "--metrics", "iou,giou", "--n-scenarios", "5"],
            vec!["stats", "--annotations", "x.json"],
        ] {
            let cfg = parse(&args).unwrap();
            let json = serde_json::to_string(&cfg).unwrap();
            let back: RunConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(back, cfg, "args: {args:?}");
        }
    }

    #[test]
    fn svg_only_for_sweep() {
        let err = parse(&[
            "eval", "--metric", "iou", "--pred", "0,0,1,1", "--gt", "0,0,1,1", "--format", "svg",
        ])
        .unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }

    #[test]
    fn sig6_formats() {
        assert_eq!(sig6(0.229087123), "0.229087");
        assert_eq!(sig6(123.456789), "123.457");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1.00000");
    }

    #[test]
    fn eval_execute_matches_metric_module() {
        let cfg = parse(&[
            "eval",
            "--metric",
            "shape-iou",
            "--pred",
            "0.5,0,4,2",
            "--gt",
            "0,0,4,2",
            "--scale",
            "1",
        ])
        .unwrap();
        let artifact = execute(&cfg).unwrap();
        assert!(artifact.contains("loss: 0.229095"), "{artifact}");
    }

    #[test]
    fn bad_box_is_usage_error() {
        assert!(matches!(
            parse(&["eval", "--metric", "iou", "--pred", "0,0,1", "--gt", "0,0,1,1"]),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            parse(&["eval", "--metric", "iou", "--pred", "0,0,0,1", "--gt", "0,0,1,1"]),
            Err(CliError::Usage(_))
        ));
    }
}
