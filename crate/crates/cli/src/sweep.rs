//! Parameter sweeps: run a solver across a grid of static weights and/or
//! adaptive scales, score each run and emit a CSV table.
//!
//! The CSV is deterministic for fixed flags and seeds: rows follow the
//! declared value order regardless of the number of worker threads, and
//! wall-clock timing is kept out of the file (it stays on the in-memory
//! record and goes to stderr).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use adaptv::field::{BinaryField, ScalarField};
use adaptv::flow::{angular_error, endpoint_error, flow_pyramid, flow_pyramid_static, PyramidConfig};
use adaptv::imgio;
use adaptv::metrics::{psnr, ssim, SsimConfig};
use adaptv::segment::f_measure;
use adaptv::solver::SolverConfig;
use clap::Args;

use crate::commands::{resolve_rule, solver_config, Rule};
use crate::{CliError, SolverArgs, WeightArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    StaticLambda,
    AdaptiveBeta,
}

impl SweepAxis {
    fn param_name(&self) -> &'static str {
        match self {
            SweepAxis::StaticLambda => "static_lambda",
            SweepAxis::AdaptiveBeta => "adaptive_beta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Psnr,
    Ssim,
    F,
    Ae,
    Ee,
}

impl Metric {
    fn name(&self) -> &'static str {
        match self {
            Metric::Psnr => "psnr",
            Metric::Ssim => "ssim",
            Metric::F => "f",
            Metric::Ae => "ae",
            Metric::Ee => "ee",
        }
    }

    fn parse(s: &str) -> Result<Self, CliError> {
        match s.trim().to_lowercase().as_str() {
            "psnr" => Ok(Metric::Psnr),
            "ssim" => Ok(Metric::Ssim),
            "f" => Ok(Metric::F),
            "ae" => Ok(Metric::Ae),
            "ee" => Ok(Metric::Ee),
            other => Err(CliError::Args(format!("unknown metric {other}"))),
        }
    }
}

/// One axis of a sweep: which parameter varies, over which values, scored
/// by which metrics, writing into which directory.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub metrics: Vec<Metric>,
    pub out_dir: PathBuf,
}

impl SweepSpec {
    fn validate(&self) -> Result<(), CliError> {
        if self.values.is_empty() {
            return Err(CliError::Args("sweep values must be nonempty".into()));
        }
        if self.axis == SweepAxis::StaticLambda {
            for &v in &self.values {
                if !(v > 0.0 && v < 1.0) {
                    return Err(CliError::Args(format!(
                        "static lambda values must lie in (0, 1), got {v}"
                    )));
                }
            }
        }
        if self.metrics.is_empty() {
            return Err(CliError::Args("metric set must be nonempty".into()));
        }
        Ok(())
    }
}

/// One scored solve: parameter point, metric value and iteration count.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub task: String,
    pub param_name: String,
    pub param_value: f64,
    pub metric: String,
    pub metric_value: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
}

#[derive(Args, Debug, Default)]
pub struct SweepArgs {
    /// Key=value config file supplying any of the flags below
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = ["denoise", "segment", "flow"])]
    pub task: Option<String>,
    /// Comma-separated frozen weights in (0, 1)
    #[arg(long, value_delimiter = ',')]
    pub static_lambdas: Vec<f64>,
    /// Comma-separated adaptive scales
    #[arg(long, value_delimiter = ',')]
    pub adaptive_betas: Vec<f64>,
    /// Comma-separated subset of psnr,ssim,f,ae,ee
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Concurrent solves
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Second frame (flow task)
    #[arg(long)]
    pub input2: Option<PathBuf>,
    /// Clean reference (denoise task)
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Ground-truth mask (segment task)
    #[arg(long)]
    pub gt_mask: Option<PathBuf>,
    /// Ground-truth flow (flow task)
    #[arg(long)]
    pub gt_flo: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long)]
    pub kernel_sigma: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Pyramid levels for the flow task
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub scale: f64,
    #[arg(long, default_value_t = 3)]
    pub warps: usize,
    #[arg(long, default_value_t = 50)]
    pub inner_iters: usize,
}

/// Applies `key=value` lines (with `#` comments) onto the parsed args.
/// Explicit command-line flags win where both are present.
fn apply_config(args: &mut SweepArgs, path: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(path)?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Args(format!("config line {} is not key=value", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let parse_f64 = |v: &str| -> Result<f64, CliError> {
            v.parse()
                .map_err(|_| CliError::Args(format!("bad number {v} for {key}")))
        };
        let parse_list = |v: &str| -> Result<Vec<f64>, CliError> {
            v.split(',').map(|t| parse_f64(t.trim())).collect()
        };
        match key {
            "task" => {
                if args.task.is_none() {
                    args.task = Some(value.to_string());
                }
            }
            "static_lambdas" => {
                if args.static_lambdas.is_empty() {
                    args.static_lambdas = parse_list(value)?;
                }
            }
            "adaptive_betas" => {
                if args.adaptive_betas.is_empty() {
                    args.adaptive_betas = parse_list(value)?;
                }
            }
            "metrics" => {
                if args.metrics.is_empty() {
                    args.metrics = value.split(',').map(|s| s.trim().to_string()).collect();
                }
            }
            "out_dir" => {
                if args.out_dir.is_none() {
                    args.out_dir = Some(PathBuf::from(value));
                }
            }
            "input" => {
                if args.input.is_none() {
                    args.input = Some(PathBuf::from(value));
                }
            }
            "input2" => {
                if args.input2.is_none() {
                    args.input2 = Some(PathBuf::from(value));
                }
            }
            "reference" => {
                if args.reference.is_none() {
                    args.reference = Some(PathBuf::from(value));
                }
            }
            "gt_mask" => {
                if args.gt_mask.is_none() {
                    args.gt_mask = Some(PathBuf::from(value));
                }
            }
            "gt_flo" => {
                if args.gt_flo.is_none() {
                    args.gt_flo = Some(PathBuf::from(value));
                }
            }
            "theta" => args.theta = parse_f64(value)?,
            "epsilon" => args.epsilon = parse_f64(value)?,
            "kernel_sigma" => args.kernel_sigma = Some(parse_f64(value)?),
            "jobs" => {
                args.jobs = value
                    .parse()
                    .map_err(|_| CliError::Args(format!("bad jobs value {value}")))?
            }
            "mu" => args.solver.mu = parse_f64(value)?,
            "tau" => args.solver.tau = parse_f64(value)?,
            "max_iters" => {
                args.solver.max_iters = value
                    .parse()
                    .map_err(|_| CliError::Args(format!("bad max_iters {value}")))?
            }
            "tol" => args.solver.tol = parse_f64(value)?,
            other => {
                return Err(CliError::Args(format!(
                    "unknown config key {other} on line {}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(())
}

struct TaskInputs {
    task: String,
    input: ScalarField,
    input2: Option<ScalarField>,
    reference: Option<ScalarField>,
    gt_mask: Option<BinaryField>,
    gt_flo: Option<adaptv::field::VectorField2>,
}

pub fn run_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let mut args = SweepArgs {
        config: args.config.clone(),
        task: args.task.clone(),
        static_lambdas: args.static_lambdas.clone(),
        adaptive_betas: args.adaptive_betas.clone(),
        metrics: args.metrics.clone(),
        out_dir: args.out_dir.clone(),
        jobs: args.jobs,
        input: args.input.clone(),
        input2: args.input2.clone(),
        reference: args.reference.clone(),
        gt_mask: args.gt_mask.clone(),
        gt_flo: args.gt_flo.clone(),
        theta: args.theta,
        epsilon: args.epsilon,
        kernel_sigma: args.kernel_sigma,
        solver: args.solver.clone(),
        levels: args.levels,
        scale: args.scale,
        warps: args.warps,
        inner_iters: args.inner_iters,
    };
    if let Some(path) = args.config.clone() {
        apply_config(&mut args, &path)?;
    }

    let task = args
        .task
        .clone()
        .ok_or_else(|| CliError::Args("sweep requires --task".into()))?;
    let out_dir = args
        .out_dir
        .clone()
        .ok_or_else(|| CliError::Args("sweep requires --out-dir".into()))?;
    let metrics = args
        .metrics
        .iter()
        .map(|m| Metric::parse(m))
        .collect::<Result<Vec<_>, _>>()?;
    if metrics.is_empty() {
        return Err(CliError::Args("sweep requires --metrics".into()));
    }
    for metric in &metrics {
        let ok = match task.as_str() {
            "denoise" => matches!(metric, Metric::Psnr | Metric::Ssim),
            "segment" => matches!(metric, Metric::F),
            _ => matches!(metric, Metric::Ae | Metric::Ee),
        };
        if !ok {
            return Err(CliError::Args(format!(
                "metric {} does not apply to task {task}",
                metric.name()
            )));
        }
    }

    let mut specs = Vec::new();
    if !args.static_lambdas.is_empty() {
        specs.push(SweepSpec {
            axis: SweepAxis::StaticLambda,
            values: args.static_lambdas.clone(),
            metrics: metrics.clone(),
            out_dir: out_dir.clone(),
        });
    }
    if !args.adaptive_betas.is_empty() {
        specs.push(SweepSpec {
            axis: SweepAxis::AdaptiveBeta,
            values: args.adaptive_betas.clone(),
            metrics: metrics.clone(),
            out_dir: out_dir.clone(),
        });
    }
    if specs.is_empty() {
        return Err(CliError::Args(
            "sweep requires --static-lambdas and/or --adaptive-betas".into(),
        ));
    }
    for spec in &specs {
        spec.validate()?;
    }

    let inputs = load_inputs(&task, &args)?;

    // one job per (axis, value), run concurrently, results kept in order
    let jobs: Vec<(SweepAxis, f64)> = specs
        .iter()
        .flat_map(|s| s.values.iter().map(|&v| (s.axis, v)))
        .collect();
    let results: Mutex<Vec<Option<Result<Vec<RunRecord>, CliError>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = args.jobs.max(1).min(jobs.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let (axis, value) = jobs[i];
                let outcome = run_one(&task, axis, value, &metrics, &inputs, &args);
                results.lock().unwrap()[i] = Some(outcome);
            });
        }
    });

    let mut records = Vec::new();
    for slot in results.into_inner().unwrap() {
        records.extend(slot.expect("worker filled every slot")?);
    }

    fs::create_dir_all(&out_dir)?;
    let csv_path = out_dir.join("sweep.csv");
    let mut csv = String::new();
    csv.push_str("# adaptv sweep csv v1\n");
    csv.push_str("task,param,value,metric,metric_value,iters\n");
    for r in &records {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.task, r.param_name, r.param_value, r.metric, r.metric_value, r.iterations
        ));
        eprintln!(
            "{} {}={} {}={} ({} iters, {:.3}s)",
            r.task, r.param_name, r.param_value, r.metric, r.metric_value, r.iterations, r.wall_time_s
        );
    }
    fs::write(&csv_path, csv)?;
    println!("{}", csv_path.display());
    Ok(())
}

fn load_inputs(task: &str, args: &SweepArgs) -> Result<TaskInputs, CliError> {
    let input_path = args
        .input
        .clone()
        .ok_or_else(|| CliError::Args("sweep requires --input".into()))?;
    let input = imgio::read_image(&input_path)?;
    let mut inputs = TaskInputs {
        task: task.to_string(),
        input,
        input2: None,
        reference: None,
        gt_mask: None,
        gt_flo: None,
    };
    match task {
        "denoise" => {
            let path = args
                .reference
                .clone()
                .ok_or_else(|| CliError::Args("denoise sweep requires --reference".into()))?;
            inputs.reference = Some(imgio::read_image(&path)?);
        }
        "segment" => {
            let path = args
                .gt_mask
                .clone()
                .ok_or_else(|| CliError::Args("segment sweep requires --gt-mask".into()))?;
            let img = imgio::read_image(&path)?;
            inputs.gt_mask = Some(BinaryField::from_fn(img.width(), img.height(), |x, y| {
                img.at(x, y) > 0.5
            }));
        }
        "flow" => {
            let path = args
                .input2
                .clone()
                .ok_or_else(|| CliError::Args("flow sweep requires --input2".into()))?;
            inputs.input2 = Some(imgio::read_image(&path)?);
            let path = args
                .gt_flo
                .clone()
                .ok_or_else(|| CliError::Args("flow sweep requires --gt-flo".into()))?;
            inputs.gt_flo = Some(imgio::read_flo(&path)?);
        }
        other => return Err(CliError::Args(format!("unknown task {other}"))),
    }
    Ok(inputs)
}

fn run_one(
    task: &str,
    axis: SweepAxis,
    value: f64,
    metrics: &[Metric],
    inputs: &TaskInputs,
    args: &SweepArgs,
) -> Result<Vec<RunRecord>, CliError> {
    let weight = WeightArgs {
        mode: None,
        lambda: (axis == SweepAxis::StaticLambda).then_some(value),
        beta: (axis == SweepAxis::AdaptiveBeta).then_some(value),
        epsilon: args.epsilon,
        kernel_sigma: args.kernel_sigma,
    };
    let rule = resolve_rule(&weight, None)?;
    let scfg = solver_config(&args.solver);
    let start = Instant::now();

    let mut score = |metric: Metric, value_of: &dyn Fn() -> f64, iters: usize| RunRecord {
        task: inputs.task.clone(),
        param_name: axis.param_name().to_string(),
        param_value: value,
        metric: metric.name().to_string(),
        metric_value: value_of(),
        iterations: iters,
        wall_time_s: start.elapsed().as_secs_f64(),
    };

    let mut records = Vec::new();
    match task {
        "denoise" => {
            let (u, trace) = match &rule {
                Rule::Static(l) => adaptv::denoise::denoise_static(&inputs.input, *l, &scfg)?,
                Rule::Adaptive(cfg) => adaptv::denoise::denoise(&inputs.input, cfg, &scfg)?,
            };
            let reference = inputs.reference.as_ref().expect("loaded");
            for metric in metrics {
                let v = match metric {
                    Metric::Psnr => psnr(&u, reference, 1.0),
                    Metric::Ssim => ssim(&u, reference, &SsimConfig::default())?,
                    _ => unreachable!("validated"),
                };
                records.push(score(*metric, &|| v, trace.len()));
            }
        }
        "segment" => {
            let result = match &rule {
                Rule::Static(l) => {
                    adaptv::segment::segment_static(&inputs.input, *l, &scfg, args.theta)?
                }
                Rule::Adaptive(cfg) => {
                    adaptv::segment::segment(&inputs.input, cfg, &scfg, args.theta)?
                }
            };
            let truth = inputs.gt_mask.as_ref().expect("loaded");
            let v = f_measure(&result.mask, truth);
            records.push(score(Metric::F, &|| v, result.trace.len()));
        }
        "flow" => {
            let i1 = inputs.input2.as_ref().expect("loaded");
            let mut pcfg = PyramidConfig::for_dims(inputs.input.width(), inputs.input.height());
            if let Some(levels) = args.levels {
                pcfg.levels = levels;
            }
            pcfg.scale = args.scale;
            pcfg.warps_per_level = args.warps;
            pcfg.inner_iters = args.inner_iters;
            let (flow, trace) = match &rule {
                Rule::Static(l) => flow_pyramid_static(&inputs.input, i1, *l, &scfg, &pcfg)?,
                Rule::Adaptive(cfg) => flow_pyramid(&inputs.input, i1, cfg, &scfg, &pcfg)?,
            };
            let gt = inputs.gt_flo.as_ref().expect("loaded");
            for metric in metrics {
                let v = match metric {
                    Metric::Ae => angular_error(&flow, gt),
                    Metric::Ee => endpoint_error(&flow, gt),
                    _ => unreachable!("validated"),
                };
                records.push(score(*metric, &|| v, trace.len()));
            }
        }
        other => return Err(CliError::Args(format!("unknown task {other}"))),
    }
    Ok(records)
}
