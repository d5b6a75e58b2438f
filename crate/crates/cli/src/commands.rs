//! Implementations of the single-solve and scene-generation commands.

use std::fs;
use std::path::Path;

use adaptv::adaptive::AdaptiveWeightConfig;
use adaptv::field::{BinaryField, GaussianKernel, ScalarField};
use adaptv::flow::{angular_error, endpoint_error, flow_pyramid, flow_pyramid_static, PyramidConfig};
use adaptv::imgio;
use adaptv::metrics::{psnr, ssim, SsimConfig};
use adaptv::segment::f_measure;
use adaptv::solver::SolverConfig;
use adaptv::synth::{
    add_biased_noise, add_gaussian_noise, make_smooth_texture, make_translation_pair,
    make_two_level_phantom, make_two_motion_pair, BiasProfile, BiasedNoiseSpec, PhantomShape,
};
use adaptv::trace::ConvergenceTrace;

use crate::{CliError, DenoiseArgs, FlowArgs, SegmentArgs, SolverArgs, SynthArgs, WeightArgs};

/// The weight rule a command resolved from its flags.
pub enum Rule {
    Static(f64),
    Adaptive(AdaptiveWeightConfig),
}

/// Resolves --mode/--lambda/--beta/--epsilon/--kernel-sigma into a rule.
///
/// The mode is inferred from which of --lambda/--beta is present; an
/// explicit --mode must agree. `default_beta` supplies the adaptive scale
/// when neither flag is given (flow uses 1).
pub fn resolve_rule(w: &WeightArgs, default_beta: Option<f64>) -> Result<Rule, CliError> {
    let mode = match (w.mode.as_deref(), w.lambda, w.beta) {
        (Some("static"), _, Some(_)) | (Some("adaptive"), Some(_), _) => {
            return Err(CliError::Args(
                "--mode contradicts the given --lambda/--beta".into(),
            ))
        }
        (Some(m), _, _) => m.to_string(),
        (None, Some(_), Some(_)) => {
            return Err(CliError::Args("give either --lambda or --beta, not both".into()))
        }
        (None, Some(_), None) => "static".into(),
        (None, None, Some(_)) => "adaptive".into(),
        (None, None, None) => "adaptive".into(),
    };
    match mode.as_str() {
        "static" => {
            let lambda = w
                .lambda
                .ok_or_else(|| CliError::Args("static mode requires --lambda".into()))?;
            if !(lambda > 0.0 && lambda < 1.0) {
                return Err(CliError::Args(format!(
                    "--lambda must lie strictly inside (0, 1), got {lambda}"
                )));
            }
            Ok(Rule::Static(lambda))
        }
        _ => {
            let beta = w.beta.or(default_beta).ok_or_else(|| {
                CliError::Args("adaptive mode requires --beta".into())
            })?;
            let smoothed = w.epsilon > 0.0 || w.kernel_sigma.is_some();
            let cfg = if smoothed {
                let sigma = w.kernel_sigma.unwrap_or(1.0);
                AdaptiveWeightConfig::smoothed(beta, w.epsilon, GaussianKernel::new(sigma)?)?
            } else {
                AdaptiveWeightConfig::plain(beta)?
            };
            Ok(Rule::Adaptive(cfg))
        }
    }
}

pub fn solver_config(s: &SolverArgs) -> SolverConfig {
    SolverConfig {
        mu: s.mu,
        tau: s.tau,
        max_iters: s.max_iters,
        tol_rel_change: s.tol,
        lambda_update_every: s.lambda_every,
    }
}

fn write_trace(path: &Path, trace: &ConvergenceTrace) -> Result<(), CliError> {
    let mut buf = Vec::new();
    trace
        .write_csv(&mut buf)
        .map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, buf)?;
    for w in &trace.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

/// Reads an image as a mask: pixels above 0.5 are foreground.
fn read_mask(path: &Path) -> Result<BinaryField, CliError> {
    let img = imgio::read_image(path)?;
    let (w, h) = (img.width(), img.height());
    Ok(BinaryField::from_fn(w, h, |x, y| img.at(x, y) > 0.5))
}

fn mask_to_image(mask: &BinaryField) -> ScalarField {
    ScalarField::from_fn(mask.width(), mask.height(), |x, y| {
        if mask.at(x, y) {
            1.0
        } else {
            0.0
        }
    })
}

pub fn run_denoise(args: &DenoiseArgs) -> Result<(), CliError> {
    let rule = resolve_rule(&args.weight, None)?;
    let scfg = solver_config(&args.solver);
    let f = imgio::read_image(&args.input)?;
    let (u, trace) = match &rule {
        Rule::Static(lambda) => adaptv::denoise::denoise_static(&f, *lambda, &scfg)?,
        Rule::Adaptive(cfg) => adaptv::denoise::denoise(&f, cfg, &scfg)?,
    };
    imgio::write_image(&args.output, &u)?;
    if let Some(path) = &args.trace {
        write_trace(path, &trace)?;
    }
    if let Some(ref_path) = &args.reference {
        let reference = imgio::read_image(ref_path)?;
        let p = psnr(&u, &reference, 1.0);
        let s = ssim(&u, &reference, &SsimConfig::default())?;
        println!("psnr={p} ssim={s}");
    }
    Ok(())
}

pub fn run_segment(args: &SegmentArgs) -> Result<(), CliError> {
    let rule = resolve_rule(&args.weight, None)?;
    let scfg = solver_config(&args.solver);
    let f = imgio::read_image(&args.input)?;
    let result = match &rule {
        Rule::Static(lambda) => adaptv::segment::segment_static(&f, *lambda, &scfg, args.theta)?,
        Rule::Adaptive(cfg) => adaptv::segment::segment(&f, cfg, &scfg, args.theta)?,
    };
    imgio::write_image(&args.output, &mask_to_image(&result.mask))?;
    if let Some(path) = &args.u_output {
        imgio::write_image(path, &result.u)?;
    }
    if let Some(path) = &args.trace {
        write_trace(path, &result.trace)?;
    }
    if let Some(gt_path) = &args.gt_mask {
        let truth = read_mask(gt_path)?;
        println!("f={}", f_measure(&result.mask, &truth));
    }
    Ok(())
}

pub fn run_flow(args: &FlowArgs) -> Result<(), CliError> {
    let rule = resolve_rule(&args.weight, Some(1.0))?;
    let scfg = solver_config(&args.solver);
    let i0 = imgio::read_image(&args.input)?;
    let i1 = imgio::read_image(&args.input2)?;
    let mut pcfg = PyramidConfig::for_dims(i0.width(), i0.height());
    if let Some(levels) = args.levels {
        pcfg.levels = levels;
    }
    pcfg.scale = args.scale;
    pcfg.warps_per_level = args.warps;
    pcfg.inner_iters = args.inner_iters;

    let (flow, trace) = match &rule {
        Rule::Static(lambda) => flow_pyramid_static(&i0, &i1, *lambda, &scfg, &pcfg)?,
        Rule::Adaptive(cfg) => flow_pyramid(&i0, &i1, cfg, &scfg, &pcfg)?,
    };
    imgio::write_flo(&args.output, &flow)?;
    if let Some(path) = &args.color {
        imgio::flow_to_color(&flow, None).save_png(path)?;
    }
    if let Some(path) = &args.trace {
        write_trace(path, &trace)?;
    }
    if let Some(gt_path) = &args.gt_flo {
        let gt = imgio::read_flo(gt_path)?;
        println!("ae={} ee={}", angular_error(&flow, &gt), endpoint_error(&flow, &gt));
    }
    Ok(())
}

pub fn run_synth(args: &SynthArgs) -> Result<(), CliError> {
    fs::create_dir_all(&args.out_dir)?;
    let dir = &args.out_dir;
    match args.kind.as_str() {
        "phantom" => {
            let shape = if args.shape == "blob" {
                PhantomShape::Blob
            } else {
                PhantomShape::Disk
            };
            let scene = make_two_level_phantom(args.width, args.height, args.lo, args.hi, shape)?;
            let noisy = apply_noise(&scene.clean, args);
            imgio::write_image(dir.join("clean.pgm"), &scene.clean)?;
            imgio::write_image(dir.join("noisy.pgm"), &noisy)?;
            let mask = scene.truth_mask.expect("phantom has a mask");
            imgio::write_image(dir.join("truth_mask.pgm"), &mask_to_image(&mask))?;
        }
        "biased-noise" => {
            let base = match &args.input {
                Some(path) => imgio::read_image(path)?,
                None => make_smooth_texture(args.width, args.height, args.seed),
            };
            let noisy = apply_noise(&base, args);
            imgio::write_image(dir.join("clean.pgm"), &base)?;
            imgio::write_image(dir.join("noisy.pgm"), &noisy)?;
        }
        "translation" => {
            let base = make_smooth_texture(args.width, args.height, args.seed);
            let scene = make_translation_pair(&base, [args.tx, args.ty]);
            imgio::write_image(dir.join("frame0.pgm"), &scene.clean)?;
            imgio::write_image(dir.join("frame1.pgm"), &scene.noisy)?;
            imgio::write_flo(dir.join("truth.flo"), &scene.truth_flow.expect("flow set"))?;
        }
        "two-motion" => {
            let scene = make_two_motion_pair(
                args.width,
                args.height,
                [args.tx, args.ty],
                [args.tx2, args.ty2],
                args.seed,
            );
            imgio::write_image(dir.join("frame0.pgm"), &scene.clean)?;
            imgio::write_image(dir.join("frame1.pgm"), &scene.noisy)?;
            imgio::write_flo(dir.join("truth.flo"), &scene.truth_flow.expect("flow set"))?;
        }
        other => return Err(CliError::Args(format!("unknown synth kind {other}"))),
    }
    Ok(())
}

fn apply_noise(clean: &ScalarField, args: &SynthArgs) -> ScalarField {
    if args.sigma_max > 0.0 {
        let profile = if args.profile == "radial" {
            BiasProfile::RadialRamp
        } else {
            BiasProfile::HalfPlaneRamp
        };
        add_biased_noise(
            clean,
            &BiasedNoiseSpec {
                sigma_max: args.sigma_max,
                bias_profile: profile,
                rng_seed: args.seed,
            },
        )
    } else if args.sigma > 0.0 {
        add_gaussian_noise(clean, args.sigma, args.seed)
    } else {
        clean.clone()
    }
}
