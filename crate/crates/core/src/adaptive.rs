//! Residual-driven adaptive regularization weight.
//!
//! Given a nonnegative per-pixel data-fidelity residual `rho`, the weight is
//!
//! * plain:    `lambda = exp(-rho / beta)`, range (0, 1]
//! * smoothed: `lambda = (1 - epsilon) * exp(-(G * rho) / beta)`,
//!   range (0, 1 - epsilon], with `G` a small Gaussian kernel
//!
//! Higher residual means lower weight on the data term and therefore more
//! regularization at that pixel. The smoothed form keeps a minimal amount of
//! regularization everywhere (`epsilon > 0`) and decouples the weight from
//! single-pixel residual spikes. Solvers recompute the weight from the
//! current iterate, making the solve a fixed-point iteration in `lambda`.

use crate::error::{Error, Result};
use crate::field::{GaussianKernel, ScalarField};
use crate::ops::convolve_gaussian;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// `lambda = exp(-rho / beta)`.
    Plain,
    /// `lambda = (1 - epsilon) * exp(-(G * rho) / beta)`.
    Smoothed,
}

#[derive(Debug, Clone)]
pub struct AdaptiveWeightConfig {
    /// Residual scale; larger values keep lambda closer to its maximum.
    pub beta: f64,
    /// Minimal-regularization floor in [0, 1); only used in smoothed mode.
    pub epsilon: f64,
    /// Smoothing kernel; present exactly in smoothed mode.
    pub kernel: Option<GaussianKernel>,
    pub mode: WeightMode,
}

impl AdaptiveWeightConfig {
    pub fn plain(beta: f64) -> Result<Self> {
        let cfg = Self {
            beta,
            epsilon: 0.0,
            kernel: None,
            mode: WeightMode::Plain,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn smoothed(beta: f64, epsilon: f64, kernel: GaussianKernel) -> Result<Self> {
        let cfg = Self {
            beta,
            epsilon,
            kernel: Some(kernel),
            mode: WeightMode::Smoothed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in [0, 1), got {}",
                self.epsilon
            )));
        }
        match self.mode {
            WeightMode::Plain => {
                if self.kernel.is_some() {
                    return Err(Error::InvalidConfig(
                        "plain mode must not carry a kernel".into(),
                    ));
                }
                if self.epsilon != 0.0 {
                    return Err(Error::InvalidConfig(
                        "plain mode has no epsilon floor".into(),
                    ));
                }
            }
            WeightMode::Smoothed => {
                if self.kernel.is_none() {
                    return Err(Error::InvalidConfig("smoothed mode requires a kernel".into()));
                }
            }
        }
        Ok(())
    }
}

/// Summary statistics of a weight field (population standard deviation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightStats {
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

fn check_nonnegative(rho: &ScalarField) -> Result<()> {
    if let Some(i) = rho.data().iter().position(|&v| v < 0.0) {
        return Err(Error::NegativeResidual {
            index: i,
            value: rho.data()[i],
        });
    }
    Ok(())
}

/// Evaluates the weight field from a nonnegative residual field.
pub fn compute_lambda(rho: &ScalarField, cfg: &AdaptiveWeightConfig) -> Result<ScalarField> {
    cfg.validate()?;
    check_nonnegative(rho)?;
    match cfg.mode {
        WeightMode::Plain => Ok(rho.map(|r| (-r / cfg.beta).exp())),
        WeightMode::Smoothed => {
            let smoothed = convolve_gaussian(rho, cfg.kernel.as_ref().unwrap());
            let scale = 1.0 - cfg.epsilon;
            Ok(smoothed.map(|r| scale * (-r / cfg.beta).exp()))
        }
    }
}

/// A-priori positive floor on the smoothed weight:
/// `(1 - epsilon) * exp(-||G||_inf * ||rho||_1 / beta)`.
///
/// Since the convolution satisfies `G * rho <= ||G||_inf * ||rho||_1` at
/// every pixel, the returned value never exceeds the pixelwise minimum of
/// [`compute_lambda`]. The kernel sup is taken clamp-aware (replicate
/// padding folds boundary mass onto border pixels), which keeps the
/// inequality valid for impulses near corners as well.
pub fn lambda_lower_bound(rho: &ScalarField, cfg: &AdaptiveWeightConfig) -> Result<f64> {
    cfg.validate()?;
    check_nonnegative(rho)?;
    let kernel = match cfg.mode {
        WeightMode::Smoothed => cfg.kernel.as_ref().unwrap(),
        WeightMode::Plain => return Err(Error::UnsupportedMode { required: "smoothed" }),
    };
    let sup = kernel.replicate_sup_2d();
    Ok((1.0 - cfg.epsilon) * (-sup * rho.norm_l1() / cfg.beta).exp())
}

/// Negative-entropy penalty `sum(lambda ln lambda - lambda + 1)`.
///
/// Zero exactly when `lambda` is identically one; grows as the weight field
/// departs from the constant-one configuration. Uses the `0 ln 0 = 0`
/// convention at the lower boundary.
pub fn entropy_penalty(lambda: &ScalarField) -> Result<f64> {
    const SLACK: f64 = 1e-12;
    for (i, &v) in lambda.data().iter().enumerate() {
        if v < -SLACK || v > 1.0 + SLACK {
            return Err(Error::InvalidWeight { index: i, value: v });
        }
    }
    let mut acc = 0.0;
    for &v in lambda.data() {
        if v > 0.0 {
            acc += v * v.ln() - v + 1.0;
        } else {
            acc += 1.0;
        }
    }
    Ok(acc.max(0.0))
}

/// Mean / population standard deviation / min / max of a weight field.
pub fn weight_stats(lambda: &ScalarField) -> WeightStats {
    let n = lambda.len() as f64;
    let mean = lambda.mean();
    let var = lambda
        .data()
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    WeightStats {
        mean,
        std_dev: var.max(0.0).sqrt(),
        min: lambda.min(),
        max: lambda.max(),
    }
}
