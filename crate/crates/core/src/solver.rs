//! Shared solver configuration and the weight-update rule.

use crate::adaptive::{self, AdaptiveWeightConfig, WeightMode};
use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Common ADMM parameters.
///
/// `tau` is the proximal linearization weight; it must dominate
/// `mu * ||grad||^2` (8 on a 2-D grid) for the linearized updates to be
/// stable, hence the defaults `mu = 1`, `tau = 8`.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub mu: f64,
    pub tau: f64,
    pub max_iters: usize,
    /// Stop when `||u_next - u|| / ||u||` falls below this.
    pub tol_rel_change: f64,
    /// Iterations between adaptive weight refreshes.
    pub lambda_update_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu: 1.0,
            tau: 8.0,
            max_iters: 300,
            tol_rel_change: 1e-5,
            lambda_update_every: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidConfig(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        if !(self.tol_rel_change >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol_rel_change must be nonnegative, got {}",
                self.tol_rel_change
            )));
        }
        if self.lambda_update_every == 0 {
            return Err(Error::InvalidConfig(
                "lambda_update_every must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How a solver obtains its weight field: frozen constant or recomputed from
/// the running residual.
#[derive(Debug, Clone, Copy)]
pub(crate) enum WeightRule<'a> {
    Static(f64),
    Adaptive(&'a AdaptiveWeightConfig),
}

impl<'a> WeightRule<'a> {
    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            WeightRule::Static(lambda0) => {
                if !(*lambda0 > 0.0 && *lambda0 < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "static lambda must lie in (0, 1), got {lambda0}"
                    )));
                }
                Ok(())
            }
            WeightRule::Adaptive(cfg) => cfg.validate(),
        }
    }

    pub(crate) fn is_adaptive(&self) -> bool {
        matches!(self, WeightRule::Adaptive(_))
    }

    /// Weight field for a given residual (constant field in static mode).
    pub(crate) fn lambda(&self, rho: &ScalarField) -> Result<ScalarField> {
        match self {
            WeightRule::Static(lambda0) => {
                Ok(ScalarField::filled(rho.width(), rho.height(), *lambda0))
            }
            WeightRule::Adaptive(cfg) => adaptive::compute_lambda(rho, cfg),
        }
    }

    /// A-priori floor for the current residual (smoothed adaptive mode only).
    pub(crate) fn floor(&self, rho: &ScalarField) -> Option<f64> {
        match self {
            WeightRule::Adaptive(cfg) if cfg.mode == WeightMode::Smoothed => {
                adaptive::lambda_lower_bound(rho, cfg).ok()
            }
            _ => None,
        }
    }
}

/// Relative change `||next - prev|| / ||prev||`, absolute when `prev` is zero.
pub(crate) fn relative_change(next: &ScalarField, prev: &ScalarField) -> f64 {
    let mut diff = 0.0;
    let mut base = 0.0;
    for i in 0..prev.len() {
        let d = next.data()[i] - prev.data()[i];
        diff += d * d;
        base += prev.data()[i] * prev.data()[i];
    }
    if base > 0.0 {
        (diff / base).sqrt()
    } else {
        diff.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_common_parameters() {
        let cfg = SolverConfig::default();
        assert_eq!(cfg.mu, 1.0);
        assert_eq!(cfg.tau, 8.0);
        assert_eq!(cfg.lambda_update_every, 1);
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = SolverConfig::default();
        cfg.mu = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig::default();
        cfg.tau = -8.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig::default();
        cfg.max_iters = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig::default();
        cfg.lambda_update_every = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn static_rule_bounds() {
        assert!(WeightRule::Static(0.5).validate().is_ok());
        assert!(WeightRule::Static(0.0).validate().is_err());
        assert!(WeightRule::Static(1.0).validate().is_err());
        assert!(WeightRule::Static(-0.1).validate().is_err());
    }
}
