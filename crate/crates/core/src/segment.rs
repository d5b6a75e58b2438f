//! Two-phase piecewise-constant segmentation via a convex relaxation.
//!
//! The relaxed indicator `u` in [0, 1] minimizes
//! `sum lambda q u + (1 - lambda) ||grad u||_1` with
//! `q = (f - c1)^2 - (f - c2)^2`, alternating with the closed-form region
//! means `c1 = <f, u> / <1, u>`, `c2 = <f, 1-u> / <1, 1-u>`. The u-update is
//! a projected linearized step; `z` is the gradient split with componentwise
//! shrinkage. The adaptive weight is driven by the region misfit
//! `rho = (f - c1)^2 u + (f - c2)^2 (1 - u)`. Thresholding `u` at `theta`
//! yields the final mask.

use crate::adaptive::{weight_stats, AdaptiveWeightConfig};
use crate::error::{Error, Result};
use crate::field::{BinaryField, ScalarField, VectorField2};
use crate::ops::{divergence, gradient, soft_shrink};
use crate::solver::{relative_change, SolverConfig, WeightRule};
use crate::trace::{ConvergenceTrace, TraceRecord};

/// Splitting variables of one segmentation solve.
#[derive(Debug, Clone)]
pub struct SegmentState {
    pub u: ScalarField,
    pub z: VectorField2,
    pub y: VectorField2,
    pub lambda: ScalarField,
    pub c1: f64,
    pub c2: f64,
    pub iter: usize,
}

#[derive(Debug, Clone)]
pub struct SegmentResult {
    /// `mask(x) = 1` iff `u(x) > theta`.
    pub mask: BinaryField,
    pub u: ScalarField,
    pub c1: f64,
    pub c2: f64,
    pub trace: ConvergenceTrace,
}

/// Closed-form optimal region means for a fixed relaxed indicator.
pub fn estimate_means(f: &ScalarField, u: &ScalarField) -> Result<(f64, f64)> {
    f.check_dims(u)?;
    let n = u.len() as f64;
    let su = u.sum();
    let s1u = n - su;
    if su <= 1e-9 * n {
        return Err(Error::DegenerateRegion("interior weight is (near) zero".into()));
    }
    if s1u <= 1e-9 * n {
        return Err(Error::DegenerateRegion("exterior weight is (near) zero".into()));
    }
    let mut fu = 0.0;
    for i in 0..u.len() {
        fu += f.data()[i] * u.data()[i];
    }
    let c1 = fu / su;
    let c2 = (f.sum() - fu) / s1u;
    Ok((c1, c2))
}

/// Relaxed objective `sum lambda q u + (1 - lambda) ||grad u||_1` for fixed
/// means (the data term drops the u-independent constant).
pub fn segment_energy(
    u: &ScalarField,
    f: &ScalarField,
    lambda: &ScalarField,
    c1: f64,
    c2: f64,
) -> f64 {
    debug_assert!(u.same_dims(f) && u.same_dims(lambda));
    let g = gradient(u);
    let mut acc = 0.0;
    for i in 0..u.len() {
        let fv = f.data()[i];
        let q = (fv - c1) * (fv - c1) - (fv - c2) * (fv - c2);
        let lam = lambda.data()[i];
        acc += lam * q * u.data()[i] + (1.0 - lam) * (g.xs()[i].abs() + g.ys()[i].abs());
    }
    acc
}

/// Harmonic mean of precision and recall of `mask` against `truth`; zero
/// when precision and recall are both undefined or zero.
pub fn f_measure(mask: &BinaryField, truth: &BinaryField) -> f64 {
    assert!(mask.same_dims(truth), "f_measure: shape mismatch");
    let (mut tp, mut fp, mut fne) = (0u64, 0u64, 0u64);
    for i in 0..mask.data().len() {
        match (mask.data()[i], truth.data()[i]) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fne > 0 {
        tp as f64 / (tp + fne) as f64
    } else {
        0.0
    };
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Segments with the adaptive weight driven by the region misfit.
pub fn segment(
    f: &ScalarField,
    wcfg: &AdaptiveWeightConfig,
    scfg: &SolverConfig,
    theta: f64,
) -> Result<SegmentResult> {
    run(f, WeightRule::Adaptive(wcfg), MeanRule::Update, scfg, theta)
}

/// Segments with a frozen constant weight `lambda0` in (0, 1).
pub fn segment_static(
    f: &ScalarField,
    lambda0: f64,
    scfg: &SolverConfig,
    theta: f64,
) -> Result<SegmentResult> {
    run(f, WeightRule::Static(lambda0), MeanRule::Update, scfg, theta)
}

/// Frozen weight and frozen region means: plain ADMM on a fixed convex
/// objective, useful for checking energy descent.
pub fn segment_fixed_model(
    f: &ScalarField,
    lambda0: f64,
    c1: f64,
    c2: f64,
    scfg: &SolverConfig,
    theta: f64,
) -> Result<SegmentResult> {
    run(
        f,
        WeightRule::Static(lambda0),
        MeanRule::Fixed(c1, c2),
        scfg,
        theta,
    )
}

#[derive(Debug, Clone, Copy)]
enum MeanRule {
    Update,
    Fixed(f64, f64),
}

fn region_misfit(f: &ScalarField, u: &ScalarField, c1: f64, c2: f64) -> ScalarField {
    let mut rho = u.clone();
    for i in 0..rho.len() {
        let fv = f.data()[i];
        let uv = u.data()[i];
        rho.data_mut()[i] = (fv - c1) * (fv - c1) * uv + (fv - c2) * (fv - c2) * (1.0 - uv);
    }
    rho
}

fn run(
    f: &ScalarField,
    rule: WeightRule,
    means: MeanRule,
    scfg: &SolverConfig,
    theta: f64,
) -> Result<SegmentResult> {
    scfg.validate()?;
    rule.validate()?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "theta must lie in (0, 1), got {theta}"
        )));
    }
    let (w, h) = (f.width(), f.height());
    let (mu, tau) = (scfg.mu, scfg.tau);

    // relaxed indicator starts as the input normalized to [0, 1]
    let (fmin, fmax) = (f.min(), f.max());
    if fmax - fmin < 1e-12 {
        return Err(Error::DegenerateRegion(
            "constant input: both region means coincide".into(),
        ));
    }
    let u0 = f.map(|v| (v - fmin) / (fmax - fmin));

    let (c1_init, c2_init) = match means {
        MeanRule::Fixed(c1, c2) => (c1, c2),
        MeanRule::Update => estimate_means(f, &u0)?,
    };

    let rho0 = region_misfit(f, &u0, c1_init, c2_init);
    let mut st = SegmentState {
        z: gradient(&u0),
        y: VectorField2::zeros(w, h),
        lambda: rule.lambda(&rho0)?,
        u: u0,
        c1: c1_init,
        c2: c2_init,
        iter: 0,
    };
    let mut lambda_floor = rule.floor(&rho0);
    let mut trace = ConvergenceTrace::new();

    // stop only after two consecutive below-tolerance iterations: the
    // projected u-step can be stationary while the splits still move
    let mut below_tol = 0usize;

    for k in 0..scfg.max_iters {
        if let MeanRule::Update = means {
            match estimate_means(f, &st.u) {
                Ok((c1, c2)) => {
                    st.c1 = c1;
                    st.c2 = c2;
                }
                // mid-solve collapse: keep previous means rather than abort
                Err(Error::DegenerateRegion(msg)) => {
                    trace.warn(format!("iteration {}: {msg}; keeping previous means", k + 1));
                }
                Err(e) => return Err(e),
            }
        }

        // projected linearized u-update
        let gu = gradient(&st.u);
        let mut v = gu.clone();
        for i in 0..v.len() {
            v.xs_mut()[i] += st.y.xs()[i] - st.z.xs()[i];
            v.ys_mut()[i] += st.y.ys()[i] - st.z.ys()[i];
        }
        let div_v = divergence(&v);
        let mut u_next = st.u.clone();
        for i in 0..u_next.len() {
            let fv = f.data()[i];
            let q = (fv - st.c1) * (fv - st.c1) - (fv - st.c2) * (fv - st.c2);
            let step = st.u.data()[i] - st.lambda.data()[i] / tau * q
                + mu / tau * div_v.data()[i];
            u_next.data_mut()[i] = step.clamp(0.0, 1.0);
        }

        // z-update with pixelwise threshold
        let gu_next = gradient(&u_next);
        let mut z_next = gu_next.clone();
        let mut dual_sq = 0.0;
        for i in 0..z_next.len() {
            let t = (1.0 - st.lambda.data()[i]) / mu;
            let zx = soft_shrink(gu_next.xs()[i] + st.y.xs()[i], t);
            let zy = soft_shrink(gu_next.ys()[i] + st.y.ys()[i], t);
            let dx = zx - st.z.xs()[i];
            let dy = zy - st.z.ys()[i];
            dual_sq += dx * dx + dy * dy;
            z_next.xs_mut()[i] = zx;
            z_next.ys_mut()[i] = zy;
        }

        // multiplier ascent
        let mut primal_sq = 0.0;
        for i in 0..st.y.len() {
            let rx = gu_next.xs()[i] - z_next.xs()[i];
            let ry = gu_next.ys()[i] - z_next.ys()[i];
            primal_sq += rx * rx + ry * ry;
            st.y.xs_mut()[i] += rx;
            st.y.ys_mut()[i] += ry;
        }

        if !u_next.is_finite() {
            return Err(Error::Divergence { iter: k + 1 });
        }

        let change = relative_change(&u_next, &st.u);
        st.u = u_next;
        st.z = z_next;
        st.iter = k + 1;

        if rule.is_adaptive() && st.iter % scfg.lambda_update_every == 0 {
            let rho = region_misfit(f, &st.u, st.c1, st.c2);
            st.lambda = rule.lambda(&rho)?;
            lambda_floor = rule.floor(&rho);
        }

        trace.push(TraceRecord {
            iter: st.iter,
            energy: segment_energy(&st.u, f, &st.lambda, st.c1, st.c2),
            primal_res: primal_sq.sqrt(),
            dual_res: mu * dual_sq.sqrt(),
            lambda: weight_stats(&st.lambda),
            lambda_floor,
        });

        below_tol = if change < scfg.tol_rel_change {
            below_tol + 1
        } else {
            0
        };
        if below_tol >= 2 {
            break;
        }
    }

    let theta_copy = theta;
    let mask = BinaryField::from_fn(w, h, |x, y| st.u.at(x, y) > theta_copy);
    Ok(SegmentResult {
        mask,
        u: st.u,
        c1: st.c1,
        c2: st.c2,
        trace,
    })
}
