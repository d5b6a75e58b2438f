//! TV-L1 optical flow with a three-way splitting ADMM and a coarse-to-fine
//! pyramid with warping.
//!
//! At each pyramid level the brightness-constancy term is linearized about
//! the incoming flow `v0`: `res(w) = It + Ix (u - u0) + Iy (v - v0)`. The
//! splits are `y = grad u`, `z = grad v` (multipliers `p`, `q`) and
//! `s = res(w)` (multiplier `r`). One cycle runs
//!
//! * joint (u, v) update: the two linearized proximal steps share the data
//!   coupling through `grad I . w`, so their stationarity conditions are
//!   solved together as one closed-form 2x2 system per pixel;
//! * `y = shrink2(grad u + p | (1-lambda)/mu)`, `z` likewise for `v`
//!   (isotropic shrinkage, matching the per-component L2 regularizer);
//! * `s = shrink(res + r | lambda/mu)` (the data split carries `lambda`);
//! * multiplier ascent and the weight refresh `lambda = exp(-|res| / beta)`.

use crate::adaptive::{weight_stats, AdaptiveWeightConfig};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField2};
use crate::ops::{
    convolve_gaussian, divergence, gradient, resize_bilinear, sample_bilinear, shrink_vector2,
    soft_shrink,
};
use crate::solver::{SolverConfig, WeightRule};
use crate::trace::{ConvergenceTrace, TraceRecord};
use crate::GaussianKernel;

/// Smallest admissible side length of a pyramid level.
pub const MIN_LEVEL_SIDE: usize = 8;

/// Middlebury convention: ground-truth values above this magnitude mark
/// unknown flow and are excluded from error averages.
pub const UNKNOWN_FLOW_THRESHOLD: f64 = 1e9;

#[derive(Debug, Clone, Copy)]
pub struct PyramidConfig {
    pub levels: usize,
    /// Downsampling factor per level, in (0, 1).
    pub scale: f64,
    pub warps_per_level: usize,
    /// ADMM cycles per warp.
    pub inner_iters: usize,
}

impl PyramidConfig {
    /// Default pyramid for an image: scale 0.5 down to a coarsest side of
    /// roughly 16 pixels, 3 warps and 50 inner cycles per level.
    pub fn for_dims(width: usize, height: usize) -> Self {
        let min_side = width.min(height).max(1) as f64;
        let levels = ((min_side / 16.0).log2().floor() as i64 + 1).max(1) as usize;
        Self {
            levels,
            scale: 0.5,
            warps_per_level: 3,
            inner_iters: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::InvalidConfig("levels must be positive".into()));
        }
        if !(self.scale > 0.0 && self.scale < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "scale must lie in (0, 1), got {}",
                self.scale
            )));
        }
        if self.warps_per_level == 0 {
            return Err(Error::InvalidConfig("warps_per_level must be positive".into()));
        }
        if self.inner_iters == 0 {
            return Err(Error::InvalidConfig("inner_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Brightness constancy linearized about `v0`.
#[derive(Debug, Clone)]
pub struct LinearizedData {
    /// Temporal difference after warping: `warp(I1, v0) - I0`.
    pub it: ScalarField,
    /// Spatial derivatives of the warped second frame.
    pub ix: ScalarField,
    pub iy: ScalarField,
    /// Linearization point.
    pub v0: VectorField2,
}

impl LinearizedData {
    /// Evaluates `It + Ix (u - u0) + Iy (v - v0)` pixelwise.
    pub fn residual(&self, w: &VectorField2) -> ScalarField {
        assert!(
            w.width() == self.it.width() && w.height() == self.it.height(),
            "residual: shape mismatch"
        );
        let mut out = self.it.clone();
        for i in 0..out.len() {
            out.data_mut()[i] += self.ix.data()[i] * (w.xs()[i] - self.v0.xs()[i])
                + self.iy.data()[i] * (w.ys()[i] - self.v0.ys()[i]);
        }
        out
    }
}

/// Splitting variables of one per-level solve.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub u: ScalarField,
    pub v: ScalarField,
    /// Split of `grad u` and its multiplier `p`.
    pub y: VectorField2,
    pub p: VectorField2,
    /// Split of `grad v` and its multiplier `q`.
    pub z: VectorField2,
    pub q: VectorField2,
    /// Split of the linearized residual and its multiplier `r`.
    pub s: ScalarField,
    pub r: ScalarField,
    pub lambda: ScalarField,
}

/// Samples `img` at `x + flow(x)` with bilinear interpolation, clamping
/// out-of-bounds coordinates to the border.
pub fn warp_bilinear(img: &ScalarField, flow: &VectorField2) -> ScalarField {
    assert!(
        img.width() == flow.width() && img.height() == flow.height(),
        "warp: shape mismatch"
    );
    ScalarField::from_fn(img.width(), img.height(), |x, y| {
        let [dx, dy] = flow.at(x, y);
        sample_bilinear(img, x as f64 + dx, y as f64 + dy)
    })
}

/// Warps `i1` by `v0` and linearizes brightness constancy there. Spatial
/// derivatives are central differences (replicate borders) of the warped
/// frame.
pub fn linearize(i0: &ScalarField, i1: &ScalarField, v0: &VectorField2) -> LinearizedData {
    assert!(i0.same_dims(i1), "linearize: shape mismatch");
    let warped = warp_bilinear(i1, v0);
    let (w, h) = (i0.width(), i0.height());
    let mut it = warped.clone();
    for i in 0..it.len() {
        it.data_mut()[i] -= i0.data()[i];
    }
    let ix = ScalarField::from_fn(w, h, |x, y| {
        let xp = (x + 1).min(w - 1);
        let xm = x.saturating_sub(1);
        (warped.at(xp, y) - warped.at(xm, y)) / 2.0
    });
    let iy = ScalarField::from_fn(w, h, |x, y| {
        let yp = (y + 1).min(h - 1);
        let ym = y.saturating_sub(1);
        (warped.at(x, yp) - warped.at(x, ym)) / 2.0
    });
    LinearizedData {
        it,
        ix,
        iy,
        v0: v0.clone(),
    }
}

fn init_state(data: &LinearizedData, rule: WeightRule) -> Result<FlowState> {
    let (w, h) = (data.it.width(), data.it.height());
    let u = ScalarField::new(w, h, data.v0.xs().to_vec())?;
    let v = ScalarField::new(w, h, data.v0.ys().to_vec())?;
    let wfield = VectorField2::from_components(u.clone(), v.clone())?;
    let res = data.residual(&wfield);
    let rho = res.map(f64::abs);
    Ok(FlowState {
        y: gradient(&u),
        z: gradient(&v),
        p: VectorField2::zeros(w, h),
        q: VectorField2::zeros(w, h),
        s: res,
        r: ScalarField::zeros(w, h),
        lambda: rule.lambda(&rho)?,
        u,
        v,
    })
}

/// Runs `scfg.max_iters` ADMM cycles on one linearization with the adaptive
/// weight refreshed from the running residual.
pub fn flow_level(
    data: &LinearizedData,
    wcfg: &AdaptiveWeightConfig,
    scfg: &SolverConfig,
    mut state: FlowState,
) -> Result<FlowState> {
    let rule = WeightRule::Adaptive(wcfg);
    rule.validate()?;
    scfg.validate()?;
    let mut trace = ConvergenceTrace::new();
    level_cycles(data, rule, scfg, &mut state, &mut trace, 0)?;
    Ok(state)
}

fn level_cycles(
    data: &LinearizedData,
    rule: WeightRule,
    scfg: &SolverConfig,
    st: &mut FlowState,
    trace: &mut ConvergenceTrace,
    iter_offset: usize,
) -> Result<usize> {
    let (w, h) = (data.it.width(), data.it.height());
    assert!(
        st.u.width() == w && st.u.height() == h,
        "flow state does not match the linearized data"
    );
    let (mu, tau) = (scfg.mu, scfg.tau);
    let n = w * h;

    // constant part of the residual: res = b + Ix u + Iy v
    let mut b = vec![0.0f64; n];
    for i in 0..n {
        b[i] = data.it.data()[i]
            - data.ix.data()[i] * data.v0.xs()[i]
            - data.iy.data()[i] * data.v0.ys()[i];
    }

    let mut iters_done = 0;
    // as in the other solvers, the first (u, v) step is stationary because
    // the data split starts at the exact residual; require two consecutive
    // below-tolerance iterations before stopping
    let mut below_tol = 0usize;
    for k in 0..scfg.max_iters {
        // joint (u, v) update: 2x2 system per pixel
        let gu = gradient(&st.u);
        let gv = gradient(&st.v);
        let mut vu = gu.clone();
        let mut vv = gv.clone();
        for i in 0..n {
            vu.xs_mut()[i] += st.p.xs()[i] - st.y.xs()[i];
            vu.ys_mut()[i] += st.p.ys()[i] - st.y.ys()[i];
            vv.xs_mut()[i] += st.q.xs()[i] - st.z.xs()[i];
            vv.ys_mut()[i] += st.q.ys()[i] - st.z.ys()[i];
        }
        let div_u = divergence(&vu);
        let div_v = divergence(&vv);

        let mut u_next = st.u.clone();
        let mut v_next = st.v.clone();
        for i in 0..n {
            let ix = data.ix.data()[i];
            let iy = data.iy.data()[i];
            let c = b[i] + st.r.data()[i] - st.s.data()[i];
            let rhs_u = tau * st.u.data()[i] + mu * div_u.data()[i] - mu * ix * c;
            let rhs_v = tau * st.v.data()[i] + mu * div_v.data()[i] - mu * iy * c;
            let a11 = mu * ix * ix + tau;
            let a22 = mu * iy * iy + tau;
            let a12 = mu * ix * iy;
            let det = a11 * a22 - a12 * a12;
            u_next.data_mut()[i] = (a22 * rhs_u - a12 * rhs_v) / det;
            v_next.data_mut()[i] = (a11 * rhs_v - a12 * rhs_u) / det;
        }

        if !u_next.is_finite() || !v_next.is_finite() {
            return Err(Error::Divergence {
                iter: iter_offset + k + 1,
            });
        }

        // gradient splits: isotropic shrinkage with threshold (1-lambda)/mu
        let gu_next = gradient(&u_next);
        let gv_next = gradient(&v_next);
        let mut dual_sq = 0.0;
        let mut y_next = gu_next.clone();
        let mut z_next = gv_next.clone();
        for i in 0..n {
            let t = (1.0 - st.lambda.data()[i]) / mu;
            let ny = shrink_vector2(
                [gu_next.xs()[i] + st.p.xs()[i], gu_next.ys()[i] + st.p.ys()[i]],
                t,
            );
            let nz = shrink_vector2(
                [gv_next.xs()[i] + st.q.xs()[i], gv_next.ys()[i] + st.q.ys()[i]],
                t,
            );
            dual_sq += (ny[0] - st.y.xs()[i]).powi(2)
                + (ny[1] - st.y.ys()[i]).powi(2)
                + (nz[0] - st.z.xs()[i]).powi(2)
                + (nz[1] - st.z.ys()[i]).powi(2);
            y_next.xs_mut()[i] = ny[0];
            y_next.ys_mut()[i] = ny[1];
            z_next.xs_mut()[i] = nz[0];
            z_next.ys_mut()[i] = nz[1];
        }

        // data split: scalar shrinkage with threshold lambda/mu
        let mut res = ScalarField::zeros(w, h);
        for i in 0..n {
            res.data_mut()[i] = b[i]
                + data.ix.data()[i] * u_next.data()[i]
                + data.iy.data()[i] * v_next.data()[i];
        }
        let mut s_next = res.clone();
        for i in 0..n {
            let sv = soft_shrink(res.data()[i] + st.r.data()[i], st.lambda.data()[i] / mu);
            dual_sq += (sv - st.s.data()[i]).powi(2);
            s_next.data_mut()[i] = sv;
        }

        // multiplier ascent
        let mut primal_sq = 0.0;
        for i in 0..n {
            let rx = gu_next.xs()[i] - y_next.xs()[i];
            let ry = gu_next.ys()[i] - y_next.ys()[i];
            let zx = gv_next.xs()[i] - z_next.xs()[i];
            let zy = gv_next.ys()[i] - z_next.ys()[i];
            let rs = res.data()[i] - s_next.data()[i];
            primal_sq += rx * rx + ry * ry + zx * zx + zy * zy + rs * rs;
            st.p.xs_mut()[i] += rx;
            st.p.ys_mut()[i] += ry;
            st.q.xs_mut()[i] += zx;
            st.q.ys_mut()[i] += zy;
            st.r.data_mut()[i] += rs;
        }

        // relative change over both components
        let mut diff = 0.0;
        let mut base = 0.0;
        for i in 0..n {
            let du = u_next.data()[i] - st.u.data()[i];
            let dv = v_next.data()[i] - st.v.data()[i];
            diff += du * du + dv * dv;
            base += st.u.data()[i] * st.u.data()[i] + st.v.data()[i] * st.v.data()[i];
        }
        let change = if base > 0.0 {
            (diff / base).sqrt()
        } else {
            diff.sqrt()
        };

        st.u = u_next;
        st.v = v_next;
        st.y = y_next;
        st.z = z_next;
        st.s = s_next;
        iters_done = k + 1;

        let mut lambda_floor = None;
        if rule.is_adaptive() && (k + 1) % scfg.lambda_update_every == 0 {
            let rho = res.map(f64::abs);
            st.lambda = rule.lambda(&rho)?;
            lambda_floor = rule.floor(&rho);
        }

        // objective: sum lambda |res| + (1 - lambda)(|grad u|_2 + |grad v|_2)
        let mut energy = 0.0;
        for i in 0..n {
            let lam = st.lambda.data()[i];
            let tu = (gu_next.xs()[i].powi(2) + gu_next.ys()[i].powi(2)).sqrt();
            let tv = (gv_next.xs()[i].powi(2) + gv_next.ys()[i].powi(2)).sqrt();
            energy += lam * res.data()[i].abs() + (1.0 - lam) * (tu + tv);
        }

        trace.push(TraceRecord {
            iter: iter_offset + k + 1,
            energy,
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
    Ok(iters_done)
}

/// Coarse-to-fine flow with the adaptive weight.
pub fn flow_pyramid(
    i0: &ScalarField,
    i1: &ScalarField,
    wcfg: &AdaptiveWeightConfig,
    scfg: &SolverConfig,
    pcfg: &PyramidConfig,
) -> Result<(VectorField2, ConvergenceTrace)> {
    run_pyramid(i0, i1, WeightRule::Adaptive(wcfg), scfg, pcfg)
}

/// Coarse-to-fine flow with a frozen constant weight `lambda0` in (0, 1).
pub fn flow_pyramid_static(
    i0: &ScalarField,
    i1: &ScalarField,
    lambda0: f64,
    scfg: &SolverConfig,
    pcfg: &PyramidConfig,
) -> Result<(VectorField2, ConvergenceTrace)> {
    run_pyramid(i0, i1, WeightRule::Static(lambda0), scfg, pcfg)
}

fn run_pyramid(
    i0: &ScalarField,
    i1: &ScalarField,
    rule: WeightRule,
    scfg: &SolverConfig,
    pcfg: &PyramidConfig,
) -> Result<(VectorField2, ConvergenceTrace)> {
    i0.check_dims(i1)?;
    rule.validate()?;
    scfg.validate()?;
    pcfg.validate()?;
    let (w, h) = (i0.width(), i0.height());
    if w < MIN_LEVEL_SIDE || h < MIN_LEVEL_SIDE {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: MIN_LEVEL_SIDE,
        });
    }

    // level dimensions, finest first; stop early rather than go below the
    // minimum side
    let mut dims = vec![(w, h)];
    for _ in 1..pcfg.levels {
        let (pw, ph) = *dims.last().unwrap();
        let nw = (pw as f64 * pcfg.scale).round() as usize;
        let nh = (ph as f64 * pcfg.scale).round() as usize;
        if nw < MIN_LEVEL_SIDE || nh < MIN_LEVEL_SIDE {
            break;
        }
        dims.push((nw, nh));
    }

    // image pyramids with pre-blur matched to the downsampling factor
    let blur_sigma = 0.8 * (1.0 / (pcfg.scale * pcfg.scale) - 1.0).sqrt();
    let mut pyr0 = vec![i0.clone()];
    let mut pyr1 = vec![i1.clone()];
    for l in 1..dims.len() {
        let (nw, nh) = dims[l];
        let down = |img: &ScalarField| -> ScalarField {
            let blurred = if blur_sigma >= 0.1 {
                convolve_gaussian(img, &GaussianKernel::new(blur_sigma).expect("valid sigma"))
            } else {
                img.clone()
            };
            resize_bilinear(&blurred, nw, nh)
        };
        pyr0.push(down(&pyr0[l - 1]));
        pyr1.push(down(&pyr1[l - 1]));
    }

    let mut trace = ConvergenceTrace::new();
    let mut iter_offset = 0;
    let coarsest = dims.len() - 1;
    let mut flow = VectorField2::zeros(dims[coarsest].0, dims[coarsest].1);

    for l in (0..dims.len()).rev() {
        let scfg_level = SolverConfig {
            max_iters: pcfg.inner_iters,
            ..*scfg
        };
        for _ in 0..pcfg.warps_per_level {
            let data = linearize(&pyr0[l], &pyr1[l], &flow);
            let mut state = init_state(&data, rule)?;
            iter_offset += level_cycles(&data, rule, &scfg_level, &mut state, &mut trace, iter_offset)?;
            flow = VectorField2::from_components(state.u, state.v)?;
        }
        if l > 0 {
            flow = upsample_flow(&flow, dims[l - 1].0, dims[l - 1].1);
        }
    }

    Ok((flow, trace))
}

/// Bilinear flow upsampling; vector values scale with the dimension ratio.
fn upsample_flow(flow: &VectorField2, new_w: usize, new_h: usize) -> VectorField2 {
    let fx = ScalarField::new(flow.width(), flow.height(), flow.xs().to_vec()).expect("finite");
    let fy = ScalarField::new(flow.width(), flow.height(), flow.ys().to_vec()).expect("finite");
    let rx = new_w as f64 / flow.width() as f64;
    let ry = new_h as f64 / flow.height() as f64;
    let up_x = resize_bilinear(&fx, new_w, new_h).map(|v| v * rx);
    let up_y = resize_bilinear(&fy, new_w, new_h).map(|v| v * ry);
    VectorField2::from_components(up_x, up_y).expect("matching dims")
}

fn known_gt(gt: &VectorField2, i: usize) -> bool {
    gt.xs()[i].abs() <= UNKNOWN_FLOW_THRESHOLD && gt.ys()[i].abs() <= UNKNOWN_FLOW_THRESHOLD
}

/// Mean Euclidean distance to the ground truth (pixels), skipping unknowns.
pub fn endpoint_error(w: &VectorField2, gt: &VectorField2) -> f64 {
    assert!(w.same_dims(gt), "endpoint_error: shape mismatch");
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..w.len() {
        if !known_gt(gt, i) {
            continue;
        }
        let dx = w.xs()[i] - gt.xs()[i];
        let dy = w.ys()[i] - gt.ys()[i];
        acc += (dx * dx + dy * dy).sqrt();
        count += 1;
    }
    if count > 0 {
        acc / count as f64
    } else {
        0.0
    }
}

/// Mean angle in degrees between the homogeneous-lifted vectors `(u, v, 1)`,
/// skipping unknowns.
pub fn angular_error(w: &VectorField2, gt: &VectorField2) -> f64 {
    assert!(w.same_dims(gt), "angular_error: shape mismatch");
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..w.len() {
        if !known_gt(gt, i) {
            continue;
        }
        let (ux, uy) = (w.xs()[i], w.ys()[i]);
        let (gx, gy) = (gt.xs()[i], gt.ys()[i]);
        let num = ux * gx + uy * gy + 1.0;
        let den = ((ux * ux + uy * uy + 1.0) * (gx * gx + gy * gy + 1.0)).sqrt();
        acc += (num / den).clamp(-1.0, 1.0).acos();
        count += 1;
    }
    if count > 0 {
        (acc / count as f64).to_degrees()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_smooth_texture, make_translation_pair};

    fn plain(beta: f64) -> AdaptiveWeightConfig {
        AdaptiveWeightConfig::plain(beta).unwrap()
    }

    #[test]
    fn warp_with_zero_flow_is_identity() {
        let img = make_smooth_texture(20, 14, 1);
        let out = warp_bilinear(&img, &VectorField2::zeros(20, 14));
        assert_eq!(out, img);
    }

    #[test]
    fn warp_integer_translation_is_exact_on_the_interior() {
        let img = make_smooth_texture(16, 16, 2);
        let out = warp_bilinear(&img, &VectorField2::filled(16, 16, [1.0, 0.0]));
        for y in 0..16 {
            for x in 0..15 {
                assert!((out.at(x, y) - img.at(x + 1, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn warp_reproduces_affine_images_at_subpixel_shifts() {
        let img = ScalarField::from_fn(12, 12, |x, y| 0.05 * x as f64 - 0.02 * y as f64 + 0.3);
        let out = warp_bilinear(&img, &VectorField2::filled(12, 12, [0.5, 0.5]));
        for y in 0..11 {
            for x in 0..11 {
                let expected = 0.05 * (x as f64 + 0.5) - 0.02 * (y as f64 + 0.5) + 0.3;
                assert!((out.at(x, y) - expected).abs() < 1e-12, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn linearize_identical_frames_has_zero_residual() {
        let img = make_smooth_texture(16, 16, 3);
        let data = linearize(&img, &img, &VectorField2::zeros(16, 16));
        assert!(data.it.data().iter().all(|&v| v.abs() < 1e-15));
        let res = data.residual(&VectorField2::zeros(16, 16));
        assert!(res.data().iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn linearize_after_perfect_warp_cancels() {
        let base = make_smooth_texture(24, 24, 4);
        let scene = make_translation_pair(&base, [1.0, 0.0]);
        let v0 = VectorField2::filled(24, 24, [1.0, 0.0]);
        let data = linearize(&scene.clean, &scene.noisy, &v0);
        for y in 2..22 {
            for x in 2..22 {
                assert!(
                    data.it.at(x, y).abs() < 1e-10,
                    "It not cancelled at ({x},{y})"
                );
            }
        }
    }

    #[test]
    fn residual_at_linearization_point_equals_it() {
        let a = make_smooth_texture(12, 10, 5);
        let b = make_smooth_texture(12, 10, 6);
        let v0 = VectorField2::filled(12, 10, [0.3, -0.2]);
        let data = linearize(&a, &b, &v0);
        let res = data.residual(&v0);
        for i in 0..res.len() {
            assert_eq!(res.data()[i], data.it.data()[i]);
        }
    }

    #[test]
    fn textureless_zero_mismatch_keeps_zero_flow() {
        let flat = ScalarField::filled(16, 16, 0.5);
        let data = linearize(&flat, &flat, &VectorField2::zeros(16, 16));
        let state = init_state(&data, WeightRule::Adaptive(&plain(1.0))).unwrap();
        let scfg = SolverConfig {
            max_iters: 30,
            ..SolverConfig::default()
        };
        let out = flow_level(&data, &plain(1.0), &scfg, state).unwrap();
        assert!(out.u.data().iter().all(|&v| v.abs() < 1e-12));
        assert!(out.v.data().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn one_dimensional_shift_is_recovered_by_a_single_level() {
        // piecewise-linear texture: the brightness linearization is exact
        // away from the sparse fold points, so a single level suffices
        let triangle = |x: f64| {
            let t = (x / 12.0).fract();
            if t < 0.5 {
                2.0 * t
            } else {
                2.0 * (1.0 - t)
            }
        };
        let base = ScalarField::from_fn(96, 1, |x, _| 0.05 + 0.9 * triangle(x as f64));
        let scene = make_translation_pair(&base, [1.0, 0.0]);
        let data = linearize(&scene.clean, &scene.noisy, &VectorField2::zeros(96, 1));
        // weight scale matched to the temporal-difference magnitude
        let wcfg = plain(0.05);
        let state = init_state(&data, WeightRule::Adaptive(&wcfg)).unwrap();
        let scfg = SolverConfig {
            max_iters: 1500,
            tol_rel_change: 0.0,
            ..SolverConfig::default()
        };
        let out = flow_level(&data, &wcfg, &scfg, state).unwrap();
        let mae: f64 = out.u.data().iter().map(|&v| (v - 1.0).abs()).sum::<f64>()
            / out.u.len() as f64;
        assert!(mae <= 0.2, "mean absolute error {mae}");
    }

    #[test]
    fn data_split_threshold_carries_lambda() {
        // no texture: u, v stay put and s sees exactly one shrinkage step
        // with threshold lambda / mu; the mismatch equals beta so the weight
        // is exp(-1)
        let (w, h) = (9, 9);
        let beta = 0.7;
        let data = LinearizedData {
            it: ScalarField::filled(w, h, beta),
            ix: ScalarField::zeros(w, h),
            iy: ScalarField::zeros(w, h),
            v0: VectorField2::zeros(w, h),
        };
        let mut state = init_state(&data, WeightRule::Adaptive(&plain(beta))).unwrap();
        let lam = (-1.0f64).exp();
        assert!((state.lambda.at(4, 4) - lam).abs() < 1e-12);
        state.s = ScalarField::zeros(w, h); // force a visible prox input of it + r = beta
        let scfg = SolverConfig {
            max_iters: 1,
            ..SolverConfig::default()
        };
        let out = flow_level(&data, &plain(beta), &scfg, state).unwrap();
        let expected = soft_shrink(beta, lam / 1.0);
        assert!(
            (out.s.at(4, 4) - expected).abs() < 1e-12,
            "s prox got {} want {expected}",
            out.s.at(4, 4)
        );
    }

    #[test]
    fn gradient_split_threshold_carries_one_minus_lambda() {
        // a flow ramp with no image gradients: the y split sees one
        // isotropic shrinkage of grad u with threshold (1 - lambda) / mu
        let (w, h) = (11, 11);
        let beta = 0.7;
        let data = LinearizedData {
            it: ScalarField::filled(w, h, beta),
            ix: ScalarField::zeros(w, h),
            iy: ScalarField::zeros(w, h),
            v0: VectorField2::zeros(w, h),
        };
        let mut state = init_state(&data, WeightRule::Adaptive(&plain(beta))).unwrap();
        let slope = 2.0;
        state.u = ScalarField::from_fn(w, h, |x, _| slope * x as f64);
        state.y = VectorField2::zeros(w, h); // so y_next = shrink(grad u + 0)
        let scfg = SolverConfig {
            max_iters: 1,
            ..SolverConfig::default()
        };
        let out = flow_level(&data, &plain(beta), &scfg, state).unwrap();
        let lam = (-1.0f64).exp();
        let expected = slope - (1.0 - lam) / 1.0;
        // interior pixel: divergence of the ramp gradient vanishes there
        assert!(
            (out.y.at(5, 5)[0] - expected).abs() < 1e-12,
            "y prox got {} want {expected}",
            out.y.at(5, 5)[0]
        );
        assert_eq!(out.y.at(5, 5)[1], 0.0);
    }

    #[test]
    fn identical_frames_give_zero_flow_for_any_pyramid() {
        let img = make_smooth_texture(40, 32, 7);
        for levels in [1, 2, 3] {
            let pcfg = PyramidConfig {
                levels,
                ..PyramidConfig::for_dims(40, 32)
            };
            let (flow, _) =
                flow_pyramid(&img, &img, &plain(1.0), &SolverConfig::default(), &pcfg).unwrap();
            let gt = VectorField2::zeros(40, 32);
            assert!(endpoint_error(&flow, &gt) < 1e-6, "levels {levels}");
        }
    }

    #[test]
    fn global_translation_is_recovered_by_the_pyramid() {
        let base = make_smooth_texture(64, 64, 11);
        let scene = make_translation_pair(&base, [2.0, 1.0]);
        let pcfg = PyramidConfig {
            warps_per_level: 5,
            inner_iters: 120,
            ..PyramidConfig::for_dims(64, 64)
        };
        let (flow, _) = flow_pyramid(
            &scene.clean,
            &scene.noisy,
            &plain(1.0),
            &SolverConfig::default(),
            &pcfg,
        )
        .unwrap();
        // 80% interior crop
        let gt = scene.truth_flow.unwrap();
        let mut acc = 0.0;
        let mut cnt = 0;
        for y in 6..58 {
            for x in 6..58 {
                let [u, v] = flow.at(x, y);
                let [gu, gv] = gt.at(x, y);
                acc += ((u - gu).powi(2) + (v - gv).powi(2)).sqrt();
                cnt += 1;
            }
        }
        let ee = acc / cnt as f64;
        assert!(ee <= 0.2, "interior EE {ee}");
    }

    #[test]
    fn weight_is_one_wherever_the_residual_vanishes() {
        let rho = ScalarField::from_fn(8, 8, |x, _| if x < 4 { 0.0 } else { 1.0 });
        let lam = crate::adaptive::compute_lambda(&rho, &plain(1.0)).unwrap();
        for y in 0..8 {
            for x in 0..4 {
                assert_eq!(lam.at(x, y), 1.0);
            }
            for x in 4..8 {
                assert!((lam.at(x, y) - (-1.0f64).exp()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn error_metrics_specified_values() {
        let w = VectorField2::filled(4, 4, [1.0, 0.0]);
        let gt = VectorField2::zeros(4, 4);
        assert!((endpoint_error(&w, &gt) - 1.0).abs() < 1e-12);
        assert!((angular_error(&w, &gt) - 45.0).abs() < 1e-10);
        assert_eq!(endpoint_error(&gt, &gt), 0.0);
        assert_eq!(angular_error(&gt, &gt), 0.0);
    }

    #[test]
    fn error_metrics_match_pixel_loop_oracle() {
        let mut w = VectorField2::zeros(6, 5);
        let mut gt = VectorField2::zeros(6, 5);
        for y in 0..5 {
            for x in 0..6 {
                w.set(x, y, [0.1 * x as f64, -0.2 * y as f64]);
                gt.set(x, y, [0.05 * (x + y) as f64, 0.1]);
            }
        }
        let mut ee = 0.0;
        let mut ae = 0.0;
        for y in 0..5 {
            for x in 0..6 {
                let [a, b] = w.at(x, y);
                let [c, d] = gt.at(x, y);
                ee += ((a - c).powi(2) + (b - d).powi(2)).sqrt();
                let num = a * c + b * d + 1.0;
                let den = ((a * a + b * b + 1.0) * (c * c + d * d + 1.0)).sqrt();
                ae += (num / den).clamp(-1.0, 1.0).acos();
            }
        }
        ee /= 30.0;
        ae = (ae / 30.0).to_degrees();
        assert!((endpoint_error(&w, &gt) - ee).abs() < 1e-12);
        assert!((angular_error(&w, &gt) - ae).abs() < 1e-12);
    }

    #[test]
    fn unknown_ground_truth_pixels_are_excluded() {
        let w = VectorField2::filled(4, 1, [1.0, 0.0]);
        let mut gt = VectorField2::filled(4, 1, [1.0, 0.0]);
        gt.set(0, 0, [2e9, 0.0]); // unknown marker
        assert_eq!(endpoint_error(&w, &gt), 0.0);
        gt.set(1, 0, [3.0, 0.0]);
        assert!((endpoint_error(&w, &gt) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn transpose_equivariance_of_the_pyramid() {
        let base = make_smooth_texture(32, 24, 13);
        let scene = make_translation_pair(&base, [1.0, 0.5]);
        let pcfg = PyramidConfig {
            levels: 2,
            scale: 0.5,
            warps_per_level: 2,
            inner_iters: 40,
        };
        let scfg = SolverConfig {
            tol_rel_change: 0.0,
            ..SolverConfig::default()
        };
        let (flow, _) =
            flow_pyramid(&scene.clean, &scene.noisy, &plain(1.0), &scfg, &pcfg).unwrap();
        let (flow_t, _) = flow_pyramid(
            &scene.clean.transposed(),
            &scene.noisy.transposed(),
            &plain(1.0),
            &scfg,
            &pcfg,
        )
        .unwrap();
        // transposing both frames swaps the flow components
        for y in 0..24 {
            for x in 0..32 {
                let [u, v] = flow.at(x, y);
                let [ut, vt] = flow_t.at(y, x);
                assert!((u - vt).abs() < 1e-9 && (v - ut).abs() < 1e-9, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn too_small_images_are_rejected() {
        let img = ScalarField::filled(6, 6, 0.5);
        let err = flow_pyramid(
            &img,
            &img,
            &plain(1.0),
            &SolverConfig::default(),
            &PyramidConfig::for_dims(6, 6),
        );
        assert!(matches!(err, Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn for_dims_levels_follow_the_size_rule() {
        assert_eq!(PyramidConfig::for_dims(64, 64).levels, 3);
        assert_eq!(PyramidConfig::for_dims(16, 16).levels, 1);
        assert_eq!(PyramidConfig::for_dims(128, 256).levels, 4);
        assert_eq!(PyramidConfig::for_dims(8, 8).levels, 1);
    }
}
