//! Discrete differential operators and proximal primitives.
//!
//! The gradient uses forward differences with Neumann boundary (last row and
//! column of each component are zero); the divergence is its exact negative
//! adjoint, so for any `u`, `p`:  `<grad(u), p> = <u, -div(p)>` up to
//! round-off. All reductions run in a fixed row-major order.

use crate::error::{Error, Result};
use crate::field::{GaussianKernel, ScalarField, VectorField2};

/// Forward-difference gradient.
///
/// x-component (i,j) = u(i+1,j) - u(i,j), zero in the last column;
/// y-component analogous, zero in the last row.
pub fn gradient(u: &ScalarField) -> VectorField2 {
    let (w, h) = (u.width(), u.height());
    let mut g = VectorField2::zeros(w, h);
    let ud = u.data();
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let i = row + x;
            let dx = if x + 1 < w { ud[i + 1] - ud[i] } else { 0.0 };
            let dy = if y + 1 < h { ud[i + w] - ud[i] } else { 0.0 };
            g.xs_mut()[i] = dx;
            g.ys_mut()[i] = dy;
        }
    }
    g
}

/// Negative adjoint of [`gradient`] (backward-difference divergence).
pub fn divergence(p: &VectorField2) -> ScalarField {
    let (w, h) = (p.width(), p.height());
    let mut out = ScalarField::zeros(w, h);
    let px = p.xs();
    let py = p.ys();
    let od = out.data_mut();
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let i = row + x;
            let mut v = 0.0;
            // x-part: px(x) - px(x-1), clipping the taps that fall outside
            if x + 1 < w {
                v += px[i];
            }
            if x > 0 {
                v -= px[i - 1];
            }
            // y-part: py(y) - py(y-1)
            if y + 1 < h {
                v += py[i];
            }
            if y > 0 {
                v -= py[i - w];
            }
            od[i] = v;
        }
    }
    out
}

/// Separable Gaussian convolution with replicate-boundary padding.
pub fn convolve_gaussian(u: &ScalarField, g: &GaussianKernel) -> ScalarField {
    let (w, h) = (u.width(), u.height());
    let r = g.radius() as isize;
    let weights = g.weights();

    // horizontal pass
    let mut tmp = vec![0.0f64; w * h];
    let ud = u.data();
    for y in 0..h {
        let row = y * w;
        for x in 0..w as isize {
            let mut acc = 0.0;
            for k in -r..=r {
                let xs = (x + k).clamp(0, w as isize - 1) as usize;
                acc += weights[(k + r) as usize] * ud[row + xs];
            }
            tmp[row + x as usize] = acc;
        }
    }

    // vertical pass
    let mut out = ScalarField::zeros(w, h);
    let od = out.data_mut();
    for y in 0..h as isize {
        for x in 0..w {
            let mut acc = 0.0;
            for k in -r..=r {
                let ys = (y + k).clamp(0, h as isize - 1) as usize;
                acc += weights[(k + r) as usize] * tmp[ys * w + x];
            }
            od[y as usize * w + x] = acc;
        }
    }
    out
}

/// Scalar soft shrinkage: prox of `threshold * |.|`.
#[inline]
pub fn soft_shrink(x: f64, threshold: f64) -> f64 {
    debug_assert!(threshold >= 0.0);
    if x > threshold {
        x - threshold
    } else if x < -threshold {
        x + threshold
    } else {
        0.0
    }
}

/// Isotropic 2-vector shrinkage: prox of `threshold * ||.||_2`.
#[inline]
pub fn shrink_vector2(v: [f64; 2], threshold: f64) -> [f64; 2] {
    debug_assert!(threshold >= 0.0);
    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if norm <= threshold {
        [0.0, 0.0]
    } else {
        let scale = 1.0 - threshold / norm;
        [v[0] * scale, v[1] * scale]
    }
}

/// Per-pixel clamp to `[lo, hi]`; errors when the interval is empty.
pub fn project_box(u: &ScalarField, lo: f64, hi: f64) -> Result<ScalarField> {
    if lo > hi {
        return Err(Error::InvalidInterval { lo, hi });
    }
    Ok(u.clamped(lo, hi))
}

/// Bilinear sample with border clamping.
pub(crate) fn sample_bilinear(u: &ScalarField, x: f64, y: f64) -> f64 {
    let (w, h) = (u.width(), u.height());
    let xc = x.clamp(0.0, (w - 1) as f64);
    let yc = y.clamp(0.0, (h - 1) as f64);
    let x0 = xc.floor() as usize;
    let y0 = yc.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = xc - x0 as f64;
    let fy = yc - y0 as f64;
    let v00 = u.at(x0, y0);
    let v10 = u.at(x1, y0);
    let v01 = u.at(x0, y1);
    let v11 = u.at(x1, y1);
    (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11)
}

/// Center-aligned bilinear resize.
pub(crate) fn resize_bilinear(u: &ScalarField, new_w: usize, new_h: usize) -> ScalarField {
    let sx = u.width() as f64 / new_w as f64;
    let sy = u.height() as f64 / new_h as f64;
    ScalarField::from_fn(new_w, new_h, |x, y| {
        let src_x = (x as f64 + 0.5) * sx - 0.5;
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        sample_bilinear(u, src_x, src_y)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::uniform_field;
    use proptest::prelude::*;

    /// Independent double-loop forward differencing.
    fn naive_gradient(u: &ScalarField) -> (Vec<f64>, Vec<f64>) {
        let (w, h) = (u.width(), u.height());
        let mut gx = vec![0.0; w * h];
        let mut gy = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w {
                    gx[y * w + x] = u.at(x + 1, y) - u.at(x, y);
                }
                if y + 1 < h {
                    gy[y * w + x] = u.at(x, y + 1) - u.at(x, y);
                }
            }
        }
        (gx, gy)
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let u = ScalarField::filled(7, 5, 3.25);
        let g = gradient(&u);
        assert!(g.xs().iter().all(|&v| v == 0.0));
        assert!(g.ys().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_of_ramp_is_one() {
        let u = ScalarField::from_fn(16, 1, |x, _| x as f64);
        let g = gradient(&u);
        for x in 0..15 {
            assert_eq!(g.at(x, 0)[0], 1.0);
        }
        assert_eq!(g.at(15, 0)[0], 0.0);
        assert!(g.ys().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_naive_loop() {
        let u = uniform_field(8, 8, 11, -1.0, 1.0);
        let g = gradient(&u);
        let (gx, gy) = naive_gradient(&u);
        assert_eq!(g.xs(), gx.as_slice());
        assert_eq!(g.ys(), gy.as_slice());
    }

    #[test]
    fn divergence_of_zero_is_zero() {
        let p = VectorField2::zeros(6, 4);
        assert!(divergence(&p).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn divergence_of_delta_hits_adjacent_pixels() {
        // unit x-impulse at interior pixel (3,2): div = +1 there, -1 at (4,2)
        let mut p = VectorField2::zeros(8, 8);
        p.set(3, 2, [1.0, 0.0]);
        let d = divergence(&p);
        for y in 0..8 {
            for x in 0..8 {
                let expected = match (x, y) {
                    (3, 2) => 1.0,
                    (4, 2) => -1.0,
                    _ => 0.0,
                };
                assert_eq!(d.at(x, y), expected, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn adjointness_on_random_pairs() {
        for seed in 0..100u64 {
            let u = uniform_field(16, 16, seed * 2 + 1, -2.0, 2.0);
            let p = {
                let a = uniform_field(16, 16, seed * 2 + 2, -2.0, 2.0);
                let b = uniform_field(16, 16, seed * 2 + 40_000, -2.0, 2.0);
                VectorField2::from_components(a, b).unwrap()
            };
            let lhs = gradient(&u).dot(&p);
            let rhs = u.dot(&divergence(&p));
            let bound = 1e-10 * (u.norm_l2() * p.norm_l2() + 1.0);
            assert!(
                (lhs + rhs).abs() <= bound,
                "adjointness broken: {lhs} vs {}",
                -rhs
            );
        }
    }

    #[test]
    fn convolution_preserves_constants() {
        let u = ScalarField::filled(12, 9, 0.7);
        for sigma in [0.4, 1.0, 3.0] {
            let g = GaussianKernel::new(sigma).unwrap();
            let out = convolve_gaussian(&u, &g);
            for &v in out.data() {
                assert!((v - 0.7).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn convolution_near_delta_is_identity() {
        let u = uniform_field(10, 10, 3, 0.0, 1.0);
        let g = GaussianKernel::new(0.05).unwrap();
        let out = convolve_gaussian(&u, &g);
        for i in 0..u.len() {
            assert!((out.data()[i] - u.data()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn convolution_of_impulse_matches_outer_product() {
        let mut u = ScalarField::zeros(17, 17);
        u.set(8, 8, 1.0);
        let g = GaussianKernel::new(1.2).unwrap();
        let out = convolve_gaussian(&u, &g);
        let r = g.radius() as isize;
        let w1 = g.weights();
        // oracle: explicit outer product placed at the impulse
        for y in 0..17isize {
            for x in 0..17isize {
                let dx = x - 8;
                let dy = y - 8;
                let expected = if dx.abs() <= r && dy.abs() <= r {
                    w1[(dx + r) as usize] * w1[(dy + r) as usize]
                } else {
                    0.0
                };
                let got = out.at(x as usize, y as usize);
                assert!((got - expected).abs() < 1e-9, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn convolution_max_principle() {
        let u = uniform_field(14, 6, 9, -0.3, 1.4);
        let g = GaussianKernel::new(1.5).unwrap();
        let out = convolve_gaussian(&u, &g);
        assert!(out.min() >= u.min() - 1e-12);
        assert!(out.max() <= u.max() + 1e-12);
    }

    #[test]
    fn soft_shrink_specified_cases() {
        assert!((soft_shrink(0.5, 0.2) - 0.3).abs() < 1e-15);
        assert_eq!(soft_shrink(0.1, 0.2), 0.0);
        assert_eq!(soft_shrink(-0.1, 0.2), 0.0);
        assert!((soft_shrink(-0.5, 0.2) + 0.3).abs() < 1e-15);
        assert_eq!(soft_shrink(0.2, 0.2), 0.0);
    }

    #[test]
    fn shrink_vector2_specified_cases() {
        assert_eq!(shrink_vector2([3.0, 4.0], 5.0), [0.0, 0.0]);
        assert_eq!(shrink_vector2([3.0, 4.0], 0.0), [3.0, 4.0]);
        let out = shrink_vector2([3.0, 4.0], 2.5);
        assert!((out[0] - 1.5).abs() < 1e-15);
        assert!((out[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn project_box_clamps_and_rejects_empty_interval() {
        let u = ScalarField::new(2, 1, vec![1.7, -0.4]).unwrap();
        let p = project_box(&u, 0.0, 1.0).unwrap();
        assert_eq!(p.data(), &[1.0, 0.0]);
        let q = project_box(&p, 0.0, 1.0).unwrap();
        assert_eq!(p, q);
        assert!(matches!(
            project_box(&u, 1.0, 0.0),
            Err(Error::InvalidInterval { .. })
        ));
    }

    proptest! {
        #[test]
        fn soft_shrink_is_lipschitz_and_monotone(
            a in -5.0f64..5.0, b in -5.0f64..5.0, t in 0.0f64..3.0
        ) {
            let (sa, sb) = (soft_shrink(a, t), soft_shrink(b, t));
            prop_assert!((sa - sb).abs() <= (a - b).abs() + 1e-15);
            if a <= b {
                prop_assert!(sa <= sb);
            }
        }

        #[test]
        fn shrink_vector2_never_grows_the_norm(
            vx in -5.0f64..5.0, vy in -5.0f64..5.0, t in 0.0f64..3.0
        ) {
            let out = shrink_vector2([vx, vy], t);
            let n_in = (vx * vx + vy * vy).sqrt();
            let n_out = (out[0] * out[0] + out[1] * out[1]).sqrt();
            prop_assert!(n_out <= n_in + 1e-15);
        }

        #[test]
        fn adjointness_property(seed in 0u64..5000, w in 2usize..64, h in 2usize..64) {
            let u = uniform_field(w, h, seed, -1.0, 1.0);
            let a = uniform_field(w, h, seed ^ 0xabcdef, -1.0, 1.0);
            let b = uniform_field(w, h, seed ^ 0x123456, -1.0, 1.0);
            let p = VectorField2::from_components(a, b).unwrap();
            let lhs = gradient(&u).dot(&p);
            let rhs = u.dot(&divergence(&p));
            prop_assert!((lhs + rhs).abs() <= 1e-10 * (u.norm_l2() * p.norm_l2() + 1.0));
        }
    }

    // Grid-search prox oracles: coarse-to-fine minimization of the prox
    // objective, independent of the closed forms above.
    fn grid_argmin_1d(x: f64, mu: f64) -> f64 {
        let objective = |t: f64| 0.5 * (t - x) * (t - x) + mu * t.abs();
        let mut center = 0.0;
        let mut best = 0.0;
        for &(span, step) in &[(6.0, 1e-2), (2.5e-2, 1e-4), (2.5e-4, 1e-6)] {
            let mut best_val = f64::INFINITY;
            let n = (2.0 * span / step) as usize;
            for i in 0..=n {
                let t = center - span + i as f64 * step;
                let v = objective(t);
                if v < best_val {
                    best_val = v;
                    best = t;
                }
            }
            center = best;
        }
        best
    }

    fn grid_argmin_2d(v: [f64; 2], mu: f64) -> [f64; 2] {
        let objective = |a: f64, b: f64| {
            0.5 * ((a - v[0]).powi(2) + (b - v[1]).powi(2)) + mu * (a * a + b * b).sqrt()
        };
        let mut center = [0.0, 0.0];
        let mut best = [0.0, 0.0];
        for &(span, step) in &[(6.0, 5e-2), (1.2e-1, 2e-3), (5e-3, 1e-4), (2.5e-4, 1e-5)] {
            let mut best_val = f64::INFINITY;
            let n = (2.0 * span / step) as usize;
            for i in 0..=n {
                let a = center[0] - span + i as f64 * step;
                for j in 0..=n {
                    let b = center[1] - span + j as f64 * step;
                    let val = objective(a, b);
                    if val < best_val {
                        best_val = val;
                        best = [a, b];
                    }
                }
            }
            center = best;
        }
        best
    }

    #[test]
    fn soft_shrink_matches_grid_search_prox() {
        for seed in 0..1000u64 {
            let f = uniform_field(2, 1, seed, -2.5, 2.5);
            let x = f.data()[0];
            let mu = (f.data()[1] + 2.5) / 2.0; // in [0, 2.5]
            let expected = grid_argmin_1d(x, mu);
            let got = soft_shrink(x, mu);
            assert!(
                (got - expected).abs() <= 1e-4,
                "prox mismatch at x={x}, mu={mu}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn shrink_vector2_matches_grid_search_prox() {
        for seed in 0..200u64 {
            let f = uniform_field(3, 1, seed + 7_000, -2.5, 2.5);
            let v = [f.data()[0], f.data()[1]];
            let mu = (f.data()[2] + 2.5) / 2.0;
            let expected = grid_argmin_2d(v, mu);
            let got = shrink_vector2(v, mu);
            let dist = ((got[0] - expected[0]).powi(2) + (got[1] - expected[1]).powi(2)).sqrt();
            assert!(
                dist <= 2e-4,
                "vector prox mismatch at v={v:?}, mu={mu}: {got:?} vs {expected:?}"
            );
        }
    }
}
