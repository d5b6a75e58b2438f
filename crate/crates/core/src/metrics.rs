//! Image-quality metrics for the denoising experiments.

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Peak signal-to-noise ratio in dB; `+inf` when the images are identical.
pub fn psnr(u: &ScalarField, reference: &ScalarField, dynamic_range: f64) -> f64 {
    assert!(u.same_dims(reference), "psnr: shape mismatch");
    assert!(dynamic_range > 0.0);
    let mut mse = 0.0;
    for i in 0..u.len() {
        let d = u.data()[i] - reference.data()[i];
        mse += d * d;
    }
    mse /= u.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (dynamic_range * dynamic_range / mse).log10()
    }
}

/// SSIM parameters: Gaussian window and stabilizing constants.
#[derive(Debug, Clone, Copy)]
pub struct SsimConfig {
    pub window_sigma: f64,
    pub window_radius: usize,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    /// 11x11 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03 on unit range.
    fn default() -> Self {
        Self {
            window_sigma: 1.5,
            window_radius: 5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimConfig {
    fn window_weights(&self) -> Vec<f64> {
        let r = self.window_radius as isize;
        let mut w = Vec::with_capacity(2 * self.window_radius + 1);
        for i in -r..=r {
            let t = i as f64 / self.window_sigma;
            w.push((-0.5 * t * t).exp());
        }
        let sum: f64 = w.iter().sum();
        w.iter().map(|v| v / sum).collect()
    }
}

/// Mean structural similarity over all fully interior window positions,
/// computed from Gaussian-weighted local statistics.
pub fn ssim(u: &ScalarField, reference: &ScalarField, cfg: &SsimConfig) -> Result<f64> {
    u.check_dims(reference)?;
    let (w, h) = (u.width(), u.height());
    let win = 2 * cfg.window_radius + 1;
    if w < win || h < win {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: win,
        });
    }
    let weights = cfg.window_weights();
    let r = cfg.window_radius;

    // separable weighted moments: horizontal pass over full rows (valid x),
    // vertical pass over valid y
    let vw = w - 2 * r; // valid width
    let vh = h - 2 * r;
    let mut row_mu = vec![0.0; vw * h];
    let mut row_mr = vec![0.0; vw * h];
    let mut row_uu = vec![0.0; vw * h];
    let mut row_rr = vec![0.0; vw * h];
    let mut row_ur = vec![0.0; vw * h];
    for y in 0..h {
        for cx in 0..vw {
            let (mut mu, mut mr, mut uu, mut rr, mut ur) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for k in 0..win {
                let a = u.at(cx + k, y);
                let b = reference.at(cx + k, y);
                let wk = weights[k];
                mu += wk * a;
                mr += wk * b;
                uu += wk * a * a;
                rr += wk * b * b;
                ur += wk * a * b;
            }
            let i = y * vw + cx;
            row_mu[i] = mu;
            row_mr[i] = mr;
            row_uu[i] = uu;
            row_rr[i] = rr;
            row_ur[i] = ur;
        }
    }

    let c1 = (cfg.k1 * cfg.dynamic_range).powi(2);
    let c2 = (cfg.k2 * cfg.dynamic_range).powi(2);
    let mut total = 0.0;
    for cy in 0..vh {
        for cx in 0..vw {
            let (mut mu, mut mr, mut uu, mut rr, mut ur) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for k in 0..win {
                let i = (cy + k) * vw + cx;
                let wk = weights[k];
                mu += wk * row_mu[i];
                mr += wk * row_mr[i];
                uu += wk * row_uu[i];
                rr += wk * row_rr[i];
                ur += wk * row_ur[i];
            }
            let var_u = uu - mu * mu;
            let var_r = rr - mr * mr;
            let cov = ur - mu * mr;
            let num = (2.0 * mu * mr + c1) * (2.0 * cov + c2);
            let den = (mu * mu + mr * mr + c1) * (var_u + var_r + c2);
            total += num / den;
        }
    }
    Ok(total / (vw * vh) as f64)
}
