//! Deterministic synthetic scenes for experiments: spatially biased noise,
//! two-level phantoms with ground-truth masks, and image pairs with
//! ground-truth flow.
//!
//! All generators are pure functions of their parameters (seed included);
//! sampling is counter-based per pixel, so outputs are bit-identical across
//! runs and platforms.

use crate::error::{Error, Result};
use crate::field::{BinaryField, GaussianKernel, ScalarField, VectorField2};
use crate::ops::{convolve_gaussian, sample_bilinear};
use crate::rng::normal;

/// Spatial profile of the noise standard deviation, ramping 0 to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasProfile {
    /// Left edge clean, right edge at full strength.
    HalfPlaneRamp,
    /// Image center clean, far corners at full strength.
    RadialRamp,
}

impl BiasProfile {
    fn at(&self, x: usize, y: usize, width: usize, height: usize) -> f64 {
        match self {
            BiasProfile::HalfPlaneRamp => {
                if width <= 1 {
                    1.0
                } else {
                    x as f64 / (width - 1) as f64
                }
            }
            BiasProfile::RadialRamp => {
                let cx = (width as f64 - 1.0) / 2.0;
                let cy = (height as f64 - 1.0) / 2.0;
                let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                let dmax = (cx * cx + cy * cy).sqrt();
                if dmax > 0.0 {
                    (d / dmax).min(1.0)
                } else {
                    1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BiasedNoiseSpec {
    pub sigma_max: f64,
    pub bias_profile: BiasProfile,
    pub rng_seed: u64,
}

/// A generated scene: clean/noisy image pair (or frame pair for motion
/// scenes) plus whichever ground truth applies.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub clean: ScalarField,
    pub noisy: ScalarField,
    pub truth_mask: Option<BinaryField>,
    pub truth_flow: Option<VectorField2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomShape {
    Disk,
    Blob,
}

/// Adds Gaussian noise whose standard deviation ramps across the image.
/// The result is intentionally not clamped to [0, 1].
pub fn add_biased_noise(clean: &ScalarField, spec: &BiasedNoiseSpec) -> ScalarField {
    assert!(spec.sigma_max >= 0.0, "sigma_max must be nonnegative");
    let (w, h) = (clean.width(), clean.height());
    let mut out = clean.clone();
    for y in 0..h {
        for x in 0..w {
            let sigma = spec.sigma_max * spec.bias_profile.at(x, y, w, h);
            let i = y * w + x;
            out.data_mut()[i] += sigma * normal(spec.rng_seed, i as u64);
        }
    }
    out
}

/// Spatially uniform Gaussian noise, same deterministic sampling.
pub fn add_gaussian_noise(clean: &ScalarField, sigma: f64, seed: u64) -> ScalarField {
    assert!(sigma >= 0.0, "sigma must be nonnegative");
    let mut out = clean.clone();
    for i in 0..out.len() {
        out.data_mut()[i] += sigma * normal(seed, i as u64);
    }
    out
}

/// Disk radius used by [`make_two_level_phantom`], relative to min(w, h).
pub const PHANTOM_DISK_RADIUS_FRACTION: f64 = 0.3;

/// Two-level image: `hi` inside the shape, `lo` outside, with the exact
/// rasterized mask as ground truth.
pub fn make_two_level_phantom(
    width: usize,
    height: usize,
    lo: f64,
    hi: f64,
    shape: PhantomShape,
) -> Result<SyntheticScene> {
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "phantom levels must satisfy 0 <= lo < hi <= 1, got lo={lo}, hi={hi}"
        )));
    }
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let r0 = PHANTOM_DISK_RADIUS_FRACTION * width.min(height) as f64;
    let inside = |x: usize, y: usize| -> bool {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        match shape {
            PhantomShape::Disk => dx * dx + dy * dy <= r0 * r0,
            PhantomShape::Blob => {
                let theta = dy.atan2(dx);
                let r = 0.9 * r0 * (1.0 + 0.3 * (3.0 * theta).sin() + 0.15 * (5.0 * theta).cos());
                (dx * dx + dy * dy).sqrt() <= r
            }
        }
    };
    let mask = BinaryField::from_fn(width, height, inside);
    let clean = ScalarField::from_fn(width, height, |x, y| if mask.at(x, y) { hi } else { lo });
    Ok(SyntheticScene {
        noisy: clean.clone(),
        clean,
        truth_mask: Some(mask),
        truth_flow: None,
    })
}

/// Frame pair under a global translation `t` (pixels): the second frame is
/// the first inversely warped by `t`, and the ground-truth flow is constant.
pub fn make_translation_pair(base: &ScalarField, t: [f64; 2]) -> SyntheticScene {
    let (w, h) = (base.width(), base.height());
    let frame1 = ScalarField::from_fn(w, h, |x, y| {
        sample_bilinear(base, x as f64 - t[0], y as f64 - t[1])
    });
    SyntheticScene {
        clean: base.clone(),
        noisy: frame1,
        truth_mask: None,
        truth_flow: Some(VectorField2::filled(w, h, t)),
    }
}

/// Frame pair where the left half moves by `t_left` and the right half by
/// `t_right`, over a generated smooth texture. The ground-truth flow is the
/// piecewise-constant field (values at the motion boundary follow the left
/// region up to the split column).
pub fn make_two_motion_pair(
    width: usize,
    height: usize,
    t_left: [f64; 2],
    t_right: [f64; 2],
    seed: u64,
) -> SyntheticScene {
    let base = make_smooth_texture(width, height, seed);
    let split = width / 2;
    let flow = {
        let mut f = VectorField2::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                f.set(x, y, if x < split { t_left } else { t_right });
            }
        }
        f
    };
    let frame1 = ScalarField::from_fn(width, height, |x, y| {
        let t = if x < split { t_left } else { t_right };
        sample_bilinear(&base, x as f64 - t[0], y as f64 - t[1])
    });
    SyntheticScene {
        clean: base,
        noisy: frame1,
        truth_mask: None,
        truth_flow: Some(flow),
    }
}

/// Smooth random texture in [0.1, 0.9]: blurred white noise, range-normalized.
pub fn make_smooth_texture(width: usize, height: usize, seed: u64) -> ScalarField {
    let mut noise = ScalarField::zeros(width, height);
    for i in 0..noise.len() {
        noise.data_mut()[i] = normal(seed, i as u64);
    }
    let blurred = convolve_gaussian(&noise, &GaussianKernel::new(1.5).unwrap());
    let (lo, hi) = (blurred.min(), blurred.max());
    if hi - lo < 1e-12 {
        return ScalarField::filled(width, height, 0.5);
    }
    blurred.map(|v| 0.1 + 0.8 * (v - lo) / (hi - lo))
}
