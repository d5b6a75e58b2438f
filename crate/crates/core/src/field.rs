//! Dense 2-D field types shared by all solvers.
//!
//! Fields are stored row-major: the pixel at column `x`, row `y` lives at
//! index `y * width + x`. All constructors reject empty dimensions and
//! non-finite entries, so downstream code can assume finite data.

use crate::error::{Error, Result};

/// A `width x height` grid of real values (images, weights, residuals).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidField(format!(
                "empty dimensions {width}x{height}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidField("dimension overflow".into()))?;
        if data.len() != expected {
            return Err(Error::InvalidField(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "non-finite value {} at index {i}",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "empty field dimensions");
        assert!(value.is_finite(), "non-finite fill value");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds a field by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "empty field dimensions");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_dims(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_dims(&self, other: &Self) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_width: self.width,
                expected_height: self.height,
                width: other.width,
                height: other.height,
            })
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Sum of absolute values.
    pub fn norm_l1(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Inner product with a fixed (row-major) reduction order.
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert!(self.same_dims(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Per-pixel clamp to `[lo, hi]`.
    pub fn clamped(&self, lo: f64, hi: f64) -> Self {
        self.map(|v| v.clamp(lo, hi))
    }

    pub fn transposed(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.at(y, x))
    }
}

/// A `width x height` grid of 2-vectors (gradients, splitting variables, flow).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    width: usize,
    height: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField2 {
    pub fn new(width: usize, height: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let xs = ScalarField::new(width, height, x)?;
        let ys = ScalarField::new(width, height, y)?;
        Ok(Self {
            width,
            height,
            x: xs.data,
            y: ys.data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "empty field dimensions");
        Self {
            width,
            height,
            x: vec![0.0; width * height],
            y: vec![0.0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: [f64; 2]) -> Self {
        assert!(width > 0 && height > 0, "empty field dimensions");
        assert!(value[0].is_finite() && value[1].is_finite());
        Self {
            width,
            height,
            x: vec![value[0]; width * height],
            y: vec![value[1]; width * height],
        }
    }

    pub fn from_components(x: ScalarField, y: ScalarField) -> Result<Self> {
        x.check_dims(&y)?;
        Ok(Self {
            width: x.width,
            height: x.height,
            x: x.data,
            y: y.data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.x.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> [f64; 2] {
        let i = y * self.width + x;
        [self.x[i], self.y[i]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: [f64; 2]) {
        let i = y * self.width + x;
        self.x[i] = value[0];
        self.y[i] = value[1];
    }

    #[inline]
    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn xs_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    #[inline]
    pub fn ys_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    pub fn same_dims(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Inner product summing both components, fixed reduction order.
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert!(self.same_dims(other));
        let mut acc = 0.0;
        for i in 0..self.x.len() {
            acc += self.x[i] * other.x[i] + self.y[i] * other.y[i];
        }
        acc
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite()) && self.y.iter().all(|v| v.is_finite())
    }

    /// Componentwise `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        debug_assert!(self.same_dims(other));
        let mut out = self.clone();
        for i in 0..out.x.len() {
            out.x[i] -= other.x[i];
            out.y[i] -= other.y[i];
        }
        out
    }
}

/// A boolean mask over the grid (segmentation masks, ground truth).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryField {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryField {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidField(format!(
                "mask length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(width > 0 && height > 0);
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|b| !b).collect(),
        }
    }

    pub fn same_dims(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// 0/1 indicator as a scalar field.
    pub fn to_scalar(&self) -> ScalarField {
        ScalarField {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Truncated, normalized 1-D Gaussian used separably in 2-D.
///
/// `max_weight_2d` records the center weight of the separable 2-D kernel
/// (the max of the outer product of the 1-D weights).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
    radius: usize,
    weights: Vec<f64>,
    max_weight_2d: f64,
}

impl GaussianKernel {
    /// Truncation rule: radius = ceil(3 sigma), weights renormalized to sum 1.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "kernel sigma must be positive, got {sigma}"
            )));
        }
        let radius = (3.0 * sigma).ceil().max(1.0) as usize;
        let mut weights = Vec::with_capacity(2 * radius + 1);
        for i in -(radius as isize)..=(radius as isize) {
            let t = i as f64 / sigma;
            weights.push((-0.5 * t * t).exp());
        }
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        let center = weights[radius];
        Ok(Self {
            sigma,
            radius,
            weights,
            max_weight_2d: center * center,
        })
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn radius(&self) -> usize {
        self.radius
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Center weight of the separable 2-D kernel.
    #[inline]
    pub fn max_weight_2d(&self) -> f64 {
        self.max_weight_2d
    }

    /// Sup of the effective 2-D weight under replicate padding.
    ///
    /// With replicate boundaries the taps falling outside the grid fold onto
    /// the border pixel, so a single input pixel can receive up to a full
    /// half-tail of mass per axis; the square of that half sum bounds the
    /// largest coefficient any input pixel can contribute with.
    pub fn replicate_sup_2d(&self) -> f64 {
        let half: f64 = self.weights[self.radius..].iter().sum();
        half * half
    }
}
