//! Real 2π-periodic functions sampled on a uniform grid, and the Fourier
//! multipliers acting on them.
//!
//! Coefficients are normalized so that `f(u) = Σ f̂ₙ e^{inu}`; only the
//! half-spectrum `n = 0..=N/2` is stored. Every multiplier zeroes the Nyquist
//! mode, so operator images live in the trigonometric polynomials of degree
//! `< N/2`. On that space the trapezoid inner product is exact for products
//! and `K`, `𝓗` are exactly symmetric / skew.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use realfft::RealFftPlanner;

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<RealFftPlanner<f64>> = RefCell::new(RealFftPlanner::new());
}

/// Normalized forward transform: `f̂ₖ = (1/n) Σⱼ f(uⱼ) e^{-ik uⱼ}`, `k = 0..=n/2`.
pub(crate) fn forward(samples: &[f64]) -> Vec<Complex64> {
    let n = samples.len();
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    let mut input = samples.to_vec();
    let mut out = plan.make_output_vec();
    plan.process(&mut input, &mut out)
        .expect("forward transform buffers sized by the plan");
    let scale = 1.0 / n as f64;
    for c in &mut out {
        *c *= scale;
    }
    out
}

/// Synthesis on an `n`-point grid from a (possibly shorter or longer)
/// half-spectrum. Missing modes are zero, excess modes are dropped.
pub(crate) fn inverse(n: usize, coeffs: &[Complex64]) -> Vec<f64> {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    let mut spec = plan.make_input_vec();
    let m = spec.len().min(coeffs.len());
    spec[..m].copy_from_slice(&coeffs[..m]);
    spec[0].im = 0.0;
    let last = spec.len() - 1;
    spec[last].im = 0.0;
    let mut out = plan.make_output_vec();
    plan.process(&mut spec, &mut out)
        .expect("inverse transform buffers sized by the plan");
    out
}

/// Length of the 3/2-rule padded grid used for quadratic products.
pub(crate) fn fine_len(n: usize) -> usize {
    3 * n / 2
}

/// Samples on the padded grid of the band-limited function with the given
/// half-spectrum (Nyquist mode ignored).
pub(crate) fn to_fine(n: usize, coeffs: &[Complex64]) -> Vec<f64> {
    let mut c = coeffs[..n / 2].to_vec();
    c.push(Complex64::new(0.0, 0.0));
    inverse(fine_len(n), &c)
}

/// Half-spectrum (degree < n/2, Nyquist zero) of a function sampled on the
/// padded grid.
pub(crate) fn from_fine(n: usize, fine: &[f64]) -> Vec<Complex64> {
    let mut c = forward(fine);
    c.truncate(n / 2 + 1);
    c[n / 2] = Complex64::new(0.0, 0.0);
    c
}

/// Fourier symbols of the Hilbert transform and of `K = -𝓗∂ᵤ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct OperatorSymbolTable;

impl OperatorSymbolTable {
    /// `i·sgn(n)`, zero at `n = 0`.
    pub fn hilbert_symbol(n: i64) -> Complex64 {
        Complex64::new(0.0, n.signum() as f64)
    }

    /// `|n|`.
    pub fn k_symbol(n: i64) -> f64 {
        n.unsigned_abs() as f64
    }

    /// `i·n`.
    pub fn derivative_symbol(n: i64) -> Complex64 {
        Complex64::new(0.0, n as f64)
    }
}

fn check_size(n: usize) -> Result<()> {
    if n >= 4 && n.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::InvalidGridSize(n))
    }
}

/// A real 2π-periodic function sampled at `uⱼ = 2πj/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    samples: Vec<f64>,
}

impl GridFunction {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        check_size(samples.len())?;
        Ok(Self { samples })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        check_size(n)?;
        Ok(Self {
            samples: (0..n).map(|j| f(Self::node(n, j))).collect(),
        })
    }

    /// Builds the function from a half-spectrum `f̂₀ … f̂_{N/2}`; shorter input is
    /// zero-extended.
    pub fn from_coefficients(n: usize, coeffs: &[Complex64]) -> Result<Self> {
        check_size(n)?;
        Ok(Self {
            samples: inverse(n, coeffs),
        })
    }

    /// `f(u) = Σ aₖ cos(ku)`.
    pub fn from_cosine_coefficients(n: usize, a: &[f64]) -> Result<Self> {
        check_size(n)?;
        let coeffs: Vec<Complex64> = a
            .iter()
            .enumerate()
            .map(|(k, &ak)| Complex64::new(if k == 0 || 2 * k == n { ak } else { 0.5 * ak }, 0.0))
            .collect();
        Self::from_coefficients(n, &coeffs)
    }

    pub(crate) fn from_raw(samples: Vec<f64>) -> Self {
        debug_assert!(check_size(samples.len()).is_ok());
        Self { samples }
    }

    pub fn node(n: usize, j: usize) -> f64 {
        2.0 * PI * j as f64 / n as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        forward(&self.samples)
    }

    /// Cosine amplitudes `a₀ … a_{N/2}` of the even part.
    pub fn cosine_coefficients(&self) -> Vec<f64> {
        self.coefficients()
            .iter()
            .enumerate()
            .map(|(k, c)| if k == 0 || 2 * k == self.len() { c.re } else { 2.0 * c.re })
            .collect()
    }

    /// Applies a multiplier given on the non-negative half-spectrum. The
    /// Nyquist mode is always zeroed.
    pub fn map_spectrum(&self, symbol: impl Fn(usize, Complex64) -> Complex64) -> Self {
        let n = self.len();
        let mut c = self.coefficients();
        for (k, ck) in c.iter_mut().enumerate() {
            *ck = symbol(k, *ck);
        }
        c[n / 2] = Complex64::new(0.0, 0.0);
        Self::from_raw(inverse(n, &c))
    }

    /// Periodic Hilbert transform, symbol `i·sgn(n)`.
    pub fn hilbert(&self) -> Self {
        self.map_spectrum(|k, c| OperatorSymbolTable::hilbert_symbol(k as i64) * c)
    }

    /// `K = -𝓗∂ᵤ`, symbol `|n|`.
    pub fn k_op(&self) -> Self {
        self.map_spectrum(|k, c| OperatorSymbolTable::k_symbol(k as i64) * c)
    }

    pub fn derivative(&self) -> Self {
        self.map_spectrum(|k, c| OperatorSymbolTable::derivative_symbol(k as i64) * c)
    }

    /// Spectral inverse of `K` on the nonzero modes. Returns the solution with
    /// zero mean together with the mean of `self`, which must vanish for the
    /// equation `K x = self` to be solvable.
    pub fn inverse_k(&self) -> (Self, f64) {
        let n = self.len();
        let mut c = self.coefficients();
        let zero_mode = c[0].re;
        c[0] = Complex64::new(0.0, 0.0);
        for (k, ck) in c.iter_mut().enumerate().skip(1) {
            *ck /= k as f64;
        }
        c[n / 2] = Complex64::new(0.0, 0.0);
        (Self::from_raw(inverse(n, &c)), zero_mode)
    }

    /// Applies `(1 + a·K)⁻¹`.
    pub fn inverse_one_plus_k(&self, a: f64) -> Self {
        self.map_spectrum(|k, c| c / (1.0 + a * k as f64))
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    /// Normalized inner product `(1/2π)∮ f g du`, evaluated by the trapezoid rule.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(self.dot(other))
    }

    pub(crate) fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len(), "grid size mismatch");
        dot(&self.samples, &other.samples) / self.len() as f64
    }

    /// L² norm under the normalized inner product.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// `f(-u)`.
    pub fn reflect(&self) -> Self {
        let n = self.len();
        Self::from_raw((0..n).map(|j| self.samples[(n - j) % n]).collect())
    }

    /// `(f(u) + f(-u))/2`.
    pub fn project_even(&self) -> Self {
        let r = self.reflect();
        Self::from_raw(
            self.samples
                .iter()
                .zip(&r.samples)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        )
    }

    /// `(f(u) - f(-u))/2`.
    pub fn project_odd(&self) -> Self {
        let r = self.reflect();
        Self::from_raw(
            self.samples
                .iter()
                .zip(&r.samples)
                .map(|(a, b)| 0.5 * (a - b))
                .collect(),
        )
    }

    /// `f(u + 2πm/N)`.
    pub fn shift(&self, m: isize) -> Self {
        let n = self.len() as isize;
        Self::from_raw(
            (0..n)
                .map(|j| self.samples[(j + m).rem_euclid(n) as usize])
                .collect(),
        )
    }

    /// Fourier interpolation onto `n_new` points. Refinement zero-pads (the
    /// old Nyquist amplitude is split between `±N/2`); coarsening drops every
    /// mode `|k| ≥ n_new/2`.
    pub fn resample(&self, n_new: usize) -> Result<Self> {
        check_size(n_new)?;
        let n = self.len();
        if n_new == n {
            return Ok(self.clone());
        }
        let mut c = self.coefficients();
        if n_new > n {
            c[n / 2] *= 0.5;
        } else {
            c.truncate(n_new / 2 + 1);
            c[n_new / 2] = Complex64::new(0.0, 0.0);
        }
        Ok(Self::from_raw(inverse(n_new, &c)))
    }

    /// De-aliased product `P_N(f·g)` computed on the 3/2-padded grid. The
    /// Nyquist modes of both factors are ignored.
    pub fn product(&self, other: &Self) -> Result<Self> {
        let n = self.len();
        if n != other.len() {
            return Err(Error::DimensionMismatch {
                left: n,
                right: other.len(),
            });
        }
        let a = to_fine(n, &self.coefficients());
        let b = to_fine(n, &other.coefficients());
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Ok(Self::from_raw(inverse(n, &from_fine(n, &prod))))
    }

    /// Largest Fourier amplitude in the top octave `N/4 ≤ k < N/2`, relative
    /// to the L² norm.
    pub fn top_octave_tail(&self) -> f64 {
        let n = self.len();
        let c = self.coefficients();
        let tail = c[n / 4..n / 2].iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let norm = self.norm();
        if norm == 0.0 {
            0.0
        } else {
            tail / norm
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::from_raw(self.samples.iter().map(|x| a * x).collect())
    }

    /// `self += a·x`.
    pub fn axpy(&mut self, a: f64, x: &Self) {
        assert_eq!(self.len(), x.len(), "grid size mismatch");
        for (s, v) in self.samples.iter_mut().zip(&x.samples) {
            *s += a * v;
        }
    }

    /// Pointwise product on the grid (aliased; use [`GridFunction::product`]
    /// for quadratic terms).
    pub fn pointwise(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "grid size mismatch");
        Self::from_raw(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: &GridFunction) -> GridFunction {
        assert_eq!(self.len(), rhs.len(), "grid size mismatch");
        GridFunction::from_raw(
            self.samples
                .iter()
                .zip(&rhs.samples)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: &GridFunction) -> GridFunction {
        assert_eq!(self.len(), rhs.len(), "grid size mismatch");
        GridFunction::from_raw(
            self.samples
                .iter()
                .zip(&rhs.samples)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

impl Neg for &GridFunction {
    type Output = GridFunction;
    fn neg(self) -> GridFunction {
        self.scale(-1.0)
    }
}

impl Mul<&GridFunction> for f64 {
    type Output = GridFunction;
    fn mul(self, rhs: &GridFunction) -> GridFunction {
        rhs.scale(self)
    }
}
