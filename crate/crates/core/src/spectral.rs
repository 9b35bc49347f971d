//! Exact spectral machinery on the sine basis `ε_k(x) = √2 sin(kπx)`.
//!
//! Every exact solution in the crate is a [`SpectralField`]; the decay rates of the
//! linear operator `∂⁴ + μ∂²` are carried by [`ModeRates`], obtained from a [`Model`]
//! that stores the single global `μ`.

use std::f64::consts::{PI, SQRT_2};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Below this magnitude of `rate · length` the exponential integrals switch to Taylor form.
pub const TAYLOR_SWITCH: f64 = 1e-8;

/// Default truncation of infinite mode series.
pub const DEFAULT_K_CUT: usize = 4096;

/// `∫₀^len e^{-rate·s} ds`, stable when `rate·len → 0` and valid for negative rates.
pub fn decay_integral(rate: f64, len: f64) -> f64 {
    let x = rate * len;
    if x.abs() < TAYLOR_SWITCH {
        len * (1.0 - 0.5 * x + x * x / 6.0)
    } else {
        -(-x).exp_m1() / rate
    }
}

/// Model parameters shared by every solver: the coefficient `μ` of `u_xx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model {
    mu: f64,
}

impl Model {
    pub fn new(mu: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::Config(format!("mu must be finite, got {mu}")));
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Eigen data of mode `k ≥ 1`.
    pub fn eigen(&self, k: usize) -> Result<ModeRates> {
        if k == 0 {
            return Err(Error::InvalidMode(0));
        }
        Ok(self.rates(k))
    }

    pub(crate) fn rates(&self, k: usize) -> ModeRates {
        debug_assert!(k >= 1);
        let lambda = k as f64 * PI;
        let lambda_sq = lambda * lambda;
        ModeRates {
            lambda,
            kappa: lambda_sq * (lambda_sq - self.mu),
            mu: self.mu,
        }
    }

    /// Smallest mode count `κ` with `κ²π² > μ`; below it the canvas error bound does not apply.
    pub fn min_resolved_modes(&self) -> usize {
        let a = self.mu.max(0.0).sqrt() / PI;
        a.floor() as usize + 1
    }

    /// Upper bound of `Σ_{k>K} 1/(2(λ_k² − μ))`, the stationary variance carried by the
    /// modes beyond `K`. Infinite when the bound does not apply (`K + ½ ≤ √μ⁺/π`).
    pub fn tail_bound(&self, k_cut: usize) -> f64 {
        // 1/(λ_k² − μ) ≤ 1/(π²(k − a)²) for k > a, and convexity of 1/(x − a)² gives
        // Σ_{k>K} 1/(k − a)² ≤ 1/(K + ½ − a).
        let a = self.mu.max(0.0).sqrt() / PI;
        let shift = k_cut as f64 + 0.5 - a;
        if shift <= 0.5 {
            return f64::INFINITY;
        }
        1.0 / (2.0 * PI * PI * shift)
    }
}

/// `λ_k = kπ` and the decay rate `κ_k = λ_k²(λ_k² − μ)` of mode `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRates {
    pub lambda: f64,
    pub kappa: f64,
    pub mu: f64,
}

/// Truncated series value with the analytic bound of the neglected remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
}

impl SeriesValue {
    /// Logs a warning when the remainder bound exceeds `tol`; returns whether it is within.
    pub fn check_tail(&self, tol: f64) -> bool {
        let ok = self.tail_bound <= tol;
        if !ok {
            log::warn!(
                "series tail bound {:.3e} exceeds requested tolerance {:.3e}",
                self.tail_bound,
                tol
            );
        }
        ok
    }
}

/// Finite sine expansion `Σ_k c_k ε_k`; `coeffs[k-1]` is the coefficient of `ε_k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(modes: usize) -> Self {
        Self {
            coeffs: vec![0.0; modes],
        }
    }

    /// `value · ε_k`.
    pub fn single(k: usize, value: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidMode(0));
        }
        let mut coeffs = vec![0.0; k];
        coeffs[k - 1] = value;
        Ok(Self { coeffs })
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of `ε_k`; zero beyond the stored modes.
    pub fn coeff(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.coeffs.get(k - 1).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// `(self, other)` in `L²(0,1)`.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// `Ḣ^s` norm `(Σ λ_k^{2s} c_k²)^{1/2}` for integer `s` (negative allowed).
    pub fn hdot_norm(&self, s: i32) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| ((j + 1) as f64 * PI).powi(2 * s) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Point value `Σ c_k √2 sin(kπx)` for `x ∈ [0, 1]`.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        check_range("x", x, 0.0, 1.0)?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * SQRT_2 * ((j + 1) as f64 * PI * x).sin())
            .sum()
    }

    /// Exact deterministic evolution `c_k ↦ c_k e^{-κ_k t}`.
    pub fn semigroup_apply(&self, model: &Model, t: f64) -> Result<SpectralField> {
        check_range("t", t, 0.0, f64::MAX)?;
        Ok(self.map_modes(|k, c| c * (-model.rates(k).kappa * t).exp()))
    }

    /// Solution operator of `v'' = f`, `v(0) = v(1) = 0`.
    pub fn apply_te(&self) -> SpectralField {
        self.map_modes(|k, c| {
            let l = k as f64 * PI;
            -c / (l * l)
        })
    }

    /// Solution operator of `v'''' = f` with `v = v'' = 0` on the boundary.
    pub fn apply_tb(&self) -> SpectralField {
        self.map_modes(|k, c| {
            let l2 = (k as f64 * PI).powi(2);
            c / (l2 * l2)
        })
    }

    pub fn map_modes(&self, f: impl Fn(usize, f64) -> f64) -> SpectralField {
        SpectralField {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(j, &c)| f(j + 1, c))
                .collect(),
        }
    }

    fn zip_with(&self, other: &SpectralField, f: impl Fn(f64, f64) -> f64) -> SpectralField {
        let n = self.modes().max(other.modes());
        SpectralField {
            coeffs: (1..=n).map(|k| f(self.coeff(k), other.coeff(k))).collect(),
        }
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.map_modes(|_, c| c * rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.map_modes(|_, c| -c)
    }
}

/// `E‖u(t)‖²` of the mild solution, `Σ_k λ_k² (1 − e^{-2κ_k t})/(2κ_k)` summed to `k_cut`.
///
/// The reported tail bound is the stationary remainder beyond `k_cut`, which dominates
/// the neglected terms at every `t`.
pub fn mild_second_moment(model: &Model, t: f64, k_cut: usize) -> Result<SeriesValue> {
    check_range("t", t, 0.0, f64::MAX)?;
    if k_cut == 0 {
        return Err(Error::Config("k_cut must be at least 1".into()));
    }
    if t == 0.0 {
        return Ok(SeriesValue {
            value: 0.0,
            tail_bound: 0.0,
        });
    }
    // sum from the smallest term up
    let value = (1..=k_cut)
        .rev()
        .map(|k| {
            let r = model.rates(k);
            r.lambda * r.lambda * decay_integral(2.0 * r.kappa, t)
        })
        .sum();
    Ok(SeriesValue {
        value,
        tail_bound: model.tail_bound(k_cut),
    })
}
