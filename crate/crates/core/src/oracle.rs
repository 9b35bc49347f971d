//! Exact spectral solutions of the canvas problem and exact mean-square errors.
//!
//! Mode `i` of the canvas solution solves the scalar ODE `c' + κ_i c = −(λ_i/Δt) R[n][i]`
//! on slab `n`; mode `i` of the IMEX time-discrete approximation follows
//!
//! ```text
//! c^m = [(1 + Δτ μ λ_i²) c^{m−1} + b^m] / (1 + Δτ λ_i⁴),
//! b^m = −(λ_i/Δt) Σ_n R[n][i] |Δ_m ∩ T_n|.
//! ```
//!
//! Both are linear in the increments, so their second moments are exact sums of
//! squared weights (see [`WeightTable`]).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseGrid, NoiseMatrix};
use crate::spectral::{decay_integral, Model, SpectralField};

/// Coefficients `w[i][n]` with `X_i = Σ_n w[i][n] R[n][i]` for a linear-in-noise field `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    modes: usize,
    slabs: usize,
    w: Vec<f64>,
}

impl WeightTable {
    pub fn zeros(modes: usize, slabs: usize) -> Self {
        Self {
            modes,
            slabs,
            w: vec![0.0; modes * slabs],
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn slabs(&self) -> usize {
        self.slabs
    }

    /// Weight of `R[slab][mode]`, both 1-based.
    pub fn get(&self, mode: usize, slab: usize) -> f64 {
        self.w[(mode - 1) * self.slabs + slab - 1]
    }

    fn mode_row_mut(&mut self, mode: usize) -> &mut [f64] {
        &mut self.w[(mode - 1) * self.slabs..mode * self.slabs]
    }

    /// The field this table represents for one noise sample.
    pub fn apply(&self, noise: &NoiseMatrix) -> SpectralField {
        SpectralField::new(
            (1..=self.modes)
                .map(|i| (1..=self.slabs).map(|n| self.get(i, n) * noise.get(n, i)).sum())
                .collect(),
        )
    }

    /// `E‖X‖² = Δt Σ w²`.
    pub fn second_moment(&self, dt: f64) -> f64 {
        dt * self.w.iter().map(|v| v * v).sum::<f64>()
    }

    /// `E‖X − Y‖² = Δt Σ (w − v)²` for fields driven by the same noise.
    pub fn distance_sq(&self, other: &WeightTable, dt: f64) -> Result<f64> {
        if self.modes != other.modes || self.slabs != other.slabs {
            return Err(Error::Dimension {
                expected: self.w.len(),
                got: other.w.len(),
            });
        }
        Ok(dt
            * self
                .w
                .iter()
                .zip(&other.w)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>())
    }
}

/// Exact step of mode `mode`'s canvas coefficient across `[t_from, t_to] ⊆ closure(T_slab)`.
#[allow(clippy::too_many_arguments)]
pub fn canvas_exact_step(
    model: &Model,
    grid: &NoiseGrid,
    mode: usize,
    slab: usize,
    increment: f64,
    c: f64,
    t_from: f64,
    t_to: f64,
) -> Result<f64> {
    if mode == 0 {
        return Err(Error::InvalidMode(0));
    }
    if slab == 0 || slab > grid.slabs() {
        return Err(Error::SlabOutOfRange {
            slab,
            slabs: grid.slabs(),
        });
    }
    let (lo, hi) = (grid.slab_start(slab), grid.slab_end(slab));
    let slack = 4.0 * f64::EPSILON * grid.t_final();
    if !(t_from >= lo - slack && t_to <= hi + slack && t_from <= t_to) {
        return Err(Error::Domain {
            what: "step interval",
            value: t_to - t_from,
            range: format!("within slab [{lo}, {hi}]"),
        });
    }
    Ok(step_unchecked(model, grid.dt(), mode, increment, c, t_to - t_from))
}

fn step_unchecked(model: &Model, dt: f64, mode: usize, increment: f64, c: f64, len: f64) -> f64 {
    let r = model.rates(mode);
    c * (-r.kappa * len).exp() - r.lambda * increment / dt * decay_integral(r.kappa, len)
}

/// Mode `mode` of the canvas solution at time `t` driven by a unit increment on
/// slab `slab` (response is zero before the slab and decays freely after it).
fn canvas_impulse_response(
    model: &Model,
    grid: &NoiseGrid,
    mode: usize,
    slab: usize,
    t: f64,
) -> f64 {
    let (lo, hi) = (grid.slab_start(slab), grid.slab_end(slab));
    if t <= lo {
        return 0.0;
    }
    let inside = step_unchecked(model, grid.dt(), mode, 1.0, 0.0, t.min(hi) - lo);
    if t > hi {
        inside * (-model.rates(mode).kappa * (t - hi)).exp()
    } else {
        inside
    }
}

/// The exact canvas solution `𝗌u(t)`, chaining exact steps over complete slabs and the
/// final partial slab.
pub fn canvas_solution(model: &Model, noise: &NoiseMatrix, t: f64) -> Result<SpectralField> {
    let grid = noise.grid();
    crate::error::check_range("t", t, 0.0, grid.t_final())?;
    let mut field = SpectralField::zeros(grid.modes());
    for (j, c) in field.coeffs_mut().iter_mut().enumerate() {
        let mode = j + 1;
        for n in 1..=grid.slabs() {
            let lo = grid.slab_start(n);
            if lo >= t {
                break;
            }
            let hi = grid.slab_end(n).min(t);
            *c = step_unchecked(model, grid.dt(), mode, noise.get(n, mode), *c, hi - lo);
        }
    }
    Ok(field)
}

fn check_steps(steps: usize, m: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::Config("need at least one time step".into()));
    }
    if m > steps {
        return Err(Error::StepOutOfRange { step: m, steps });
    }
    Ok(())
}

/// Per-mode IMEX amplification `(1 + Δτμλ²)/(1 + Δτλ⁴)` split into numerator factor and
/// implicit divisor.
fn imex_factors(model: &Model, mode: usize, dtau: f64) -> (f64, f64) {
    let r = model.rates(mode);
    let l2 = r.lambda * r.lambda;
    (1.0 + dtau * model.mu() * l2, 1.0 + dtau * l2 * l2)
}

/// Whole trajectory `U^0..=U^steps` of the spectral IMEX time-discrete scheme.
pub fn timediscrete_trajectory(
    model: &Model,
    noise: &NoiseMatrix,
    steps: usize,
) -> Result<Vec<SpectralField>> {
    check_steps(steps, 0)?;
    let grid = noise.grid();
    let overlaps = grid.step_overlaps(steps)?;
    let dtau = grid.t_final() / steps as f64;
    let modes = grid.modes();
    let factors: Vec<(f64, f64, f64)> = (1..=modes)
        .map(|i| {
            let (a, d) = imex_factors(model, i, dtau);
            (a, d, model.rates(i).lambda / grid.dt())
        })
        .collect();
    let mut out = Vec::with_capacity(steps + 1);
    let mut c = vec![0.0; modes];
    out.push(SpectralField::new(c.clone()));
    for step in &overlaps {
        for (j, cj) in c.iter_mut().enumerate() {
            let (a, d, scale) = factors[j];
            let b: f64 = -scale * step.iter().map(|&(n, len)| noise.get(n, j + 1) * len).sum::<f64>();
            *cj = (a * *cj + b) / d;
        }
        out.push(SpectralField::new(c.clone()));
    }
    Ok(out)
}

/// `U^m` of the spectral IMEX time-discrete scheme with `steps` uniform steps on `[0, T]`.
pub fn timediscrete_solution(
    model: &Model,
    noise: &NoiseMatrix,
    steps: usize,
    m: usize,
) -> Result<SpectralField> {
    check_steps(steps, m)?;
    let mut traj = timediscrete_trajectory(model, noise, steps)?;
    Ok(traj.swap_remove(m))
}

/// Weight table of `𝗌u(t)`, built from unit-increment responses one `(slab, mode)` at a time.
pub fn canvas_weights(model: &Model, grid: &NoiseGrid, t: f64) -> Result<WeightTable> {
    crate::error::check_range("t", t, 0.0, grid.t_final())?;
    let mut table = WeightTable::zeros(grid.modes(), grid.slabs());
    for i in 1..=grid.modes() {
        let row = table.mode_row_mut(i);
        for (j, w) in row.iter_mut().enumerate() {
            *w = canvas_impulse_response(model, grid, i, j + 1, t);
        }
    }
    Ok(table)
}

/// Weight tables of `U^m` for every `m = 0..=steps`, from unit-increment runs.
pub fn timediscrete_weight_trajectory(
    model: &Model,
    grid: &NoiseGrid,
    steps: usize,
) -> Result<Vec<WeightTable>> {
    check_steps(steps, 0)?;
    let overlaps = grid.step_overlaps(steps)?;
    let dtau = grid.t_final() / steps as f64;
    let (modes, slabs) = (grid.modes(), grid.slabs());
    // per mode: response[m][n] for unit R[n][i]
    let per_mode: Vec<Vec<f64>> = (1..=modes)
        .into_par_iter()
        .map(|i| {
            let (a, d) = imex_factors(model, i, dtau);
            let scale = model.rates(i).lambda / grid.dt();
            let mut resp = vec![0.0; (steps + 1) * slabs];
            for n in 1..=slabs {
                let mut c = 0.0;
                for (m, step) in overlaps.iter().enumerate() {
                    let len: f64 = step.iter().filter(|p| p.0 == n).map(|p| p.1).sum();
                    c = (a * c - scale * len) / d;
                    resp[(m + 1) * slabs + n - 1] = c;
                }
            }
            resp
        })
        .collect();
    Ok((0..=steps)
        .map(|m| {
            let mut t = WeightTable::zeros(modes, slabs);
            for i in 1..=modes {
                t.mode_row_mut(i)
                    .copy_from_slice(&per_mode[i - 1][m * slabs..(m + 1) * slabs]);
            }
            t
        })
        .collect())
}

pub fn timediscrete_weights(
    model: &Model,
    grid: &NoiseGrid,
    steps: usize,
    m: usize,
) -> Result<WeightTable> {
    check_steps(steps, m)?;
    let mut all = timediscrete_weight_trajectory(model, grid, steps)?;
    Ok(all.swap_remove(m))
}

/// `E_TDR(τ_m)² = E‖𝗌u(τ_m) − U^m‖²`, exactly.
pub fn exact_etdr(model: &Model, grid: &NoiseGrid, steps: usize, m: usize) -> Result<f64> {
    check_steps(steps, m)?;
    Ok(etdr_profile(model, grid, steps)?[m])
}

/// `E_TDR(τ_m)²` for every `m = 0..=steps`.
pub fn etdr_profile(model: &Model, grid: &NoiseGrid, steps: usize) -> Result<Vec<f64>> {
    let discrete = timediscrete_weight_trajectory(model, grid, steps)?;
    let dtau = grid.t_final() / steps as f64;
    discrete
        .iter()
        .enumerate()
        .map(|(m, v)| {
            let tau = if m == steps { grid.t_final() } else { m as f64 * dtau };
            canvas_weights(model, grid, tau)?.distance_sq(v, grid.dt())
        })
        .collect()
}

/// `Θ(t)² = E‖u(t) − 𝗌u(t)‖²` split by mode range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSquared {
    /// Modes `i ≤ M` carried by the canvas noise.
    pub resolved: f64,
    /// Modes `M < i ≤ K_cut`, absent from the canvas noise.
    pub truncated: f64,
    /// Bound on modes beyond `K_cut`.
    pub tail_bound: f64,
}

impl ThetaSquared {
    pub fn value(&self) -> f64 {
        self.resolved + self.truncated
    }
}

/// Exact `Θ(t)²` from closed-form exponential integrals.
///
/// For `i ≤ M`, with `c_n = (1/Δt) ∫_{T_n∩(0,t)} e^{−κ_i(t−s)} ds`,
///
/// ```text
/// λ_i² [ ∫₀ᵗ e^{−2κ_i(t−s)} ds − 2 Σ_n c_n ∫_{T_n∩(0,t)} e^{−κ_i(t−s)} ds + Δt Σ_n c_n² ];
/// ```
///
/// the last sum runs over every slab meeting `(0, t)`, because an increment extending past
/// `t` still has variance `Δt`. Modes `M < i ≤ K_cut` contribute their full variance.
pub fn exact_theta(model: &Model, grid: &NoiseGrid, t: f64, k_cut: usize) -> Result<ThetaSquared> {
    crate::error::check_range("t", t, 0.0, grid.t_final())?;
    if t == 0.0 {
        return Ok(ThetaSquared {
            resolved: 0.0,
            truncated: 0.0,
            tail_bound: 0.0,
        });
    }
    if grid.modes() < model.min_resolved_modes() {
        log::warn!(
            "canvas error bound requires at least {} modes for mu = {}, got {}",
            model.min_resolved_modes(),
            model.mu(),
            grid.modes()
        );
    }
    let dt = grid.dt();
    let resolved: f64 = (1..=grid.modes().min(k_cut))
        .into_par_iter()
        .map(|i| {
            let r = model.rates(i);
            let full = decay_integral(2.0 * r.kappa, t);
            let (mut cross, mut square) = (0.0, 0.0);
            for n in 1..=grid.slabs() {
                let lo = grid.slab_start(n);
                if lo >= t {
                    break;
                }
                let hi = grid.slab_end(n).min(t);
                let integral = (-r.kappa * (t - hi)).exp() * decay_integral(r.kappa, hi - lo);
                let c = integral / dt;
                cross += c * integral;
                square += c * c * dt;
            }
            r.lambda * r.lambda * (full - 2.0 * cross + square)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .sum();
    let truncated: f64 = ((grid.modes() + 1)..=k_cut)
        .rev()
        .map(|i| {
            let r = model.rates(i);
            r.lambda * r.lambda * decay_integral(2.0 * r.kappa, t)
        })
        .sum();
    Ok(ThetaSquared {
        resolved,
        truncated,
        tail_bound: model.tail_bound(k_cut.max(grid.modes())),
    })
}
