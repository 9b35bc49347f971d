//! Fully discrete time stepping on a [`SplineSpace`].

use std::sync::Arc;

use super::banded::{BandedSymMatrix, Factorization};
use super::forms::Forms;
use super::load::LoadTable;
use super::spline::{FemField, SplineSpace};
use crate::error::{Error, Result};
use crate::noise::{NoiseGrid, NoiseMatrix};
use crate::spectral::{Model, SpectralField};

fn check_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::Config("need at least one time step".into()));
    }
    Ok(())
}

/// Which fully discrete scheme a [`StochasticStepper`] realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// `(M + ΔτB) U^m = (M + ΔτμG) U^{m−1} + b^m`
    Imex,
    /// `(M + ΔτB − ΔτμG) U^m = M U^{m−1} + b^m`
    BackwardEuler,
}

/// A stochastic stepper for one `(space, model, noise grid, Δτ)`; the factorization and
/// load rows are shared read-only by every sample run through it.
#[derive(Debug, Clone)]
pub struct StochasticStepper {
    space: Arc<SplineSpace>,
    scheme: Scheme,
    grid: NoiseGrid,
    steps: usize,
    dtau: f64,
    system: BandedSymMatrix,
    rhs: BandedSymMatrix,
    factor: Factorization,
    loads: LoadTable,
    /// `−λ_i / Δt`
    scales: Vec<f64>,
    overlaps: Vec<Vec<(usize, f64)>>,
    refactor_each_step: bool,
}

impl StochasticStepper {
    pub fn new(
        forms: &Forms,
        model: &Model,
        grid: &NoiseGrid,
        steps: usize,
        scheme: Scheme,
    ) -> Result<Self> {
        check_steps(steps)?;
        let dtau = grid.t_final() / steps as f64;
        let mu = model.mu();
        let (system, rhs) = match scheme {
            Scheme::Imex => (
                BandedSymMatrix::combination(&[(1.0, &forms.mass), (dtau, &forms.bending)]),
                BandedSymMatrix::combination(&[(1.0, &forms.mass), (dtau * mu, &forms.grad)]),
            ),
            Scheme::BackwardEuler => (
                BandedSymMatrix::combination(&[
                    (1.0, &forms.mass),
                    (dtau, &forms.bending),
                    (-dtau * mu, &forms.grad),
                ]),
                forms.mass.clone(),
            ),
        };
        let factor = match scheme {
            Scheme::Imex => system.cholesky()?,
            Scheme::BackwardEuler => system.factorize()?,
        };
        if factor.negative_pivots() > 0 {
            log::warn!(
                "backward Euler system is indefinite ({} negative pivots): Δτμ² = {:.3}",
                factor.negative_pivots(),
                dtau * mu * mu
            );
        }
        Ok(Self {
            space: forms.space.clone(),
            scheme,
            grid: *grid,
            steps,
            dtau,
            system,
            rhs,
            factor,
            loads: LoadTable::new(&forms.space, grid.modes()),
            scales: (1..=grid.modes())
                .map(|i| -model.rates(i).lambda / grid.dt())
                .collect(),
            overlaps: grid.step_overlaps(steps)?,
            refactor_each_step: false,
        })
    }

    /// Factorize the system matrix afresh at every step instead of reusing one factor.
    pub fn with_refactorization(mut self, on: bool) -> Self {
        self.refactor_each_step = on;
        self
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn space(&self) -> &Arc<SplineSpace> {
        &self.space
    }

    pub fn grid(&self) -> &NoiseGrid {
        &self.grid
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factor
    }

    /// Spectral radius of the homogeneous step map `U^{m−1} ↦ U^m`, by power iteration.
    pub fn amplification(&self) -> f64 {
        let dim = self.space.dim();
        let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + 0.37 * ((i * 7) % 11) as f64).collect();
        let mut w = vec![0.0; dim];
        let mut rho = 0.0;
        for _ in 0..4000 {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            self.rhs.matvec_into(&v, &mut w);
            self.factor.solve_in_place(&mut w);
            let next = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            std::mem::swap(&mut v, &mut w);
            if (next - rho).abs() <= 1e-14 * next {
                return next;
            }
            rho = next;
        }
        rho
    }

    /// Runs one sample, passing `(m, U^m)` for `m = 0..=steps` to `visit`.
    pub fn run_with(&self, noise: &NoiseMatrix, mut visit: impl FnMut(usize, &[f64])) -> Result<()> {
        if noise.grid() != &self.grid {
            return Err(Error::Config("noise grid does not match the stepper".into()));
        }
        let dim = self.space.dim();
        let mut u = vec![0.0; dim];
        let mut next = vec![0.0; dim];
        let mut load = vec![0.0; dim];
        let mut g = vec![0.0; self.grid.modes()];
        visit(0, &u);
        for (m, step) in self.overlaps.iter().enumerate() {
            for (i, gi) in g.iter_mut().enumerate() {
                *gi = self.scales[i]
                    * step.iter().map(|&(n, len)| noise.get(n, i + 1) * len).sum::<f64>();
            }
            self.loads.load_into(&g, &mut load);
            self.rhs.matvec_into(&u, &mut next);
            for (a, b) in next.iter_mut().zip(&load) {
                *a += b;
            }
            if self.refactor_each_step {
                self.system.factorize()?.solve_in_place(&mut next);
            } else {
                self.factor.solve_in_place(&mut next);
            }
            std::mem::swap(&mut u, &mut next);
            visit(m + 1, &u);
        }
        Ok(())
    }

    pub fn run(&self, noise: &NoiseMatrix) -> Result<Vec<FemField>> {
        let mut out = Vec::with_capacity(self.steps + 1);
        self.run_with(noise, |_, u| {
            out.push(FemField::new(self.space.clone(), u.to_vec()).expect("dimension"))
        })?;
        Ok(out)
    }
}

/// `U_h^0..=U_h^M` of the stochastic IMEX scheme with `U_h^0 = 0`.
pub fn imex_stochastic_run(
    forms: &Forms,
    model: &Model,
    noise: &NoiseMatrix,
    steps: usize,
) -> Result<Vec<FemField>> {
    StochasticStepper::new(forms, model, noise.grid(), steps, Scheme::Imex)?.run(noise)
}

/// Backward Euler trajectory together with the inertia of its system matrix.
#[derive(Debug, Clone)]
pub struct BackwardEulerRun {
    pub fields: Vec<FemField>,
    pub negative_pivots: usize,
}

impl BackwardEulerRun {
    pub fn is_indefinite(&self) -> bool {
        self.negative_pivots > 0
    }
}

pub fn backward_euler_run(
    forms: &Forms,
    model: &Model,
    noise: &NoiseMatrix,
    steps: usize,
) -> Result<BackwardEulerRun> {
    let stepper =
        StochasticStepper::new(forms, model, noise.grid(), steps, Scheme::BackwardEuler)?;
    Ok(BackwardEulerRun {
        fields: stepper.run(noise)?,
        negative_pivots: stepper.factor.negative_pivots(),
    })
}

/// `L²` projection `P_h f`.
pub fn l2_projection(forms: &Forms, f: &SpectralField) -> Result<FemField> {
    let load = LoadTable::new(&forms.space, f.modes()).load(f);
    let values = forms.mass.cholesky()?.solve(&load);
    FemField::new(forms.space.clone(), values)
}

/// The deterministic modified IMEX scheme: `W⁰ = P_h w₀`, a first step without the
/// explicit `μ` term, then `(M + ΔτB) W^m = (M + ΔτμG) W^{m−1}`.
#[derive(Debug, Clone)]
pub struct DeterministicStepper {
    forms: Forms,
    steps: usize,
    dtau: f64,
    rhs: BandedSymMatrix,
    factor: Factorization,
}

impl DeterministicStepper {
    pub fn new(forms: &Forms, model: &Model, t_final: f64, steps: usize) -> Result<Self> {
        check_steps(steps)?;
        crate::error::check_range("T", t_final, f64::MIN_POSITIVE, f64::MAX)?;
        let dtau = t_final / steps as f64;
        let system = BandedSymMatrix::combination(&[(1.0, &forms.mass), (dtau, &forms.bending)]);
        Ok(Self {
            forms: forms.clone(),
            steps,
            dtau,
            rhs: BandedSymMatrix::combination(&[
                (1.0, &forms.mass),
                (dtau * model.mu(), &forms.grad),
            ]),
            factor: system.cholesky()?,
        })
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn run_with(&self, w0: &SpectralField, mut visit: impl FnMut(usize, &[f64])) -> Result<()> {
        let mut w = l2_projection(&self.forms, w0)?.into_values();
        let mut next = vec![0.0; w.len()];
        visit(0, &w);
        for m in 1..=self.steps {
            if m == 1 {
                self.forms.mass.matvec_into(&w, &mut next);
            } else {
                self.rhs.matvec_into(&w, &mut next);
            }
            self.factor.solve_in_place(&mut next);
            std::mem::swap(&mut w, &mut next);
            visit(m, &w);
        }
        Ok(())
    }

    pub fn run(&self, w0: &SpectralField) -> Result<Vec<FemField>> {
        let mut out = Vec::with_capacity(self.steps + 1);
        let space = self.forms.space.clone();
        self.run_with(w0, |_, w| {
            out.push(FemField::new(space.clone(), w.to_vec()).expect("dimension"))
        })?;
        Ok(out)
    }
}

pub fn imex_deterministic_run(
    forms: &Forms,
    model: &Model,
    w0: &SpectralField,
    t_final: f64,
    steps: usize,
) -> Result<Vec<FemField>> {
    DeterministicStepper::new(forms, model, t_final, steps)?.run(w0)
}

/// Spectral realization `W^0..=W^M` of the modified IMEX scheme:
/// `c¹ = c⁰/(1 + Δτλ⁴)`, then `c^m = c^{m−1}(1 + Δτμλ²)/(1 + Δτλ⁴)`.
pub fn timediscrete_deterministic_trajectory(
    model: &Model,
    w0: &SpectralField,
    t_final: f64,
    steps: usize,
) -> Result<Vec<SpectralField>> {
    check_steps(steps)?;
    let dtau = t_final / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(w0.clone());
    for m in 1..=steps {
        let prev = &out[m - 1];
        let next = prev.map_modes(|k, c| {
            let r = model.rates(k);
            let l2 = r.lambda * r.lambda;
            let explicit = if m == 1 { 1.0 } else { 1.0 + dtau * model.mu() * l2 };
            c * explicit / (1.0 + dtau * l2 * l2)
        });
        out.push(next);
    }
    Ok(out)
}

pub fn timediscrete_deterministic(
    model: &Model,
    w0: &SpectralField,
    t_final: f64,
    steps: usize,
    m: usize,
) -> Result<SpectralField> {
    if m > steps {
        return Err(Error::StepOutOfRange { step: m, steps });
    }
    let mut traj = timediscrete_deterministic_trajectory(model, w0, t_final, steps)?;
    Ok(traj.swap_remove(m))
}

/// The discrete biharmonic solution operator `T_{B,h} = B_h^{−1} P_h`.
#[derive(Debug, Clone)]
pub struct BiharmonicSolver {
    forms: Forms,
    factor: Factorization,
}

impl BiharmonicSolver {
    pub fn new(forms: &Forms) -> Result<Self> {
        Ok(Self {
            forms: forms.clone(),
            factor: forms.bending.cholesky()?,
        })
    }

    pub fn apply(&self, f: &SpectralField) -> FemField {
        let load = LoadTable::new(&self.forms.space, f.modes()).load(f);
        FemField::new(self.forms.space.clone(), self.factor.solve(&load)).expect("dimension")
    }

    pub fn apply_fem(&self, f: &FemField) -> Result<FemField> {
        if f.space() != &self.forms.space {
            return Err(Error::Config("field lives on a different spline space".into()));
        }
        let load = self.forms.mass.matvec(f.values());
        FemField::new(self.forms.space.clone(), self.factor.solve(&load))
    }
}

pub fn apply_tbh(forms: &Forms, f: &SpectralField) -> Result<FemField> {
    Ok(BiharmonicSolver::new(forms)?.apply(f))
}
