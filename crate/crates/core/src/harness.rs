//! Convergence studies: parameter sweeps, exact and Monte Carlo errors, log–log rate fits.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_forms, timediscrete_deterministic_trajectory, BiharmonicSolver, DeterministicStepper,
    L2Comparator, Scheme, SplineSpace, StochasticStepper,
};
use crate::noise::{derive_seed, NoiseGrid, NoiseMatrix};
use crate::oracle::{
    canvas_solution, canvas_weights, etdr_profile, exact_theta, timediscrete_trajectory,
};
use crate::spectral::{Model, SpectralField, DEFAULT_K_CUT};

/// Fewest Monte Carlo samples for which a standard error is reported.
pub const MIN_SAMPLES: usize = 100;
/// Fewest sweep points of a rate study.
pub const MIN_SWEEP: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Mc,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Exact => "exact",
            Provenance::Mc => "mc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub param: f64,
    pub error: f64,
    pub method: String,
    pub provenance: Provenance,
    pub mc_stderr: Option<f64>,
}

/// Least-squares slope of `log error` against `log param`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    /// Standard error of the slope; zero for two points.
    pub stderr: f64,
    pub points: usize,
}

/// Fits `error ≈ C · param^slope`. Points with non-positive error are skipped.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(p, e)| *p > 0.0 && *e > 0.0 && e.is_finite())
        .map(|(p, e)| (p.ln(), e.ln()))
        .collect();
    let n = logs.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let nf = n as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("rate fit needs distinct parameter values".into()));
    }
    let slope = sxy / sxx;
    let stderr = if n > 2 {
        let ssr: f64 = logs
            .iter()
            .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
            .sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(RateFit {
        slope,
        stderr,
        points: n,
    })
}

/// Rows of one sweep, sorted by parameter, with the fitted rate when at least three rows
/// carry a positive error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub study: String,
    pub parameter: String,
    pub rows: Vec<ErrorRow>,
    pub fit: Option<RateFit>,
}

impl ErrorTable {
    pub fn new(study: &str, parameter: &str, mut rows: Vec<ErrorRow>) -> Self {
        rows.sort_by(|a, b| a.param.total_cmp(&b.param));
        let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.param, r.error)).collect();
        let usable = points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).count();
        let fit = if usable >= MIN_SWEEP {
            fit_rate(&points).ok()
        } else {
            None
        };
        Self {
            study: study.into(),
            parameter: parameter.into(),
            rows,
            fit,
        }
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    /// Whether the error strictly increases with the parameter (i.e. strictly decreases
    /// under refinement when the parameter is a step size).
    pub fn strictly_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].error < w[1].error)
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].error > w[1].error)
    }
}

fn exact_row(param: f64, error: f64, method: &str) -> ErrorRow {
    ErrorRow {
        param,
        error,
        method: method.into(),
        provenance: Provenance::Exact,
        mc_stderr: None,
    }
}

/// Studies reachable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StudyKind {
    DetTime,
    DetSpace,
    Canvas,
    Tdr,
    Sdr,
    Total,
}

impl StudyKind {
    pub const ALL: [StudyKind; 6] = [
        StudyKind::DetTime,
        StudyKind::DetSpace,
        StudyKind::Canvas,
        StudyKind::Tdr,
        StudyKind::Sdr,
        StudyKind::Total,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::DetTime => "det-time",
            StudyKind::DetSpace => "det-space",
            StudyKind::Canvas => "canvas",
            StudyKind::Tdr => "tdr",
            StudyKind::Sdr => "sdr",
            StudyKind::Total => "total",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.map(|k| k.name()).join(", ")
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown study '{s}'; valid studies: {}",
                    Self::valid_names()
                ))
            })
    }
}

/// Dials of a study. Sweeps are lists of counts: time steps, elements, modes or slabs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub t_final: f64,
    pub mu: f64,
    pub degree: usize,
    /// Sine coefficients of the deterministic initial value.
    pub w0: Vec<f64>,
    /// Time-step counts `M_steps` of a Δτ sweep.
    pub steps_sweep: Vec<usize>,
    /// Element counts of an h sweep.
    pub elements_sweep: Vec<usize>,
    /// `M_steps` held fixed in space studies.
    pub steps: usize,
    pub modes_sweep: Vec<usize>,
    pub slabs_sweep: Vec<usize>,
    /// Noise grid held fixed: slab count `N`.
    pub slabs: usize,
    /// Noise grid held fixed: mode count `M`.
    pub modes: usize,
    pub samples: usize,
    pub seed: u64,
    pub k_cut: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            mu: 1.0,
            degree: 3,
            w0: vec![1.0],
            steps_sweep: vec![64, 128, 256, 512, 1024],
            elements_sweep: vec![8, 16, 32, 64],
            steps: 4096,
            modes_sweep: vec![8, 16, 32, 64, 128],
            slabs_sweep: (4..=12).map(|p| 1usize << p).collect(),
            slabs: 16,
            modes: 16,
            samples: 1000,
            seed: 20170401,
            k_cut: DEFAULT_K_CUT,
        }
    }
}

impl StudyConfig {
    /// Default dials of each study.
    pub fn for_study(kind: StudyKind) -> Self {
        let base = Self::default();
        match kind {
            StudyKind::DetTime | StudyKind::DetSpace => base,
            StudyKind::Canvas => Self {
                mu: 0.0,
                slabs: 4096,
                modes: 128,
                ..base
            },
            StudyKind::Tdr => Self {
                mu: 0.0,
                steps_sweep: (6..=11).map(|p| 1usize << p).collect(),
                ..base
            },
            StudyKind::Sdr | StudyKind::Total => Self {
                mu: 0.0,
                steps: 64,
                ..base
            },
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::new(self.mu)
    }

    pub fn grid(&self) -> Result<NoiseGrid> {
        NoiseGrid::new(self.t_final, self.slabs, self.modes)
    }

    pub fn apply(&mut self, o: ConfigOverrides) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        set!(
            t_final,
            mu,
            degree,
            w0,
            steps_sweep,
            elements_sweep,
            steps,
            modes_sweep,
            slabs_sweep,
            slabs,
            modes,
            samples,
            seed,
            k_cut
        );
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if !self.mu.is_finite() {
            return Err(Error::Config("mu must be finite".into()));
        }
        if !(2..=3).contains(&self.degree) {
            return Err(Error::Degree(self.degree));
        }
        for (name, sweep) in [
            ("steps_sweep", &self.steps_sweep),
            ("elements_sweep", &self.elements_sweep),
            ("modes_sweep", &self.modes_sweep),
            ("slabs_sweep", &self.slabs_sweep),
        ] {
            if sweep.contains(&0) {
                return Err(Error::Config(format!("{name} values must be positive")));
            }
        }
        for (name, v) in [("steps", self.steps), ("slabs", self.slabs), ("k_cut", self.k_cut)] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.w0.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("w0 coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// Partial [`StudyConfig`] as read from a configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub t_final: Option<f64>,
    pub mu: Option<f64>,
    pub degree: Option<usize>,
    pub w0: Option<Vec<f64>>,
    pub steps_sweep: Option<Vec<usize>>,
    pub elements_sweep: Option<Vec<usize>>,
    pub steps: Option<usize>,
    pub modes_sweep: Option<Vec<usize>>,
    pub slabs_sweep: Option<Vec<usize>>,
    pub slabs: Option<usize>,
    pub modes: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub k_cut: Option<usize>,
}

fn need_sweep(sweep: &[usize]) -> Result<()> {
    if sweep.len() < MIN_SWEEP {
        return Err(Error::TooFewPoints {
            needed: MIN_SWEEP,
            got: sweep.len(),
        });
    }
    Ok(())
}

fn need_samples(samples: usize) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples,
        });
    }
    Ok(())
}

/// `(Δτ Σ_{m≥1} ‖W^m − w(τ_m)‖²)^{1/2}` of the modified IMEX recurrence against the
/// semigroup, for each `M_steps` in the sweep; parameter is `Δτ`.
pub fn det_time_rate_study(cfg: &StudyConfig) -> Result<ErrorTable> {
    cfg.validate()?;
    need_sweep(&cfg.steps_sweep)?;
    let model = cfg.model()?;
    let w0 = SpectralField::new(cfg.w0.clone());
    let rows = cfg
        .steps_sweep
        .par_iter()
        .map(|&steps| {
            let dtau = cfg.t_final / steps as f64;
            let traj = timediscrete_deterministic_trajectory(&model, &w0, cfg.t_final, steps)?;
            let mut sum = 0.0;
            for (m, w) in traj.iter().enumerate().skip(1) {
                let exact = w0.semigroup_apply(&model, m as f64 * dtau)?;
                sum += (w - &exact).l2_norm_sq();
            }
            Ok(exact_row(dtau, (dtau * sum).sqrt(), "modified-imex"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorTable::new("det-time", "dtau", rows))
}

/// `(Δτ Σ_{m≥1} ‖W^m − W_h^m‖²)^{1/2}` at fixed `Δτ = T/steps`; parameter is `h`.
pub fn det_space_rate_study(cfg: &StudyConfig) -> Result<ErrorTable> {
    cfg.validate()?;
    need_sweep(&cfg.elements_sweep)?;
    let model = cfg.model()?;
    let w0 = SpectralField::new(cfg.w0.clone());
    let spectral = timediscrete_deterministic_trajectory(&model, &w0, cfg.t_final, cfg.steps)?;
    let rows = cfg
        .elements_sweep
        .par_iter()
        .map(|&elements| {
            let space = SplineSpace::new(elements, cfg.degree)?;
            let forms = assemble_forms(&space);
            let cmp = L2Comparator::new(&space, w0.modes());
            let stepper = DeterministicStepper::new(&forms, &model, cfg.t_final, cfg.steps)?;
            let mut sum = 0.0;
            stepper.run_with(&w0, |m, w| {
                if m > 0 {
                    sum += cmp.distance_sq(&spectral[m], w);
                }
            })?;
            Ok(exact_row(
                space.h(),
                (stepper.dtau() * sum).sqrt(),
                &format!("imex-fem-r{}", cfg.degree),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorTable::new("det-space", "h", rows))
}

/// `‖T_B w₀ − T_{B,h} w₀‖` over the element sweep; parameter is `h`.
pub fn elliptic_rate_study(cfg: &StudyConfig) -> Result<ErrorTable> {
    cfg.validate()?;
    need_sweep(&cfg.elements_sweep)?;
    let f = SpectralField::new(cfg.w0.clone());
    let exact = f.apply_tb();
    let rows = cfg
        .elements_sweep
        .par_iter()
        .map(|&elements| {
            let space = SplineSpace::new(elements, cfg.degree)?;
            let forms = assemble_forms(&space);
            let v = BiharmonicSolver::new(&forms)?.apply(&f);
            let d = L2Comparator::new(&space, f.modes()).distance_sq(&exact, v.values());
            Ok(exact_row(space.h(), d.sqrt(), &format!("tbh-r{}", cfg.degree)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorTable::new("elliptic", "h", rows))
}

/// The three tables of the canvas study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanvasStudy {
    /// `Θ(T)` against `M` at `N = slabs`.
    pub modes: ErrorTable,
    /// `Θ(T)` against `Δt` at `M = modes`.
    pub slabs: ErrorTable,
    /// The part of `Θ(T)` carried by modes beyond `M`, against `M`.
    pub truncated: ErrorTable,
}

pub fn canvas_error_study(cfg: &StudyConfig) -> Result<CanvasStudy> {
    cfg.validate()?;
    need_sweep(&cfg.modes_sweep)?;
    need_sweep(&cfg.slabs_sweep)?;
    let model = cfg.model()?;
    let t = cfg.t_final;
    let by_modes = cfg
        .modes_sweep
        .iter()
        .map(|&m| {
            let grid = NoiseGrid::new(t, cfg.slabs, m)?;
            let th = exact_theta(&model, &grid, t, cfg.k_cut)?;
            Ok((m, th))
        })
        .collect::<Result<Vec<_>>>()?;
    let modes = ErrorTable::new(
        "canvas",
        "modes",
        by_modes
            .iter()
            .map(|(m, th)| exact_row(*m as f64, th.value().sqrt(), "theta"))
            .collect(),
    );
    let truncated = ErrorTable::new(
        "canvas",
        "modes",
        by_modes
            .iter()
            .map(|(m, th)| exact_row(*m as f64, th.truncated.sqrt(), "theta-truncated"))
            .collect(),
    );
    let slab_rows = cfg
        .slabs_sweep
        .iter()
        .map(|&n| {
            let grid = NoiseGrid::new(t, n, cfg.modes)?;
            let th = exact_theta(&model, &grid, t, cfg.k_cut)?;
            Ok(exact_row(grid.dt(), th.value().sqrt(), "theta"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CanvasStudy {
        modes,
        slabs: ErrorTable::new("canvas", "dt", slab_rows),
        truncated,
    })
}

/// `max_m E_TDR(τ_m)` from exact weight tables on the fixed noise grid; parameter is `Δτ`.
pub fn tdr_rate_study(cfg: &StudyConfig) -> Result<ErrorTable> {
    cfg.validate()?;
    need_sweep(&cfg.steps_sweep)?;
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let rows = cfg
        .steps_sweep
        .iter()
        .map(|&steps| {
            let max = etdr_profile(&model, &grid, steps)?
                .into_iter()
                .fold(0.0f64, f64::max);
            Ok(exact_row(cfg.t_final / steps as f64, max.sqrt(), "imex-spectral"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorTable::new("tdr", "dtau", rows))
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let stderr = if n < 2 || values.iter().all(|v| *v == values[0]) {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            (var / nf).sqrt()
        };
        Self {
            mean,
            stderr,
            samples: n,
        }
    }

    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

/// Averages `f` over `samples` noise realizations; sample `s` uses seed
/// `derive_seed(seed, s)`, independent of the caller's sweep position.
pub fn mc_estimator<F>(grid: &NoiseGrid, samples: usize, seed: u64, f: F) -> Result<McEstimate>
where
    F: Fn(&NoiseMatrix) -> Result<f64> + Sync,
{
    need_samples(samples)?;
    let values = (0..samples)
        .into_par_iter()
        .map(|s| f(&NoiseMatrix::sample(*grid, derive_seed(seed, s as u64))))
        .collect::<Result<Vec<_>>>()?;
    Ok(McEstimate::from_values(&values))
}

/// Monte Carlo `E‖𝗌u(τ_m) − U^m‖²` of the spectral IMEX scheme.
pub fn etdr_mc(
    model: &Model,
    grid: &NoiseGrid,
    steps: usize,
    m: usize,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if m > steps {
        return Err(Error::StepOutOfRange { step: m, steps });
    }
    let tau = if m == steps {
        grid.t_final()
    } else {
        m as f64 * grid.t_final() / steps as f64
    };
    mc_estimator(grid, samples, seed, |noise| {
        let u = crate::oracle::timediscrete_solution(model, noise, steps, m)?;
        Ok((&canvas_solution(model, noise, tau)? - &u).l2_norm_sq())
    })
}

/// Per-`h` profiles of `E‖U^m − U_h^m‖²` estimated with common random numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdrEstimate {
    pub elements: Vec<usize>,
    /// `profiles[j][m]`: mean squared distance for `elements[j]` at step `m`.
    pub profiles: Vec<Vec<McEstimate>>,
}

impl SdrEstimate {
    /// `max_m` of the root mean square, and the delta-method standard error at the maximum.
    pub fn max_rms(&self, j: usize) -> (f64, f64) {
        let best = self.profiles[j]
            .iter()
            .max_by(|a, b| a.mean.total_cmp(&b.mean))
            .expect("nonempty profile");
        let rms = best.mean.sqrt();
        let se = if rms > 0.0 { best.stderr / (2.0 * rms) } else { 0.0 };
        (rms, se)
    }
}

/// Runs every sample through the spectral time-discrete scheme and the FEM scheme at each
/// mesh, driven by the same increments.
pub fn sdr_estimate(cfg: &StudyConfig) -> Result<SdrEstimate> {
    cfg.validate()?;
    need_samples(cfg.samples)?;
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let meshes = cfg
        .elements_sweep
        .iter()
        .map(|&e| {
            let space = SplineSpace::new(e, cfg.degree)?;
            let forms = assemble_forms(&space);
            let stepper = StochasticStepper::new(&forms, &model, &grid, cfg.steps, Scheme::Imex)?;
            Ok((stepper, L2Comparator::new(&space, grid.modes())))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_sample = (0..cfg.samples)
        .into_par_iter()
        .map(|s| {
            let noise = NoiseMatrix::sample(grid, derive_seed(cfg.seed, s as u64));
            let spectral = timediscrete_trajectory(&model, &noise, cfg.steps)?;
            meshes
                .iter()
                .map(|(stepper, cmp)| {
                    let mut d = vec![0.0; cfg.steps + 1];
                    stepper.run_with(&noise, |m, u| d[m] = cmp.distance_sq(&spectral[m], u))?;
                    Ok(d)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let profiles = (0..meshes.len())
        .map(|j| {
            (0..=cfg.steps)
                .map(|m| {
                    let v: Vec<f64> = per_sample.iter().map(|s| s[j][m]).collect();
                    McEstimate::from_values(&v)
                })
                .collect()
        })
        .collect();
    Ok(SdrEstimate {
        elements: cfg.elements_sweep.clone(),
        profiles,
    })
}

/// `max_m (E‖U^m − U_h^m‖²)^{1/2}` over the element sweep; parameter is `h`.
pub fn sdr_rate_study(cfg: &StudyConfig) -> Result<ErrorTable> {
    need_sweep(&cfg.elements_sweep)?;
    let est = sdr_estimate(cfg)?;
    Ok(sdr_table(cfg, &est))
}

fn sdr_table(cfg: &StudyConfig, est: &SdrEstimate) -> ErrorTable {
    let rows = est
        .elements
        .iter()
        .enumerate()
        .map(|(j, &e)| {
            let (rms, se) = est.max_rms(j);
            ErrorRow {
                param: 1.0 / e as f64,
                error: rms,
                method: format!("imex-fem-r{}", cfg.degree),
                provenance: Provenance::Mc,
                mc_stderr: Some(se),
            }
        })
        .collect();
    ErrorTable::new("sdr", "h", rows)
}

/// One mesh of the total-error assembly. `total` is the triangle-inequality bound
/// `model + tdr + sdr` on `max_m (E‖u(τ_m) − U_h^m‖²)^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalRow {
    pub h: f64,
    pub model: f64,
    pub tdr: f64,
    pub sdr: f64,
    pub sdr_stderr: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalStudy {
    pub steps: usize,
    pub rows: Vec<TotalRow>,
    pub sdr: ErrorTable,
}

/// Canvas error (max over `τ_m`), time-discretization error at `steps` and the space
/// error at each mesh of the sweep.
pub fn total_error_study(cfg: &StudyConfig) -> Result<TotalStudy> {
    cfg.validate()?;
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let dtau = cfg.t_final / cfg.steps as f64;
    let theta = (0..=cfg.steps)
        .into_par_iter()
        .map(|m| {
            let t = if m == cfg.steps { cfg.t_final } else { m as f64 * dtau };
            exact_theta(&model, &grid, t, cfg.k_cut).map(|th| th.value())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max)
        .sqrt();
    let tdr = etdr_profile(&model, &grid, cfg.steps)?
        .into_iter()
        .fold(0.0f64, f64::max)
        .sqrt();
    let est = sdr_estimate(cfg)?;
    let rows = est
        .elements
        .iter()
        .enumerate()
        .map(|(j, &e)| {
            let (sdr, se) = est.max_rms(j);
            TotalRow {
                h: 1.0 / e as f64,
                model: theta,
                tdr,
                sdr,
                sdr_stderr: se,
                total: theta + tdr + sdr,
            }
        })
        .collect();
    Ok(TotalStudy {
        steps: cfg.steps,
        rows,
        sdr: sdr_table(cfg, &est),
    })
}

/// Norm histories of the IMEX and backward Euler schemes on one noise path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub dtau: f64,
    pub imex_norms: Vec<f64>,
    pub be_norms: Vec<f64>,
    pub be_negative_pivots: usize,
    /// Spectral radii of the homogeneous step maps.
    pub imex_amplification: f64,
    pub be_amplification: f64,
}

impl StabilityReport {
    /// `(‖U^M‖/‖U^{M/2}‖)^{1/(M−M/2)}`, the mean per-step growth over the second half.
    pub fn growth_factor(norms: &[f64]) -> f64 {
        let steps = norms.len() - 1;
        let half = steps / 2;
        if norms[half] == 0.0 {
            return 0.0;
        }
        (norms[steps] / norms[half]).powf(1.0 / (steps - half) as f64)
    }

    /// No growth trend: the second-half maximum stays within ten times the first-half one.
    pub fn is_bounded(norms: &[f64]) -> bool {
        let half = norms.len() / 2;
        let first = norms[..half].iter().fold(0.0f64, |a, b| a.max(*b));
        let second = norms[half..].iter().fold(0.0f64, |a, b| a.max(*b));
        second.is_finite() && second <= 10.0 * first
    }

    pub fn imex_growth(&self) -> f64 {
        Self::growth_factor(&self.imex_norms)
    }

    pub fn be_growth(&self) -> f64 {
        Self::growth_factor(&self.be_norms)
    }
}

pub fn stability_contrast(cfg: &StudyConfig, elements: usize) -> Result<StabilityReport> {
    cfg.validate()?;
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let space = SplineSpace::new(elements, cfg.degree)?;
    let forms = assemble_forms(&space);
    let noise = NoiseMatrix::sample(grid, cfg.seed);
    let norms = |scheme| -> Result<(Vec<f64>, StochasticStepper)> {
        let s = StochasticStepper::new(&forms, &model, &grid, cfg.steps, scheme)?;
        let mut out = Vec::with_capacity(cfg.steps + 1);
        s.run_with(&noise, |_, u| out.push(forms.mass.quadratic_form(u).max(0.0).sqrt()))?;
        Ok((out, s))
    };
    let (imex_norms, imex) = norms(Scheme::Imex)?;
    let (be_norms, be) = norms(Scheme::BackwardEuler)?;
    Ok(StabilityReport {
        dtau: cfg.t_final / cfg.steps as f64,
        imex_norms,
        be_norms,
        be_negative_pivots: be.factorization().negative_pivots(),
        imex_amplification: imex.amplification(),
        be_amplification: be.amplification(),
    })
}

/// `max_m (E‖𝗌u(τ_m)‖²)^{1/2}` from the exact weight tables.
pub fn canvas_rms_scale(model: &Model, grid: &NoiseGrid, steps: usize) -> Result<f64> {
    let dtau = grid.t_final() / steps as f64;
    let mut max = 0.0f64;
    for m in 0..=steps {
        let t = if m == steps { grid.t_final() } else { m as f64 * dtau };
        max = max.max(canvas_weights(model, grid, t)?.second_moment(grid.dt()));
    }
    Ok(max.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitter_recovers_exact_slopes() {
        let f = fit_rate(&[(0.1, 1e-3), (0.05, 1.25e-4)]).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = (0..6).map(|k| {
            let h = 0.5f64.powi(k);
            (h, 7.0 * h.powf(1.7))
        }).collect();
        let f = fit_rate(&pts).unwrap();
        assert!((f.slope - 1.7).abs() < 1e-12);
        assert!(f.stderr < 1e-12);
        assert!(fit_rate(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn study_names_round_trip() {
        for k in StudyKind::ALL {
            assert_eq!(k.name().parse::<StudyKind>().unwrap(), k);
        }
        let err = "bogus".parse::<StudyKind>().unwrap_err().to_string();
        assert!(err.contains("det-time") && err.contains("total"));
    }

    #[test]
    fn zero_initial_value_gives_zero_errors() {
        let cfg = StudyConfig {
            w0: vec![0.0],
            ..StudyConfig::default()
        };
        let t = det_time_rate_study(&cfg).unwrap();
        assert!(t.rows.iter().all(|r| r.error == 0.0));
        assert!(t.fit.is_none());
        let s = det_space_rate_study(&StudyConfig { steps: 16, ..cfg }).unwrap();
        assert!(s.rows.iter().all(|r| r.error == 0.0));
    }

    #[test]
    fn short_sweeps_and_few_samples_are_refused() {
        let cfg = StudyConfig {
            steps_sweep: vec![4, 8],
            ..StudyConfig::default()
        };
        assert!(matches!(det_time_rate_study(&cfg), Err(Error::TooFewPoints { .. })));
        let grid = NoiseGrid::new(1.0, 2, 2).unwrap();
        assert!(matches!(
            mc_estimator(&grid, 99, 0, |_| Ok(1.0)),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn deterministic_integrand_has_zero_stderr() {
        let grid = NoiseGrid::new(1.0, 2, 2).unwrap();
        let e = mc_estimator(&grid, 100, 1, |_| Ok(0.3)).unwrap();
        assert_eq!(e.stderr, 0.0);
        assert!((e.mean - 0.3).abs() < 1e-15);
    }

    #[test]
    fn mc_is_deterministic_and_scales_like_clt() {
        let grid = NoiseGrid::new(1.0, 4, 3).unwrap();
        let model = Model::new(0.0).unwrap();
        let f = |n: &NoiseMatrix| Ok(canvas_solution(&model, n, 1.0)?.l2_norm_sq());
        let a = mc_estimator(&grid, 2000, 5, f).unwrap();
        let b = mc_estimator(&grid, 2000, 5, f).unwrap();
        assert_eq!(a, b);
        let c = mc_estimator(&grid, 4000, 5, f).unwrap();
        let ratio = c.stderr / a.stderr;
        assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.2 * std::f64::consts::FRAC_1_SQRT_2);
    }

    #[test]
    fn zero_noise_sdr_is_zero() {
        let cfg = StudyConfig {
            modes: 0,
            samples: 100,
            steps: 8,
            elements_sweep: vec![4, 8, 16],
            ..StudyConfig::for_study(StudyKind::Sdr)
        };
        let t = sdr_rate_study(&cfg).unwrap();
        assert!(t.rows.iter().all(|r| r.error == 0.0));
    }

    #[test]
    fn total_bound_dominates_components() {
        let cfg = StudyConfig {
            samples: 100,
            steps: 16,
            slabs: 8,
            modes: 8,
            elements_sweep: vec![4, 8, 16],
            ..StudyConfig::for_study(StudyKind::Total)
        };
        let t = total_error_study(&cfg).unwrap();
        for r in &t.rows {
            assert!(r.total >= r.model && r.total >= r.tdr && r.total >= r.sdr);
        }
    }

    #[test]
    fn overrides_apply_and_reject_nothing_silently() {
        let mut cfg = StudyConfig::default();
        cfg.apply(ConfigOverrides {
            mu: Some(4.0),
            elements_sweep: Some(vec![2, 4, 8]),
            ..Default::default()
        });
        assert_eq!(cfg.mu, 4.0);
        assert_eq!(cfg.elements_sweep, vec![2, 4, 8]);
        assert!(StudyConfig { degree: 5, ..cfg.clone() }.validate().is_err());
        assert!(StudyConfig { slabs_sweep: vec![0, 2, 4], ..cfg }.validate().is_err());
    }
}
