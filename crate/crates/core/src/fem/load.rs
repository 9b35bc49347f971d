//! Exact load integrals `(ε_i, χ_j)` and spectral–FEM comparisons.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use super::quadrature::gauss_on;
use super::spline::SplineSpace;
use crate::spectral::SpectralField;

/// Below this `λh` the moments are summed from the power series of the sine.
const SERIES_SWITCH: f64 = 1.0;

/// Moments `I_p = ∫₀^h s^p sin(λs + φ) ds` for `p = 0..=pmax`.
///
/// For `λh > 1` the closed-form antiderivative is unrolled by parts,
/// `S_p = −h^p cos(λh+φ)/λ + (p/λ) C_{p−1}`, `C_p = h^p sin(λh+φ)/λ − (p/λ) S_{p−1}`.
/// For small `λh` that recurrence cancels, and the exact series
/// `I_p = Σ_k λ^k sin(φ + kπ/2) h^{p+k+1} / (k! (p+k+1))` is summed instead.
pub fn sine_moments(lambda: f64, phase: f64, h: f64, pmax: usize) -> Vec<f64> {
    let theta = lambda * h;
    if theta <= SERIES_SWITCH {
        let (sp, cp) = phase.sin_cos();
        let cycle = [sp, cp, -sp, -cp];
        (0..=pmax)
            .map(|p| {
                let mut acc = 0.0;
                let mut lk = 1.0; // (λh)^k / k!
                for k in 0..60 {
                    if k > 0 {
                        lk *= theta / k as f64;
                    }
                    let term = lk * cycle[k % 4] / (p + k + 1) as f64;
                    acc += term;
                    if lk < 1e-18 {
                        break;
                    }
                }
                acc * h.powi(p as i32 + 1)
            })
            .collect()
    } else {
        let (s_end, c_end) = (theta + phase).sin_cos();
        let half = 0.5 * theta;
        let sin_half = half.sin();
        // cos φ − cos(φ+θ) and sin(φ+θ) − sin φ in product form
        let mut s = 2.0 * (phase + half).sin() * sin_half / lambda;
        let mut c = 2.0 * (phase + half).cos() * sin_half / lambda;
        let mut out = vec![s];
        let mut hp = 1.0;
        for p in 1..=pmax {
            hp *= h;
            let s_next = -hp * c_end / lambda + p as f64 / lambda * c;
            let c_next = hp * s_end / lambda - p as f64 / lambda * s;
            s = s_next;
            c = c_next;
            out.push(s);
        }
        out
    }
}

/// `(ε_i, N_j)` for every B-spline of the full (unconstrained) basis.
pub(crate) fn full_sine_load_row(space: &SplineSpace, mode: usize) -> Vec<f64> {
    let r = space.degree();
    let lambda = mode as f64 * PI;
    let mut row = vec![0.0; space.elements() + r];
    for e in 0..space.elements() {
        let moments = sine_moments(lambda, lambda * space.element_start(e), space.h(), r);
        for j in 0..=r {
            let t = space.local_taylor(e, j);
            let v: f64 = t.iter().zip(&moments).map(|(a, m)| a * m).sum();
            row[e + j] += SQRT_2 * v;
        }
    }
    row
}

/// `(ε_i, χ_j)` for all degrees of freedom `j`.
pub fn sine_load_row(space: &SplineSpace, mode: usize) -> Vec<f64> {
    let full = full_sine_load_row(space, mode);
    full[1..full.len() - 1].to_vec()
}

/// Load rows of modes `1..=modes`, reused across steps and samples.
#[derive(Debug, Clone)]
pub struct LoadTable {
    space: Arc<SplineSpace>,
    rows: Vec<Vec<f64>>,
}

impl LoadTable {
    pub fn new(space: &Arc<SplineSpace>, modes: usize) -> Self {
        Self {
            space: space.clone(),
            rows: (1..=modes).map(|i| sine_load_row(space, i)).collect(),
        }
    }

    pub fn modes(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, mode: usize) -> &[f64] {
        &self.rows[mode - 1]
    }

    /// `Σ_i c_i (ε_i, χ_j)` into `out`.
    pub fn load_into(&self, coeffs: &[f64], out: &mut [f64]) {
        assert!(coeffs.len() <= self.rows.len(), "load table lacks modes");
        out.iter_mut().for_each(|v| *v = 0.0);
        for (c, row) in coeffs.iter().zip(&self.rows) {
            if *c != 0.0 {
                for (o, r) in out.iter_mut().zip(row) {
                    *o += c * r;
                }
            }
        }
    }

    pub fn load(&self, field: &SpectralField) -> Vec<f64> {
        let mut out = vec![0.0; self.space.dim()];
        self.load_into(field.coeffs(), &mut out);
        out
    }

    /// `(field, v_h)` for FEM values `v`.
    pub fn cross(&self, field: &SpectralField, v: &[f64]) -> f64 {
        field
            .coeffs()
            .iter()
            .zip(&self.rows)
            .map(|(c, row)| c * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }
}

/// Quadrature tables for `‖X − v_h‖²` between spectral fields of up to `modes` modes and
/// FEM functions. Integrates the squared pointwise difference element by element, which
/// keeps full relative accuracy when the difference is tiny.
#[derive(Debug, Clone)]
pub struct L2Comparator {
    space: Arc<SplineSpace>,
    modes: usize,
    points: Vec<QuadPoint>,
}

#[derive(Debug, Clone)]
struct QuadPoint {
    element: usize,
    weight: f64,
    basis: [f64; 4],
    sines: Vec<f64>,
}

impl L2Comparator {
    pub fn new(space: &Arc<SplineSpace>, modes: usize) -> Self {
        let lh = modes as f64 * PI * space.h();
        let n = space.degree() + 4 + (1.5 * lh).ceil() as usize;
        let mut points = Vec::with_capacity(space.elements() * n);
        for e in 0..space.elements() {
            let x0 = space.element_start(e);
            for (x, w) in gauss_on(n, x0, x0 + space.h()) {
                points.push(QuadPoint {
                    element: e,
                    weight: w,
                    basis: space.local_values(e, x - x0, 0),
                    sines: (1..=modes)
                        .map(|k| SQRT_2 * (k as f64 * PI * x).sin())
                        .collect(),
                });
            }
        }
        Self {
            space: space.clone(),
            modes,
            points,
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// `‖field − v_h‖²_{L²}`.
    pub fn distance_sq(&self, field: &SpectralField, v: &[f64]) -> f64 {
        let c = field.coeffs();
        assert!(c.len() <= self.modes, "comparator lacks modes");
        let r = self.space.degree();
        self.points
            .iter()
            .map(|q| {
                let spectral: f64 = c.iter().zip(&q.sines).map(|(a, s)| a * s).sum();
                let fem: f64 = (0..=r)
                    .filter_map(|j| self.space.local_dof(q.element, j).map(|d| q.basis[j] * v[d]))
                    .sum();
                let d = spectral - fem;
                q.weight * d * d
            })
            .sum()
    }
}
