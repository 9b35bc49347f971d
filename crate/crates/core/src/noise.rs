//! Canvas noise: the `N × M` Gaussian increments `R[n][i] ~ N(0, Δt)` and the noise
//!
//! ```text
//! 𝒲(t, x) = (1/Δt) Σ_{i ≤ M} R[n][i] φ_i(x)   for t in slab T_n = ((n−1)Δt, nΔt),
//! ```
//!
//! with `φ_i(x) = √2 cos(iπx)`. Slab and mode indices are 1-based throughout.

use std::f64::consts::{PI, SQRT_2};
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::spectral::SpectralField;

const DUMP_MAGIC: &[u8; 8] = b"CHCNOISE";
const DUMP_VERSION: u32 = 1;

/// Time slabs and cosine mode count of the canvas noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseGrid {
    t_final: f64,
    slabs: usize,
    modes: usize,
    dt: f64,
}

impl NoiseGrid {
    /// `modes = 0` is a valid degenerate grid carrying no noise.
    pub fn new(t_final: f64, slabs: usize, modes: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::Config(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if slabs == 0 {
            return Err(Error::Config("noise grid needs at least one slab".into()));
        }
        Ok(Self {
            t_final,
            slabs,
            modes,
            dt: t_final / slabs as f64,
        })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn slabs(&self) -> usize {
        self.slabs
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn with_modes(&self, modes: usize) -> Self {
        Self { modes, ..*self }
    }

    /// Start of slab `n`.
    pub fn slab_start(&self, n: usize) -> f64 {
        (n - 1) as f64 * self.dt
    }

    /// End of slab `n`; the last slab ends at `T` exactly.
    pub fn slab_end(&self, n: usize) -> f64 {
        if n == self.slabs {
            self.t_final
        } else {
            n as f64 * self.dt
        }
    }

    fn check_slab(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.slabs {
            Err(Error::SlabOutOfRange {
                slab: n,
                slabs: self.slabs,
            })
        } else {
            Ok(())
        }
    }

    /// Slabs meeting `(a, b)` with their overlap lengths `|(a, b) ∩ T_n| > 0`.
    pub fn slab_overlap(&self, a: f64, b: f64) -> Result<Vec<(usize, f64)>> {
        check_range("a", a, 0.0, self.t_final)?;
        check_range("b", b, 0.0, self.t_final)?;
        if a >= b {
            return Err(Error::Domain {
                what: "interval length",
                value: b - a,
                range: "(0, T]".into(),
            });
        }
        let first = ((a / self.dt).floor() as usize + 1).min(self.slabs);
        let mut out = Vec::new();
        for n in first..=self.slabs {
            let (lo, hi) = (self.slab_start(n), self.slab_end(n));
            if lo >= b {
                break;
            }
            let len = hi.min(b) - lo.max(a);
            if len > 0.0 {
                out.push((n, len));
            }
        }
        Ok(out)
    }

    /// Overlaps of each IMEX step `Δ_m = (τ_{m−1}, τ_m)`, `m = 1..=steps`, with the slabs.
    pub fn step_overlaps(&self, steps: usize) -> Result<Vec<Vec<(usize, f64)>>> {
        if steps == 0 {
            return Err(Error::Config("need at least one time step".into()));
        }
        let dtau = self.t_final / steps as f64;
        (1..=steps)
            .map(|m| {
                let lo = (m - 1) as f64 * dtau;
                let hi = if m == steps {
                    self.t_final
                } else {
                    m as f64 * dtau
                };
                self.slab_overlap(lo, hi)
            })
            .collect()
    }
}

/// Mixes a study seed with a sample index into an independent stream seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    splitmix(splitmix(base) ^ index.wrapping_mul(0xd605_bbb5_8c8a_bd11))
}

/// One realization of the canvas noise: `R[n][i]`, stored row-major by slab.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMatrix {
    grid: NoiseGrid,
    increments: Vec<f64>,
    seed: Option<u64>,
}

impl NoiseMatrix {
    /// Draws iid `N(0, Δt)` increments. Slab `n` uses ChaCha stream `n` of the seed, so
    /// any row can be regenerated on its own.
    pub fn sample(grid: NoiseGrid, seed: u64) -> Self {
        let sd = grid.dt.sqrt();
        let mut increments = Vec::with_capacity(grid.slabs * grid.modes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for n in 1..=grid.slabs {
            rng.set_stream(n as u64);
            rng.set_word_pos(0);
            for _ in 0..grid.modes {
                let z: f64 = StandardNormal.sample(&mut rng);
                increments.push(sd * z);
            }
        }
        Self {
            grid,
            increments,
            seed: Some(seed),
        }
    }

    pub fn zeros(grid: NoiseGrid) -> Self {
        Self {
            grid,
            increments: vec![0.0; grid.slabs * grid.modes],
            seed: None,
        }
    }

    /// Builds from explicit increments, row-major `[slab][mode]`.
    pub fn from_increments(grid: NoiseGrid, increments: Vec<f64>) -> Result<Self> {
        let expected = grid.slabs * grid.modes;
        if increments.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: increments.len(),
            });
        }
        Ok(Self {
            grid,
            increments,
            seed: None,
        })
    }

    /// A matrix with a single nonzero increment.
    pub fn impulse(grid: NoiseGrid, slab: usize, mode: usize, value: f64) -> Result<Self> {
        grid.check_slab(slab)?;
        if mode == 0 || mode > grid.modes {
            return Err(Error::InvalidMode(mode as i64));
        }
        let mut m = Self::zeros(grid);
        m.increments[(slab - 1) * grid.modes + mode - 1] = value;
        Ok(m)
    }

    pub fn grid(&self) -> &NoiseGrid {
        &self.grid
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `R[slab][mode]`, both 1-based.
    pub fn get(&self, slab: usize, mode: usize) -> f64 {
        self.increments[(slab - 1) * self.grid.modes + mode - 1]
    }

    /// Increments of slab `n` indexed by `mode − 1`.
    pub fn row(&self, slab: usize) -> &[f64] {
        let m = self.grid.modes;
        &self.increments[(slab - 1) * m..slab * m]
    }

    /// `α·self + β·other` on the same grid.
    pub fn combine(&self, alpha: f64, other: &NoiseMatrix, beta: f64) -> Result<NoiseMatrix> {
        if self.grid != other.grid {
            return Err(Error::Config("noise matrices live on different grids".into()));
        }
        Ok(NoiseMatrix {
            grid: self.grid,
            increments: self
                .increments
                .iter()
                .zip(&other.increments)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
            seed: None,
        })
    }

    pub fn scaled(&self, alpha: f64) -> NoiseMatrix {
        NoiseMatrix {
            grid: self.grid,
            increments: self.increments.iter().map(|r| alpha * r).collect(),
            seed: None,
        }
    }

    /// Sine coefficients of `∂ₓ𝒲` on slab `n`: `−(λ_i/Δt) R[n][i]`.
    pub fn dxw_coefficients(&self, slab: usize) -> Result<SpectralField> {
        self.grid.check_slab(slab)?;
        let dt = self.grid.dt;
        Ok(SpectralField::new(
            self.row(slab)
                .iter()
                .enumerate()
                .map(|(j, r)| -((j + 1) as f64 * PI) * r / dt)
                .collect(),
        ))
    }

    /// Point value of `𝒲` on slab `n` by cosine summation. Debugging and plotting only.
    pub fn evaluate_w(&self, slab: usize, x: f64) -> Result<f64> {
        self.grid.check_slab(slab)?;
        check_range("x", x, 0.0, 1.0)?;
        Ok(self.eval_w_unchecked(slab, x))
    }

    fn eval_w_unchecked(&self, slab: usize, x: f64) -> f64 {
        let s: f64 = self
            .row(slab)
            .iter()
            .enumerate()
            .map(|(j, r)| r * SQRT_2 * ((j + 1) as f64 * PI * x).cos())
            .sum();
        s / self.grid.dt
    }

    /// Writes the binary dump: magic, version, `T`, `N`, `M`, seed, then row-major `f64`s,
    /// all little-endian.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&self.grid.t_final.to_le_bytes())?;
        w.write_all(&(self.grid.slabs as u64).to_le_bytes())?;
        w.write_all(&(self.grid.modes as u64).to_le_bytes())?;
        w.write_all(&self.seed.unwrap_or(u64::MAX).to_le_bytes())?;
        for r in &self.increments {
            w.write_all(&r.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Io("not a noise dump".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != DUMP_VERSION {
            return Err(Error::Io("unsupported noise dump version".into()));
        }
        let mut b8 = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b8)?;
            Ok(b8)
        };
        let t_final = f64::from_le_bytes(next(&mut r)?);
        let slabs = u64::from_le_bytes(next(&mut r)?) as usize;
        let modes = u64::from_le_bytes(next(&mut r)?) as usize;
        let seed = u64::from_le_bytes(next(&mut r)?);
        let grid = NoiseGrid::new(t_final, slabs, modes)?;
        let mut increments = Vec::with_capacity(slabs * modes);
        for _ in 0..slabs * modes {
            increments.push(f64::from_le_bytes(next(&mut r)?));
        }
        Ok(Self {
            grid,
            increments,
            seed: (seed != u64::MAX).then_some(seed),
        })
    }
}

/// One term `weight · 𝒳_{(start, end)}(t) · φ_mode(x)` of a space–time test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestTerm {
    pub weight: f64,
    pub start: f64,
    pub end: f64,
    pub mode: usize,
}

impl TestTerm {
    /// `weight · 𝒳_{T_n} φ_mode` on the grid's slab `n`.
    pub fn on_slab(grid: &NoiseGrid, slab: usize, mode: usize, weight: f64) -> Self {
        Self {
            weight,
            start: grid.slab_start(slab),
            end: grid.slab_end(slab),
            mode,
        }
    }
}

/// Result of comparing `∫∫ Πg dW` with `∫∫ 𝒲 g` on one noise sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `g` had components outside `span{𝒳_{T_n} φ_i}` and was projected first.
    pub projected: bool,
}

/// Coefficients `a[n][i]` of `Πg = Σ a[n][i] 𝒳_{T_n} φ_i` (row-major by slab), and
/// whether `g` needed projecting.
pub fn project(grid: &NoiseGrid, g: &[TestTerm]) -> Result<(Vec<f64>, bool)> {
    let m = grid.modes;
    let mut a = vec![0.0; grid.slabs * m];
    let mut projected = false;
    for term in g {
        if term.mode == 0 {
            return Err(Error::InvalidMode(0));
        }
        let overlaps = grid.slab_overlap(term.start, term.end)?;
        if term.mode > m {
            projected = true;
            continue;
        }
        for (n, len) in overlaps {
            let full = grid.slab_end(n) - grid.slab_start(n);
            if (len - full).abs() > 1e-14 * full {
                projected = true;
            }
            a[(n - 1) * m + term.mode - 1] += term.weight * len / grid.dt;
        }
    }
    Ok((a, projected))
}

/// `‖Πg‖²_{L²((0,T)×D)} = Δt Σ a[n][i]²`, the variance of `∫∫ Πg dW`.
pub fn projected_norm_sq(grid: &NoiseGrid, g: &[TestTerm]) -> Result<f64> {
    let (a, _) = project(grid, g)?;
    Ok(grid.dt * a.iter().map(|v| v * v).sum::<f64>())
}

/// Evaluates both sides of `∫∫ Πg dW = ∫∫ 𝒲 g` on one sample.
///
/// The left side contracts the projection coefficients with the increments. The right
/// side evaluates `𝒲` pointwise and integrates against `g`: exactly in time, and with the
/// trapezoidal rule in space on enough nodes to be exact for the trigonometric products.
pub fn projection_identity_check(g: &[TestTerm], noise: &NoiseMatrix) -> Result<ProjectionCheck> {
    let grid = noise.grid;
    let (a, projected) = project(&grid, g)?;
    let lhs = a.iter().zip(&noise.increments).map(|(a, r)| a * r).sum();

    let max_mode = g.iter().map(|t| t.mode).max().unwrap_or(0).max(grid.modes);
    let intervals = 2 * max_mode + 2;
    let hx = 1.0 / intervals as f64;
    let mut rhs = 0.0;
    for term in g {
        for (n, len) in grid.slab_overlap(term.start, term.end)? {
            let space: f64 = (0..=intervals)
                .map(|j| {
                    let x = j as f64 * hx;
                    let w = if j == 0 || j == intervals { 0.5 } else { 1.0 };
                    w * noise.eval_w_unchecked(n, x)
                        * SQRT_2
                        * (term.mode as f64 * PI * x).cos()
                })
                .sum::<f64>()
                * hx;
            rhs += term.weight * len * space;
        }
    }
    Ok(ProjectionCheck {
        lhs,
        rhs,
        projected,
    })
}
