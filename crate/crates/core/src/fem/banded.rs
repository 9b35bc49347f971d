//! Symmetric banded matrices and their direct factorizations.

use crate::error::{Error, Result};

/// Symmetric matrix with `A[i][j] = 0` for `|i − j| > bandwidth`; stores the lower band,
/// `band[i·(bw+1) + d] = A[i][i−d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymMatrix {
    order: usize,
    bandwidth: usize,
    band: Vec<f64>,
}

impl BandedSymMatrix {
    pub fn zeros(order: usize, bandwidth: usize) -> Self {
        Self {
            order,
            bandwidth,
            band: vec![0.0; order * (bandwidth + 1)],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        if d > self.bandwidth {
            0.0
        } else {
            self.band[i * (self.bandwidth + 1) + d]
        }
    }

    /// Adds `v` to the symmetric pair `(i, j)`/`(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        assert!(d <= self.bandwidth, "entry ({i}, {j}) outside the band");
        self.band[i * (self.bandwidth + 1) + d] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.order];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let bw = self.bandwidth;
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.order {
            let row = &self.band[i * (bw + 1)..(i + 1) * (bw + 1)];
            y[i] += row[0] * x[i];
            for d in 1..=bw.min(i) {
                let a = row[d];
                y[i] += a * x[i - d];
                y[i - d] += a * x[i];
            }
        }
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `Σ_k α_k A_k` over matrices of equal order; bandwidth is the maximum.
    pub fn combination(terms: &[(f64, &BandedSymMatrix)]) -> BandedSymMatrix {
        let order = terms[0].1.order;
        let bw = terms.iter().map(|t| t.1.bandwidth).max().unwrap_or(0);
        let mut out = BandedSymMatrix::zeros(order, bw);
        for &(alpha, m) in terms {
            assert_eq!(m.order, order);
            for i in 0..order {
                for d in 0..=m.bandwidth.min(i) {
                    out.band[i * (bw + 1) + d] += alpha * m.band[i * (m.bandwidth + 1) + d];
                }
            }
        }
        out
    }

    fn max_abs(&self) -> f64 {
        self.band.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Banded Cholesky `A = L Lᵀ`; fails unless `A` is positive definite.
    pub fn cholesky(&self) -> Result<Factorization> {
        let (n, bw) = (self.order, self.bandwidth);
        let mut l = self.band.clone();
        for j in 0..n {
            let mut d = l[j * (bw + 1)];
            for k in 1..=bw.min(j) {
                let v = l[j * (bw + 1) + k];
                d -= v * v;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::Factorization {
                    pivot: j,
                    reason: "matrix is not positive definite",
                });
            }
            let d = d.sqrt();
            l[j * (bw + 1)] = d;
            for i in (j + 1)..n.min(j + bw + 1) {
                // L[i][j] = (A[i][j] − Σ_k L[i][k] L[j][k]) / L[j][j]
                let mut s = l[i * (bw + 1) + (i - j)];
                let lo = i.saturating_sub(bw);
                for k in lo..j {
                    s -= l[i * (bw + 1) + (i - k)] * l[j * (bw + 1) + (j - k)];
                }
                l[i * (bw + 1) + (i - j)] = s / d;
            }
        }
        Ok(Factorization {
            order: n,
            bandwidth: bw,
            kind: FactorKind::Cholesky,
            band: l,
            diag: Vec::new(),
        })
    }

    /// Banded `A = L D Lᵀ` with unit `L` and no pivoting, for symmetric indefinite
    /// matrices whose leading minors do not vanish.
    pub fn ldlt(&self) -> Result<Factorization> {
        let (n, bw) = (self.order, self.bandwidth);
        let tiny = 1e-14 * self.max_abs().max(f64::MIN_POSITIVE);
        let mut l = self.band.clone();
        let mut diag = vec![0.0; n];
        for j in 0..n {
            let mut d = l[j * (bw + 1)];
            for k in j.saturating_sub(bw)..j {
                let v = l[j * (bw + 1) + (j - k)];
                d -= v * v * diag[k];
            }
            if d.abs() <= tiny || !d.is_finite() {
                return Err(Error::Factorization {
                    pivot: j,
                    reason: "zero pivot in symmetric indefinite factorization",
                });
            }
            diag[j] = d;
            l[j * (bw + 1)] = 1.0;
            for i in (j + 1)..n.min(j + bw + 1) {
                let mut s = l[i * (bw + 1) + (i - j)];
                for k in i.saturating_sub(bw)..j {
                    s -= l[i * (bw + 1) + (i - k)] * l[j * (bw + 1) + (j - k)] * diag[k];
                }
                l[i * (bw + 1) + (i - j)] = s / d;
            }
        }
        Ok(Factorization {
            order: n,
            bandwidth: bw,
            kind: FactorKind::Ldlt,
            band: l,
            diag,
        })
    }

    /// Cholesky when positive definite, otherwise `L D Lᵀ`.
    pub fn factorize(&self) -> Result<Factorization> {
        self.cholesky().or_else(|_| self.ldlt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    Cholesky,
    Ldlt,
}

/// A factorized [`BandedSymMatrix`], reusable for any number of solves.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    order: usize,
    bandwidth: usize,
    kind: FactorKind,
    band: Vec<f64>,
    diag: Vec<f64>,
}

impl Factorization {
    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of negative eigenvalues (Sylvester inertia of `D`).
    pub fn negative_pivots(&self) -> usize {
        match self.kind {
            FactorKind::Cholesky => 0,
            FactorKind::Ldlt => self.diag.iter().filter(|d| **d < 0.0).count(),
        }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.negative_pivots() == 0
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.order, self.bandwidth);
        let l = |i: usize, j: usize| self.band[i * (bw + 1) + (i - j)];
        let unit = self.kind == FactorKind::Ldlt;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let s = x[lo..i].iter().zip(lo..).fold(x[i], |s, (xk, k)| s - l(i, k) * xk);
            x[i] = if unit { s } else { s / l(i, i) };
        }
        if unit {
            for (xi, d) in x.iter_mut().zip(&self.diag) {
                *xi /= d;
            }
        }
        for i in (0..n).rev() {
            let hi = n.min(i + bw + 1);
            let s = x[i + 1..hi].iter().zip(i + 1..).fold(x[i], |s, (xk, k)| s - l(k, i) * xk);
            x[i] = if unit { s } else { s / l(i, i) };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplacian(n: usize) -> BandedSymMatrix {
        let mut a = BandedSymMatrix::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        a
    }

    fn dense(a: &BandedSymMatrix) -> Vec<Vec<f64>> {
        (0..a.order())
            .map(|i| (0..a.order()).map(|j| a.get(i, j)).collect())
            .collect()
    }

    #[test]
    fn cholesky_solves_laplacian() {
        let a = laplacian(10);
        let f = a.cholesky().unwrap();
        let x: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let y = f.solve(&a.matvec(&x));
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_uses_ldlt() {
        let mut a = laplacian(6);
        for i in 0..6 {
            a.add(i, i, -2.5);
        }
        assert!(a.cholesky().is_err());
        let f = a.factorize().unwrap();
        assert_eq!(f.kind(), FactorKind::Ldlt);
        assert!(f.negative_pivots() > 0);
        let x = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let y = f.solve(&a.matvec(&x));
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = BandedSymMatrix::zeros(3, 1);
        assert!(matches!(a.factorize(), Err(Error::Factorization { pivot: 0, .. })));
    }

    proptest! {
        #[test]
        fn matvec_matches_dense(vals in proptest::collection::vec(-1.0f64..1.0, 8 * 4), x in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let mut a = BandedSymMatrix::zeros(8, 3);
            for i in 0..8 {
                for d in 0..=3usize.min(i) {
                    a.add(i, i - d, vals[i * 4 + d]);
                }
            }
            let y = a.matvec(&x);
            let d = dense(&a);
            for i in 0..8 {
                let yi: f64 = (0..8).map(|j| d[i][j] * x[j]).sum();
                prop_assert!((yi - y[i]).abs() < 1e-14);
            }
        }

        #[test]
        fn spd_solve_round_trip(vals in proptest::collection::vec(-1.0f64..1.0, 12 * 3), x in proptest::collection::vec(-1.0f64..1.0, 12)) {
            // diagonally dominant ⇒ SPD
            let mut a = BandedSymMatrix::zeros(12, 2);
            for i in 0..12 {
                a.add(i, i, 5.0 + vals[i * 3].abs());
                for d in 1..=2usize.min(i) {
                    a.add(i, i - d, vals[i * 3 + d]);
                }
            }
            let y = a.cholesky().unwrap().solve(&a.matvec(&x));
            let z = a.ldlt().unwrap().solve(&a.matvec(&x));
            for i in 0..12 {
                prop_assert!((y[i] - x[i]).abs() < 1e-12);
                prop_assert!((z[i] - x[i]).abs() < 1e-12);
            }
        }
    }
}
