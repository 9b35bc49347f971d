//! Uniform-knot `C^{r−1}` spline spaces of degree `r ∈ {2, 3}` vanishing at both ends.

use std::sync::Arc;

use crate::error::{check_range, Error, Result};

/// Maximum supported degree plus one; sizes the per-element tables.
const MAX_LOCAL: usize = 4;

/// Clamped uniform B-spline space on `[0, 1]` with the two basis functions that are
/// nonzero at `x = 0` and `x = 1` removed. Every remaining function lies in `H² ∩ H¹₀`.
///
/// Degrees of freedom are the B-splines `1..=E+r−2` (full-basis numbering), shifted to
/// `0..dim`. On every element the `r + 1` nonzero B-splines are stored as Taylor
/// coefficients about the element's left end.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSpace {
    elements: usize,
    degree: usize,
    h: f64,
    knots: Vec<f64>,
    /// `taylor[e][j][p] = N_{e+j}^{(p)}(x_e) / p!`
    taylor: Vec<[[f64; MAX_LOCAL]; MAX_LOCAL]>,
}

impl SplineSpace {
    pub fn new(elements: usize, degree: usize) -> Result<Arc<Self>> {
        if !(2..=3).contains(&degree) {
            return Err(Error::Degree(degree));
        }
        if elements == 0 {
            return Err(Error::Config("spline space needs at least one element".into()));
        }
        let h = 1.0 / elements as f64;
        let mut knots = vec![0.0; degree + 1];
        knots.extend((1..elements).map(|e| e as f64 * h));
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        let mut space = Self {
            elements,
            degree,
            h,
            knots,
            taylor: Vec::with_capacity(elements),
        };
        let mut fact = [1.0; MAX_LOCAL];
        for p in 1..MAX_LOCAL {
            fact[p] = fact[p - 1] * p as f64;
        }
        for e in 0..elements {
            let ders = space.basis_derivatives(e + degree, e as f64 * h, degree);
            let mut t = [[0.0; MAX_LOCAL]; MAX_LOCAL];
            for (j, tj) in t.iter_mut().enumerate().take(degree + 1) {
                for (p, tp) in tj.iter_mut().enumerate().take(degree + 1) {
                    *tp = ders[p][j] / fact[p];
                }
            }
            space.taylor.push(t);
        }
        if space.dim() == 0 {
            return Err(Error::Config(format!(
                "{elements} element(s) of degree {degree} leave no interior degrees of freedom"
            )));
        }
        Ok(Arc::new(space))
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `elements + degree − 2`.
    pub fn dim(&self) -> usize {
        self.elements + self.degree - 2
    }

    pub fn element_start(&self, e: usize) -> f64 {
        e as f64 * self.h
    }

    /// Element containing `x` (the last element owns `x = 1`).
    pub fn element_of(&self, x: f64) -> usize {
        ((x / self.h).floor() as usize).min(self.elements - 1)
    }

    /// Degree of freedom of local function `j` on element `e`, if it was not eliminated.
    pub fn local_dof(&self, e: usize, j: usize) -> Option<usize> {
        let full = e + j;
        (full >= 1 && full <= self.elements + self.degree - 2).then(|| full - 1)
    }

    /// Taylor coefficients of local function `j` on element `e`.
    pub fn local_taylor(&self, e: usize, j: usize) -> &[f64] {
        &self.taylor[e][j][..=self.degree]
    }

    /// Values of the `deriv`-th derivative of the `r + 1` local functions at offset `s`
    /// from the left end of element `e` (extrapolating the element polynomial).
    pub fn local_values(&self, e: usize, s: f64, deriv: usize) -> [f64; MAX_LOCAL] {
        let mut out = [0.0; MAX_LOCAL];
        let r = self.degree;
        for (j, o) in out.iter_mut().enumerate().take(r + 1) {
            let c = &self.taylor[e][j];
            let mut acc = 0.0;
            for p in (deriv..=r).rev() {
                let mut f = 1.0;
                for q in 0..deriv {
                    f *= (p - q) as f64;
                }
                acc = acc * s + f * c[p];
            }
            *o = acc;
        }
        out
    }

    /// Cox–de Boor derivatives of the nonzero B-splines on knot span `span` at `u`:
    /// `ders[k][j]` is the `k`-th derivative of `N_{span−r+j}`.
    pub fn basis_derivatives(&self, span: usize, u: f64, nderiv: usize) -> Vec<Vec<f64>> {
        let p = self.degree;
        let knots = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = u - knots[span + 1 - j];
            right[j] = knots[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let mut ders = vec![vec![0.0; p + 1]; nderiv + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=nderiv.min(p) {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize - 1) <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut fac = p as f64;
        for (k, row) in ders.iter_mut().enumerate().take(nderiv.min(p) + 1).skip(1) {
            for v in row.iter_mut() {
                *v *= fac;
            }
            fac *= (p - k) as f64;
        }
        ders
    }
}

/// A function of a [`SplineSpace`], given by its degree-of-freedom values.
#[derive(Debug, Clone, PartialEq)]
pub struct FemField {
    space: Arc<SplineSpace>,
    values: Vec<f64>,
}

impl FemField {
    pub fn new(space: Arc<SplineSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.dim() {
            return Err(Error::Dimension {
                expected: space.dim(),
                got: values.len(),
            });
        }
        Ok(Self { space, values })
    }

    pub fn zeros(space: Arc<SplineSpace>) -> Self {
        let values = vec![0.0; space.dim()];
        Self { space, values }
    }

    pub fn space(&self) -> &Arc<SplineSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        self.derivative(x, 0)
    }

    /// `deriv`-th derivative at `x`. Values at `x = 0` and `x = 1` are exactly zero.
    pub fn derivative(&self, x: f64, deriv: usize) -> Result<f64> {
        check_range("x", x, 0.0, 1.0)?;
        if deriv == 0 && (x == 0.0 || x == 1.0) {
            return Ok(0.0);
        }
        Ok(self.on_element(self.space.element_of(x), x, deriv))
    }

    /// Derivative of the polynomial piece of element `e`, evaluated at `x` (which may
    /// lie at either end of the element).
    pub fn on_element(&self, e: usize, x: f64, deriv: usize) -> f64 {
        let local = self
            .space
            .local_values(e, x - self.space.element_start(e), deriv);
        (0..=self.space.degree())
            .filter_map(|j| self.space.local_dof(e, j).map(|d| local[j] * self.values[d]))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(SplineSpace::new(8, 2).unwrap().dim(), 8);
        assert_eq!(SplineSpace::new(8, 3).unwrap().dim(), 9);
        assert!(matches!(SplineSpace::new(8, 4), Err(Error::Degree(4))));
        assert!(matches!(SplineSpace::new(8, 1), Err(Error::Degree(1))));
    }

    #[test]
    fn full_basis_is_partition_of_unity() {
        let s = SplineSpace::new(5, 3).unwrap();
        for x in [0.0, 0.13, 0.4, 0.77, 0.99] {
            let e = s.element_of(x);
            let v = s.local_values(e, x - s.element_start(e), 0);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let d = s.local_values(e, x - s.element_start(e), 1);
            assert!(d.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn taylor_tables_match_cox_de_boor() {
        for r in [2, 3] {
            let s = SplineSpace::new(6, r).unwrap();
            for e in 0..6 {
                let x = s.element_start(e) + 0.37 * s.h();
                let direct = s.basis_derivatives(e + r, x, r);
                for (k, dk) in direct.iter().enumerate() {
                    let t = s.local_values(e, x - s.element_start(e), k);
                    for (d, v) in dk.iter().zip(&t) {
                        assert!((d - v).abs() < 1e-9 * (1.0 + d.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_values_vanish() {
        for r in [2, 3] {
            let s = SplineSpace::new(7, r).unwrap();
            let f = FemField::new(s.clone(), (0..s.dim()).map(|i| 1.0 + i as f64).collect())
                .unwrap();
            assert_eq!(f.evaluate(0.0).unwrap(), 0.0);
            assert_eq!(f.evaluate(1.0).unwrap(), 0.0);
            // the element polynomials themselves vanish there up to rounding
            assert!(f.on_element(6, 1.0, 0).abs() < 1e-12);
            assert!(f.on_element(0, 0.0, 0).abs() < 1e-15);
            assert!(f.evaluate(1.2).is_err());
        }
    }
}
