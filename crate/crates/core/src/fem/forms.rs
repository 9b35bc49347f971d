//! Exact Gram matrices of the spline basis.

use std::sync::Arc;

use super::banded::BandedSymMatrix;
use super::quadrature::gauss_on;
use super::spline::SplineSpace;

/// `Mass = (χ_k, χ_j)`, `Bending = (χ_k'', χ_j'')`, `Grad = (χ_k', χ_j')`.
///
/// On this space `(v'', χ) = −(v', χ')`, so the explicit `μ u_xx` term enters with `−Grad`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forms {
    pub space: Arc<SplineSpace>,
    pub mass: BandedSymMatrix,
    pub bending: BandedSymMatrix,
    pub grad: BandedSymMatrix,
}

/// Gauss points per element: exact for the degree-`2r` integrands.
pub fn assembly_points(degree: usize) -> usize {
    (2 * degree + 1).div_ceil(2) + 1
}

pub fn assemble_forms(space: &Arc<SplineSpace>) -> Forms {
    assemble_with(space, assembly_points(space.degree()))
}

/// Assembly with an explicit number of Gauss points per element.
pub fn assemble_with(space: &Arc<SplineSpace>, points: usize) -> Forms {
    let (n, r) = (space.dim(), space.degree());
    let mut mass = BandedSymMatrix::zeros(n, r);
    let mut bending = BandedSymMatrix::zeros(n, r);
    let mut grad = BandedSymMatrix::zeros(n, r);
    for e in 0..space.elements() {
        let x0 = space.element_start(e);
        for (x, w) in gauss_on(points, x0, x0 + space.h()) {
            let s = x - x0;
            let v = space.local_values(e, s, 0);
            let d1 = space.local_values(e, s, 1);
            let d2 = space.local_values(e, s, 2);
            for a in 0..=r {
                let Some(i) = space.local_dof(e, a) else { continue };
                for b in 0..=a {
                    let Some(j) = space.local_dof(e, b) else { continue };
                    mass.add(i, j, w * v[a] * v[b]);
                    bending.add(i, j, w * d2[a] * d2[b]);
                    grad.add(i, j, w * d1[a] * d1[b]);
                }
            }
        }
    }
    Forms {
        space: space.clone(),
        mass,
        bending,
        grad,
    }
}
