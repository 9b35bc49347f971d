//! `H²`-conforming spline finite elements on `[0, 1]`.

mod banded;
mod forms;
mod load;
pub mod quadrature;
mod spline;
mod stepper;

use std::io::Write;

pub use banded::{BandedSymMatrix, FactorKind, Factorization};
pub use forms::{assemble_forms, assemble_with, assembly_points, Forms};
pub use load::{sine_load_row, sine_moments, L2Comparator, LoadTable};
pub use spline::{FemField, SplineSpace};
pub use stepper::{
    apply_tbh, backward_euler_run, imex_deterministic_run, imex_stochastic_run, l2_projection,
    timediscrete_deterministic, timediscrete_deterministic_trajectory, BackwardEulerRun,
    BiharmonicSolver, DeterministicStepper, Scheme, StochasticStepper,
};

/// `intervals + 1` equispaced evaluation points on `[0, 1]`.
pub fn uniform_points(intervals: usize) -> Vec<f64> {
    let n = intervals.max(1);
    (0..=n).map(|i| if i == n { 1.0 } else { i as f64 / n as f64 }).collect()
}

/// Writes `x,value` rows of `field` at `points`.
pub fn write_snapshot_csv<W: Write>(mut w: W, field: &FemField, points: &[f64]) -> crate::Result<()> {
    writeln!(w, "x,value")?;
    for &x in points {
        writeln!(w, "{:.16e},{:.16e}", x, field.evaluate(x)?)?;
    }
    Ok(())
}
