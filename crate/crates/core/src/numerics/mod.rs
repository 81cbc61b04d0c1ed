//! Scalar root finders and the dense linear-algebra kernels shared by the
//! proximity operators and the splitting solvers.

mod linalg;
mod roots;

pub use linalg::{spd_solve, Matrix, Vector};
pub use roots::{
    invert_monotone, solve_depressed_cubic, solve_power_polynomial, MonotoneRootProblem, Polynomial,
};

/// `max(1, |x|)`, the scale used by every hybrid absolute/relative tolerance.
#[inline]
pub fn unit_scale(x: f64) -> f64 {
    x.abs().max(1.0)
}
