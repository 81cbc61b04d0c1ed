use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense row/column real matrix used for designs and graph operators.
pub type Matrix = DMatrix<f64>;
/// Dense real vector.
pub type Vector = DVector<f64>;

/// Solves `A X = B` for symmetric positive definite `A` by Cholesky.
pub fn spd_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::Argument(format!(
            "spd_solve needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() != b.nrows() {
        return Err(Error::Argument(format!(
            "spd_solve: A is {}x{} but B has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Argument("spd_solve: non-finite entry".into()));
    }
    let asym = (a - a.transpose()).amax();
    if asym > 1e-12 * a.amax().max(1.0) {
        return Err(Error::Argument(format!(
            "spd_solve: matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let chol = Cholesky::new(a.clone()).ok_or(Error::NotSpd)?;
    Ok(chol.solve(b))
}
