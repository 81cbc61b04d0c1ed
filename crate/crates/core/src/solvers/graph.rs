use crate::error::{Error, Result};
use crate::numerics::{spd_solve, Matrix, Vector};

/// Projector onto the graph `V = {(b, Mb)}` of a linear map.
///
/// Stores `R = M^T (I + M M^T)^{-1}` so that `P_V(b, c) = (v, Mv)` with
/// `v = b - R (Mb - c)`.
#[derive(Debug, Clone)]
pub struct GraphProjector {
    m: Matrix,
    r: Matrix,
}

impl GraphProjector {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(
                "graph matrix has non-finite entries".into(),
            ));
        }
        let fail = |e: Error| Error::Argument(format!("graph factorization failed: {e}"));
        // M^T (I + M M^T)^{-1} = (I + M^T M)^{-1} M^T: factor the smaller Gram.
        let r = if m.ncols() < m.nrows() {
            let gram = m.transpose() * &m + Matrix::identity(m.ncols(), m.ncols());
            spd_solve(&gram, &m.transpose()).map_err(fail)?
        } else {
            let gram = &m * m.transpose() + Matrix::identity(m.nrows(), m.nrows());
            // Symmetric, so R^T solves (I + M M^T) R^T = M.
            spd_solve(&gram, &m).map_err(fail)?.transpose()
        };
        Ok(Self { m, r })
    }

    pub fn m(&self) -> &Matrix {
        &self.m
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    /// Domain dimension (columns of `M`).
    pub fn domain_dim(&self) -> usize {
        self.m.ncols()
    }

    /// Range dimension (rows of `M`).
    pub fn range_dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn project(&self, b: &Vector, c: &Vector) -> Result<(Vector, Vector)> {
        if b.len() != self.domain_dim() || c.len() != self.range_dim() {
            return Err(Error::Argument(format!(
                "graph projection expects ({}, {}) blocks, got ({}, {})",
                self.domain_dim(),
                self.range_dim(),
                b.len(),
                c.len()
            )));
        }
        let v = b - &self.r * (&self.m * b - c);
        let mv = &self.m * &v;
        Ok((v, mv))
    }

    /// `||R (I + M M^T) - M^T||_F / ||M^T||_F`.
    pub fn factor_residual(&self) -> f64 {
        let mt = self.m.transpose();
        let lhs = &self.r + &self.r * (&self.m * &mt);
        (lhs - &mt).norm() / mt.norm().max(f64::MIN_POSITIVE)
    }

    /// Projector for `D M` with `D = diag(-1, 1, ..., 1)`.
    ///
    /// `(D M)^T (I + D M M^T D)^{-1} = R D`, so only the first row of `M`
    /// and the first column of `R` change sign; no refactorization.
    pub fn with_first_row_negated(&self) -> Self {
        let mut m = self.m.clone();
        let mut r = self.r.clone();
        if m.nrows() > 0 {
            m.row_mut(0).neg_mut();
            r.column_mut(0).neg_mut();
        }
        Self { m, r }
    }
}

pub fn build_graph_projector(m: Matrix) -> Result<GraphProjector> {
    GraphProjector::new(m)
}

pub fn project_graph(proj: &GraphProjector, b: &Vector, c: &Vector) -> Result<(Vector, Vector)> {
    proj.project(b, c)
}
