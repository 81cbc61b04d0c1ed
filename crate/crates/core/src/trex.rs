//! TREX, generalized TREX and the concomitant Lasso.
//!
//! Generalized TREX minimizes
//! `||Xb - z||^q / (alpha ||X^T (Xb - z)||_inf^(q-1)) + ||b||_1`, which is the
//! best of `2p` convex problems indexed by a column `j` and a sign `s`:
//! the data term becomes the perspective of `||.||^q / alpha` evaluated at
//! `(s x_j^T (Xb - z), Xb - z)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::perspective::{prox_perspective_power, prox_perspective_quadratic, PowerSpec};
use crate::prox::{soft_threshold, ProxStep, ScaledPair};
use crate::solvers::{CompositeDR, DRConfig, DRResult, DRState, GraphProjector, Trace};

#[derive(Debug, Clone)]
pub struct TrexProblem {
    pub x: Matrix,
    pub z: Vector,
    pub alpha: f64,
    pub q: f64,
}

impl TrexProblem {
    pub fn new(x: Matrix, z: Vector, alpha: f64, q: f64) -> Result<Self> {
        let problem = Self { x, z, alpha, q };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, p) = self.x.shape();
        if n == 0 || p == 0 {
            return Err(Error::Argument(
                "design matrix must have at least one row and column".into(),
            ));
        }
        if self.z.len() != n {
            return Err(Error::Argument(format!(
                "response has length {}, design has {n} rows",
                self.z.len()
            )));
        }
        if self.x.iter().chain(self.z.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Argument("design and response must be finite".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Argument(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.q == 1.0 {
            return Err(Error::Argument(
                "q = 1 is the Sqrt-Lasso limit, which this solver does not handle; use q > 1"
                    .into(),
            ));
        }
        if !(self.q > 1.0 && self.q.is_finite()) {
            return Err(Error::Argument(format!(
                "q must be a finite number > 1, got {}",
                self.q
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.x.clone(), self.z.clone(), alpha, self.q)
    }

    /// All `2p` subproblems in tie-break order: `j` ascending, `+1` before `-1`.
    pub fn subproblem_ids(&self) -> Vec<SubproblemId> {
        (1..=self.p())
            .flat_map(|j| [SubproblemId { j, s: 1 }, SubproblemId { j, s: -1 }])
            .collect()
    }

    fn check_id(&self, id: SubproblemId) -> Result<()> {
        if id.j == 0 || id.j > self.p() || !(id.s == 1 || id.s == -1) {
            return Err(Error::Argument(format!(
                "invalid subproblem (j={}, s={}) for p={}",
                id.j,
                id.s,
                self.p()
            )));
        }
        Ok(())
    }

    /// Row scale `c` of the first graph coordinate: the solver works with
    /// `eta / c`, which keeps that row of `M_j` comparable to the rows of `X`.
    /// The data term is unchanged when `alpha` becomes `alpha c^(q-1)`.
    pub fn eta_scale(&self) -> f64 {
        self.n() as f64
    }

    /// `s x_j^T z / c`.
    fn shift_eta(&self, id: SubproblemId) -> f64 {
        f64::from(id.s) * self.x.column(id.j - 1).dot(&self.z) / self.eta_scale()
    }

    fn data_term(&self, residual: &Vector, denominator: f64) -> f64 {
        let rn = residual.norm();
        if rn == 0.0 {
            0.0
        } else if denominator <= 0.0 {
            f64::INFINITY
        } else {
            rn.powf(self.q) / (self.alpha * denominator.powf(self.q - 1.0))
        }
    }
}

/// Column `j` (1-based) and sign `s` of a signed subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubproblemId {
    pub j: usize,
    pub s: i8,
}

/// `M_j: b -> (s x_j^T X b / c, X b)` as an `(n+1) x p` matrix, and the shift
/// `(s x_j^T z / c, z)`, with `c` the row scale [`TrexProblem::eta_scale`].
pub fn build_subproblem(
    problem: &TrexProblem,
    id: SubproblemId,
) -> Result<(Matrix, (f64, Vector))> {
    problem.check_id(id)?;
    let (n, p) = problem.x.shape();
    let mut m = Matrix::zeros(n + 1, p);
    let first = (f64::from(id.s) / problem.eta_scale())
        * (problem.x.column(id.j - 1).transpose() * &problem.x);
    m.row_mut(0).copy_from(&first);
    m.rows_mut(1, n).copy_from(&problem.x);
    Ok((m, (problem.shift_eta(id), problem.z.clone())))
}

/// Graph projector of `M_j`; the `-1` sign reuses the `+1` factorization.
pub fn subproblem_projector(problem: &TrexProblem, id: SubproblemId) -> Result<GraphProjector> {
    let (m, _) = build_subproblem(problem, SubproblemId { j: id.j, s: 1 })?;
    let proj = GraphProjector::new(m)?;
    Ok(if id.s == 1 {
        proj
    } else {
        proj.with_first_row_negated()
    })
}

/// Prox of `gamma g_j` at `(eta, y)` in the scaled coordinates of
/// [`build_subproblem`]: shift by `(s x_j^T z / c, z)`, apply the prox of the
/// perspective of `||.||^q / (alpha c^(q-1))`, shift back.
pub fn prox_g_trex(
    problem: &TrexProblem,
    id: SubproblemId,
    step: ProxStep,
    pair: &ScaledPair,
) -> Result<ScaledPair> {
    problem.check_id(id)?;
    if pair.dim() != problem.n() {
        return Err(Error::Argument(format!(
            "pair has dimension {}, expected {}",
            pair.dim(),
            problem.n()
        )));
    }
    let shift = problem.shift_eta(id);
    prox_g_shifted(problem, shift, step, pair)
}

fn prox_g_shifted(
    problem: &TrexProblem,
    shift: f64,
    step: ProxStep,
    pair: &ScaledPair,
) -> Result<ScaledPair> {
    let centered = ScaledPair {
        eta: pair.eta - shift,
        y: pair
            .y
            .iter()
            .zip(problem.z.iter())
            .map(|(a, b)| a - b)
            .collect(),
    };
    let alpha = problem.alpha * problem.eta_scale().powf(problem.q - 1.0);
    let mut out = if problem.q == 2.0 {
        prox_perspective_quadratic(alpha, 0.0, &[], step, &centered)?
    } else {
        prox_perspective_power(
            &PowerSpec::new(problem.q, alpha, 0.0, Vec::new())?,
            step,
            &centered,
        )?
    };
    out.eta += shift;
    for (o, zi) in out.y.iter_mut().zip(problem.z.iter()) {
        *o += zi;
    }
    Ok(out)
}

/// Generalized TREX objective; the data term is 0 when `Xb = z` and `+inf`
/// when `X^T (Xb - z) = 0` otherwise.
pub fn eval_trex_objective(problem: &TrexProblem, b: &Vector) -> f64 {
    let r = &problem.x * b - &problem.z;
    let den = (problem.x.transpose() * &r).amax();
    problem.data_term(&r, den) + b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Objective of subproblem `id`: the denominator is `s x_j^T (Xb - z)`.
pub fn eval_subproblem_objective(problem: &TrexProblem, id: SubproblemId, b: &Vector) -> f64 {
    let r = &problem.x * b - &problem.z;
    let den = f64::from(id.s) * problem.x.column(id.j - 1).dot(&r);
    problem.data_term(&r, den) + b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Subproblem objective from `(b, c = M_j b)` without another product by `X`.
fn objective_from_graph(problem: &TrexProblem, shift: f64, b: &Vector, c: &Vector) -> f64 {
    let n = problem.n();
    let r = c.rows(1, n) - &problem.z;
    problem.data_term(&r, (c[0] - shift) * problem.eta_scale())
        + b.iter().map(|v| v.abs()).sum::<f64>()
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub id: SubproblemId,
    pub b: Vector,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Trace,
    /// Iterates at exit; pass back to [`resume_subproblem`] to continue.
    pub state: DRState,
}

fn composite_run(
    problem: &TrexProblem,
    id: SubproblemId,
    proj: &GraphProjector,
    config: &DRConfig,
    state: &mut DRState,
) -> Result<DRResult> {
    let shift = problem.shift_eta(id);
    let n = problem.n();
    let prox_h = |x: &Vector, gamma: f64| Ok(Vector::from_vec(soft_threshold(x.as_slice(), gamma)));
    let prox_g = |w: &Vector, gamma: f64| {
        let pair = ScaledPair {
            eta: w[0],
            y: w.as_slice()[1..].to_vec(),
        };
        let out = prox_g_shifted(problem, shift, ProxStep::new(gamma)?, &pair)?;
        let mut v = Vector::zeros(n + 1);
        v[0] = out.eta;
        v.as_mut_slice()[1..].copy_from_slice(&out.y);
        Ok(v)
    };
    let objective = |b: &Vector, c: &Vector| objective_from_graph(problem, shift, b, c);
    CompositeDR {
        proj,
        prox_h: &prox_h,
        prox_g: &prox_g,
        objective: Some(&objective),
    }
    .run(state, config)
}

/// Continues a subproblem solve from `state` with a prebuilt projector.
///
/// `state` may come from a different `alpha` (warm start along a path).
pub fn resume_subproblem(
    problem: &TrexProblem,
    id: SubproblemId,
    proj: &GraphProjector,
    config: &DRConfig,
    mut state: DRState,
) -> Result<SubproblemSolution> {
    problem.check_id(id)?;
    let result = composite_run(problem, id, proj, config, &mut state)?;
    let objective = eval_subproblem_objective(problem, id, &result.solution);
    log::debug!(
        "subproblem j={} s={:+} objective {objective:e} after {} iterations (converged: {})",
        id.j,
        id.s,
        result.iterations,
        result.converged
    );
    Ok(SubproblemSolution {
        id,
        b: result.solution,
        objective,
        converged: result.converged,
        iterations: result.iterations,
        trace: result.trace,
        state,
    })
}

/// Fresh DR state for a subproblem (`x_0 = 0`, `y_0 = 0`).
pub fn initial_state(problem: &TrexProblem) -> DRState {
    DRState::new(Vector::zeros(problem.p()), problem.n() + 1)
}

pub fn solve_subproblem(
    problem: &TrexProblem,
    id: SubproblemId,
    config: &DRConfig,
) -> Result<SubproblemSolution> {
    problem.validate()?;
    let proj = subproblem_projector(problem, id)?;
    resume_subproblem(problem, id, &proj, config, initial_state(problem))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubproblemSummary {
    pub id: SubproblemId,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrexResult {
    pub b_hat: Vec<f64>,
    /// Generalized TREX objective at `b_hat` (global `||.||_inf` denominator).
    pub objective: f64,
    /// The winner's own objective (signed `x_j` denominator).
    pub subproblem_objective: f64,
    pub winner: SubproblemId,
    pub converged: bool,
    pub per_subproblem: Vec<SubproblemSummary>,
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))
}

/// Index of the smallest objective; earlier entries win ties, `NaN` never wins.
fn argmin_first(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if !v.is_nan() && best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

fn assemble(problem: &TrexProblem, solutions: Vec<SubproblemSolution>) -> Result<TrexResult> {
    let per_subproblem: Vec<_> = solutions
        .iter()
        .map(|s| SubproblemSummary {
            id: s.id,
            objective: s.objective,
            converged: s.converged,
            iterations: s.iterations,
        })
        .collect();
    let w = argmin_first(solutions.iter().map(|s| s.objective))
        .ok_or_else(|| Error::Convergence("no subproblem produced a finite objective".into()))?;
    let winner = &solutions[w];
    if solutions.iter().all(|s| !s.converged) {
        log::warn!("no TREX subproblem converged; reporting the best iterate");
    }
    Ok(TrexResult {
        b_hat: winner.b.as_slice().to_vec(),
        objective: eval_trex_objective(problem, &winner.b),
        subproblem_objective: winner.objective,
        winner: winner.id,
        converged: winner.converged,
        per_subproblem,
    })
}

/// Solves all `2p` subproblems on `workers` threads and returns the best.
pub fn solve_trex_full(
    problem: &TrexProblem,
    config: &DRConfig,
    workers: usize,
) -> Result<TrexResult> {
    problem.validate()?;
    config.validate()?;
    let pool = build_pool(workers)?;
    let solutions: Vec<SubproblemSolution> = pool
        .install(|| {
            (1..=problem.p())
                .into_par_iter()
                .map(|j| {
                    let plus = SubproblemId { j, s: 1 };
                    let proj = subproblem_projector(problem, plus)?;
                    let neg = proj.with_first_row_negated();
                    let a =
                        resume_subproblem(problem, plus, &proj, config, initial_state(problem))?;
                    let b = resume_subproblem(
                        problem,
                        SubproblemId { j, s: -1 },
                        &neg,
                        config,
                        initial_state(problem),
                    )?;
                    Ok(vec![a, b])
                })
                .collect::<Result<Vec<_>>>()
        })?
        .into_iter()
        .flatten()
        .collect();
    assemble(problem, solutions)
}

/// Result of DR-Sel on one column.
#[derive(Debug, Clone)]
pub struct DrSelOutcome {
    pub selected: SubproblemId,
    /// Subproblem objectives of `(+1, -1)` at iterate `k0`.
    pub objectives_at_k0: (f64, f64),
    pub solution: SubproblemSolution,
    /// Total DR iterations spent, both signs included.
    pub total_iterations: usize,
}

/// `||z||_1 + g_j(t)` at the prox blocks, finite whenever the iterate is.
fn prox_block_objective(problem: &TrexProblem, id: SubproblemId, state: &DRState) -> f64 {
    let n = problem.n();
    let r = state.t.rows(1, n) - &problem.z;
    problem.data_term(
        &r,
        (state.t[0] - problem.shift_eta(id)) * problem.eta_scale(),
    ) + state.z.iter().map(|v| v.abs()).sum::<f64>()
}

/// DR-Sel: runs both signs of column `j` for `k0` iterations and finishes
/// only the sign with the lower objective at `b_{k0}` (ties go to `+1`).
pub fn dr_sel(
    problem: &TrexProblem,
    j: usize,
    config: &DRConfig,
    k0: usize,
) -> Result<DrSelOutcome> {
    problem.validate()?;
    let plus = subproblem_projector(problem, SubproblemId { j, s: 1 })?;
    let minus = plus.with_first_row_negated();
    let fresh = (initial_state(problem), initial_state(problem));
    dr_sel_from(problem, j, (&plus, &minus), config, k0, fresh).map(|(o, _)| o)
}

/// DR-Sel from given `(+1, -1)` states and projectors (warm starts along a
/// path of problems sharing `X` and `z`). Also returns the state of the sign
/// that was not continued.
pub fn dr_sel_from(
    problem: &TrexProblem,
    j: usize,
    projectors: (&GraphProjector, &GraphProjector),
    config: &DRConfig,
    k0: usize,
    starts: (DRState, DRState),
) -> Result<(DrSelOutcome, DRState)> {
    config.validate()?;
    if k0 == 0 {
        return Err(Error::Argument("k0 must be at least 1".into()));
    }
    let plus = SubproblemId { j, s: 1 };
    let minus = SubproblemId { j, s: -1 };
    let warmup = DRConfig {
        max_iter: k0.min(config.max_iter),
        ..config.clone()
    };
    let a = resume_subproblem(problem, plus, projectors.0, &warmup, starts.0)?;
    let b = resume_subproblem(problem, minus, projectors.1, &warmup, starts.1)?;
    let at_k0 = |s: &SubproblemSolution| eval_subproblem_objective(problem, s.id, &s.state.b);
    let mut scores = (at_k0(&a), at_k0(&b));
    let objectives_at_k0 = scores;
    if !scores.0.is_finite() && !scores.1.is_finite() {
        scores = (
            prox_block_objective(problem, plus, &a.state),
            prox_block_objective(problem, minus, &b.state),
        );
    }
    let (chosen, proj, other) = if scores.1 < scores.0 {
        (b, projectors.1, a)
    } else {
        (a, projectors.0, b)
    };
    let solution = if chosen.converged {
        chosen
    } else {
        resume_subproblem(problem, chosen.id, proj, config, chosen.state)?
    };
    let total_iterations = other.iterations + solution.iterations;
    Ok((
        DrSelOutcome {
            selected: solution.id,
            objectives_at_k0,
            solution,
            total_iterations,
        },
        other.state,
    ))
}

/// Solves the full TREX with DR-Sel on every column.
pub fn solve_trex_dr_sel(
    problem: &TrexProblem,
    config: &DRConfig,
    k0: usize,
    workers: usize,
) -> Result<TrexResult> {
    problem.validate()?;
    config.validate()?;
    let pool = build_pool(workers)?;
    let solutions: Vec<SubproblemSolution> = pool.install(|| {
        (1..=problem.p())
            .into_par_iter()
            .map(|j| dr_sel(problem, j, config, k0).map(|o| o.solution))
            .collect::<Result<Vec<_>>>()
    })?;
    assemble(problem, solutions)
}

#[derive(Debug, Clone)]
pub struct ConcomitantSolution {
    pub b: Vector,
    pub sigma_hat: f64,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `||Xb - z||^2 / (2 n sigma) + sigma / 2 + lambda ||b||_1`, extended to
/// `sigma = 0` by its lower semicontinuous hull.
pub fn concomitant_objective(x: &Matrix, z: &Vector, lambda: f64, sigma: f64, b: &Vector) -> f64 {
    let n = x.nrows() as f64;
    let rn2 = (x * b - z).norm_squared();
    let data = if sigma > 0.0 {
        rn2 / (2.0 * n * sigma) + sigma / 2.0
    } else if sigma == 0.0 && rn2 == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    data + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Concomitant (scaled) Lasso by DR on `(sigma, b)` with the graph of
/// `diag(1, X)`; the data term is the perspective of `||.||^2/(2n) + 1/2`.
pub fn solve_concomitant_lasso(
    x: &Matrix,
    z: &Vector,
    lambda: f64,
    config: &DRConfig,
) -> Result<ConcomitantSolution> {
    TrexProblem::new(x.clone(), z.clone(), 1.0, 2.0)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Argument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    config.validate()?;
    let (n, p) = x.shape();
    let mut m = Matrix::zeros(n + 1, p + 1);
    m[(0, 0)] = 1.0;
    m.view_mut((1, 1), (n, p)).copy_from(x);
    let proj = GraphProjector::new(m)?;
    let alpha = 2.0 * n as f64;
    let prox_h = |w: &Vector, gamma: f64| {
        let mut out = w.clone();
        let shrunk = soft_threshold(&w.as_slice()[1..], gamma * lambda);
        out.as_mut_slice()[1..].copy_from_slice(&shrunk);
        Ok(out)
    };
    let prox_g = |w: &Vector, gamma: f64| {
        let pair = ScaledPair {
            eta: w[0],
            y: w.as_slice()[1..]
                .iter()
                .zip(z.iter())
                .map(|(a, b)| a - b)
                .collect(),
        };
        let out = prox_perspective_quadratic(alpha, 0.5, &[], ProxStep::new(gamma)?, &pair)?;
        let mut v = Vector::zeros(n + 1);
        v[0] = out.eta;
        for (i, (o, zi)) in out.y.iter().zip(z.iter()).enumerate() {
            v[i + 1] = o + zi;
        }
        Ok(v)
    };
    let objective = |bt: &Vector, c: &Vector| {
        let rn2 = (c.rows(1, n) - z).norm_squared();
        let sigma = bt[0];
        let data = if sigma > 0.0 {
            rn2 / (2.0 * n as f64 * sigma) + sigma / 2.0
        } else if sigma == 0.0 && rn2 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        data + lambda * bt.rows(1, p).iter().map(|v| v.abs()).sum::<f64>()
    };
    let mut state = DRState::new(Vector::zeros(p + 1), n + 1);
    let result = CompositeDR {
        proj: &proj,
        prox_h: &prox_h,
        prox_g: &prox_g,
        objective: Some(&objective),
    }
    .run(&mut state, config)?;
    let b = result.solution.rows(1, p).into_owned();
    let sigma_hat = state.t[0];
    Ok(ConcomitantSolution {
        objective: concomitant_objective(x, z, lambda, sigma_hat, &b),
        b,
        sigma_hat,
        converged: result.converged,
        iterations: result.iterations,
    })
}
