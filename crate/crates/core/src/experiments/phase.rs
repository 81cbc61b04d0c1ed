use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::model::{
    default_support_size, gen_linear_model, n_for_theta, support_metrics, LinearModelSpec,
};
use crate::experiments::table::ExperimentTable;
use crate::numerics::Vector;
use crate::solvers::{DRConfig, DRState, GraphProjector, Relaxation};
use crate::trex::{dr_sel_from, initial_state, subproblem_projector, SubproblemId, TrexProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseTransitionConfig {
    pub p: usize,
    /// Support size; `ceil(0.4 p^(3/4))` when absent.
    pub m: Option<usize>,
    pub theta_grid: Vec<f64>,
    pub q_list: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub repetitions: usize,
    pub zero_threshold: f64,
    pub sigma: f64,
    pub corr: f64,
    pub seed: u64,
    pub workers: usize,
    pub solver: DRConfig,
    /// DR-Sel warm-up length per column.
    pub k0: usize,
    /// Start each alpha from the previous alpha's iterates.
    pub warm_start: bool,
    /// Stop the (ascending) alpha sweep at the first exact recovery; it is the
    /// Hamming minimizer under the smallest-alpha tie rule.
    pub stop_at_exact: bool,
}

pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step).round() as usize;
    (0..=count)
        .map(|k| ((lo + step * k as f64) * 1e9).round() / 1e9)
        .collect()
}

impl Default for PhaseTransitionConfig {
    fn default() -> Self {
        Self {
            p: 64,
            m: None,
            theta_grid: grid(0.2, 1.6, 0.2),
            q_list: vec![9.0 / 8.0, 7.0 / 6.0, 1.5, 2.0],
            alpha_grid: grid(0.1, 2.0, 0.05),
            repetitions: 12,
            zero_threshold: 0.05,
            sigma: 0.5,
            corr: 0.0,
            seed: 0,
            workers: 1,
            solver: DRConfig {
                gamma: 1.0,
                relaxation: Relaxation::Constant(1.95),
                tol: 1e-5,
                ..DRConfig::default()
            },
            k0: 50,
            warm_start: true,
            stop_at_exact: true,
        }
    }
}

/// Metrics recorded per `(theta, q, repetition)`, in output order.
pub const PHASE_METRICS: [&str; 10] = [
    "theta",
    "n",
    "alpha",
    "exact_recovery",
    "hamming",
    "est_err",
    "pred_err",
    "converged",
    "alphas_evaluated",
    "dr_iterations",
];

impl PhaseTransitionConfig {
    pub fn support_size(&self) -> usize {
        self.m.unwrap_or_else(|| default_support_size(self.p))
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.support_size();
        if m == 0 || m >= self.p {
            return Err(Error::Argument(format!(
                "need p > m >= 1, got p = {}, m = {m}",
                self.p
            )));
        }
        for (name, g) in [
            ("theta_grid", &self.theta_grid),
            ("q_list", &self.q_list),
            ("alpha_grid", &self.alpha_grid),
        ] {
            if g.is_empty() {
                return Err(Error::Argument(format!("{name} is empty")));
            }
            if g.windows(2).any(|w| !(w[0] < w[1]))
                || g.iter().any(|v| !(v.is_finite() && *v > 0.0))
            {
                return Err(Error::Argument(format!(
                    "{name} must be positive and strictly ascending"
                )));
            }
        }
        if let Some(q) = self.q_list.iter().find(|q| **q <= 1.0) {
            return Err(Error::Argument(format!(
                "q = {q} is not supported (need q > 1; q = 1 is the Sqrt-Lasso)"
            )));
        }
        if self.repetitions == 0 || self.workers == 0 || self.k0 == 0 {
            return Err(Error::Argument(
                "repetitions, workers and k0 must be positive".into(),
            ));
        }
        if !(self.zero_threshold >= 0.0) || !(self.sigma >= 0.0) || !(0.0..1.0).contains(&self.corr)
        {
            return Err(Error::Argument(
                "need zero_threshold >= 0, sigma >= 0, corr in [0, 1)".into(),
            ));
        }
        self.solver.validate()
    }
}

pub fn phase_config_id(theta: f64, q: f64, rep: usize) -> String {
    format!("theta={theta};q={q};rep={rep}")
}

struct PathOutcome {
    alpha: f64,
    hamming: usize,
    b: Vector,
    converged: bool,
    alphas_evaluated: usize,
    iterations: usize,
}

/// Sweeps the alpha grid for one data set and one `q`, keeping the estimate
/// with the smallest Hamming distance (smallest alpha on ties).
fn alpha_path(
    config: &PhaseTransitionConfig,
    base: &TrexProblem,
    projectors: &[(GraphProjector, GraphProjector)],
    b_star: &Vector,
) -> Result<PathOutcome> {
    let p = base.p();
    let mut states: Vec<(DRState, DRState)> = (0..p)
        .map(|_| (initial_state(base), initial_state(base)))
        .collect();
    let mut best: Option<PathOutcome> = None;
    let mut iterations = 0;
    for (k, &alpha) in config.alpha_grid.iter().enumerate() {
        let problem = base.with_alpha(alpha)?;
        let mut winner: Option<(f64, Vector, bool)> = None;
        let mut all_converged = true;
        for j in 1..=p {
            let (mut a, mut b) = if config.warm_start {
                states[j - 1].clone()
            } else {
                (initial_state(base), initial_state(base))
            };
            a.restart();
            b.restart();
            let (plus, minus) = &projectors[j - 1];
            let (out, other) = dr_sel_from(
                &problem,
                j,
                (plus, minus),
                &config.solver,
                config.k0,
                (a, b),
            )?;
            iterations += out.total_iterations;
            all_converged &= out.solution.converged;
            let obj = out.solution.objective;
            if !obj.is_nan() && winner.as_ref().is_none_or(|w| obj < w.0) {
                winner = Some((obj, out.solution.b.clone(), out.solution.converged));
            }
            states[j - 1] = if out.selected == (SubproblemId { j, s: 1 }) {
                (out.solution.state, other)
            } else {
                (other, out.solution.state)
            };
        }
        let (_, b_hat, _) = winner.ok_or_else(|| {
            Error::Convergence(format!("no finite TREX objective at alpha = {alpha}"))
        })?;
        let hamming = support_metrics(&base.x, &b_hat, b_star, config.zero_threshold)?.hamming;
        if best.as_ref().is_none_or(|b| hamming < b.hamming) {
            best = Some(PathOutcome {
                alpha,
                hamming,
                b: b_hat,
                converged: all_converged,
                alphas_evaluated: 0,
                iterations: 0,
            });
        }
        if config.stop_at_exact && hamming == 0 {
            let mut out = best.expect("set above");
            out.alphas_evaluated = k + 1;
            out.iterations = iterations;
            return Ok(out);
        }
    }
    let mut out = best.expect("alpha grid is nonempty");
    out.alphas_evaluated = config.alpha_grid.len();
    out.iterations = iterations;
    Ok(out)
}

fn run_dataset(
    config: &PhaseTransitionConfig,
    theta_idx: usize,
    rep: usize,
) -> Result<ExperimentTable> {
    let theta = config.theta_grid[theta_idx];
    let m = config.support_size();
    let n = n_for_theta(theta, config.p, m)?;
    let spec = LinearModelSpec {
        n,
        p: config.p,
        m,
        sigma: config.sigma,
        corr: config.corr,
        seed: config.seed,
        stream: ((theta_idx as u64) << 32) | rep as u64,
    };
    let model = gen_linear_model(&spec)?;
    let base = TrexProblem::new(model.x.clone(), model.z.clone(), 1.0, 2.0)?;
    let projectors = (1..=config.p)
        .map(|j| {
            let plus = subproblem_projector(&base, SubproblemId { j, s: 1 })?;
            let minus = plus.with_first_row_negated();
            Ok((plus, minus))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ExperimentTable::new();
    for &q in &config.q_list {
        let problem = TrexProblem { q, ..base.clone() };
        let out = alpha_path(config, &problem, &projectors, &model.b_star)?;
        let metrics = support_metrics(&model.x, &out.b, &model.b_star, config.zero_threshold)?;
        debug_assert_eq!(metrics.hamming, out.hamming);
        let id = phase_config_id(theta, q, rep);
        let values = [
            theta,
            n as f64,
            out.alpha,
            f64::from(u8::from(metrics.exact_recovery)),
            metrics.hamming as f64,
            metrics.est_err,
            metrics.pred_err,
            f64::from(u8::from(out.converged)),
            out.alphas_evaluated as f64,
            out.iterations as f64,
        ];
        for (name, value) in PHASE_METRICS.iter().zip(values) {
            table.push(id.clone(), config.seed, *name, value);
        }
        log::info!(
            "phase transition {id}: n={n} alpha={} hamming={}",
            out.alpha,
            metrics.hamming
        );
    }
    Ok(table)
}

/// Support-recovery phase transition of generalized TREX over `theta`.
pub fn run_phase_transition(config: &PhaseTransitionConfig) -> Result<ExperimentTable> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.theta_grid.len())
        .flat_map(|t| (0..config.repetitions).map(move |r| (t, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))?;
    let parts = pool.install(|| {
        jobs.par_iter()
            .map(|&(t, r)| run_dataset(config, t, r))
            .collect::<Result<Vec<_>>>()
    })?;
    // Rows ordered by theta, then q, then repetition.
    let mut table = ExperimentTable::new();
    for t in 0..config.theta_grid.len() {
        for qi in 0..config.q_list.len() {
            for r in 0..config.repetitions {
                let part = &parts[t * config.repetitions + r];
                let chunk = PHASE_METRICS.len();
                for row in &part.rows()[qi * chunk..(qi + 1) * chunk] {
                    table.push(
                        row.config_id.clone(),
                        row.seed,
                        row.metric.clone(),
                        row.value,
                    );
                }
            }
        }
    }
    Ok(table)
}

/// Mean exact-recovery rate per `q` (in `q_list` order) and `theta`.
pub fn recovery_rates(
    config: &PhaseTransitionConfig,
    table: &ExperimentTable,
) -> Vec<(f64, Vec<(f64, f64)>)> {
    config
        .q_list
        .iter()
        .map(|&q| {
            let curve = config
                .theta_grid
                .iter()
                .map(|&theta| {
                    let hits: Vec<f64> = (0..config.repetitions)
                        .filter_map(|r| {
                            let id = phase_config_id(theta, q, r);
                            table
                                .rows()
                                .iter()
                                .find(|row| row.config_id == id && row.metric == "exact_recovery")
                        })
                        .map(|row| row.value)
                        .collect();
                    (theta, hits.iter().sum::<f64>() / hits.len().max(1) as f64)
                })
                .collect();
            (q, curve)
        })
        .collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut k = i;
            while k + 1 < idx.len() && v[idx[k + 1]] == v[idx[i]] {
                k += 1;
            }
            let avg = (i + k) as f64 / 2.0 + 1.0;
            for &t in &idx[i..=k] {
                r[t] = avg;
            }
            i = k + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return f64::NAN;
    }
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PhaseTransitionConfig {
        PhaseTransitionConfig {
            p: 12,
            m: Some(2),
            theta_grid: vec![0.5, 2.0],
            q_list: vec![2.0],
            alpha_grid: vec![0.5, 1.0],
            repetitions: 2,
            ..Default::default()
        }
    }

    #[test]
    fn default_grids() {
        let c = PhaseTransitionConfig::default();
        assert_eq!(c.theta_grid, vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6]);
        assert_eq!(c.alpha_grid.len(), 39);
        assert_eq!((c.alpha_grid[0], c.alpha_grid[38]), (0.1, 2.0));
        assert_eq!(c.support_size(), 10);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn validation_rejects_bad_grids() {
        assert!(PhaseTransitionConfig {
            theta_grid: vec![],
            ..small()
        }
        .validate()
        .is_err());
        assert!(PhaseTransitionConfig {
            alpha_grid: vec![1.0, 0.5],
            ..small()
        }
        .validate()
        .is_err());
        assert!(PhaseTransitionConfig {
            q_list: vec![1.0],
            ..small()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn table_schema_and_row_count() {
        let c = small();
        let t = run_phase_transition(&c).unwrap();
        assert_eq!(t.len(), 2 * 1 * 2 * PHASE_METRICS.len());
        assert_eq!(t.rows()[0].config_id, "theta=0.5;q=2;rep=0");
        for h in t.values("hamming") {
            assert!(h >= 0.0 && h <= 12.0);
        }
        let rates = recovery_rates(&c, &t);
        assert_eq!(rates.len(), 1);
        assert_eq!(rates[0].1.len(), 2);
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[0.1, 0.5, 0.9]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert!(spearman(&[1.0, 2.0], &[1.0, 1.0]).is_nan());
        let s = spearman(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 0.5, 1.0]);
        assert!(s > 0.9 && s < 1.0);
    }
}
