use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::model::{gen_linear_model, LinearModelSpec};
use crate::experiments::table::ExperimentTable;
use crate::solvers::DRConfig;
use crate::trex::{dr_sel, solve_subproblem, SubproblemId, TrexProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub dims: Vec<usize>,
    pub n: usize,
    pub repetitions: usize,
    pub m: usize,
    pub corr: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub q: f64,
    /// Column (1-based) whose two signed subproblems are timed.
    pub j: usize,
    pub k0: usize,
    pub seed: u64,
    pub workers: usize,
    pub solver: DRConfig,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            dims: vec![20, 50, 100, 200, 500, 1000, 2000],
            n: 200,
            repetitions: 20,
            m: 20,
            corr: 0.3,
            sigma: 1.0,
            alpha: 0.5,
            q: 2.0,
            j: 1,
            k0: 50,
            seed: 0,
            workers: 1,
            solver: DRConfig::default(),
        }
    }
}

/// Metrics whose values depend on the wall clock.
pub const TIMING_METRICS: [&str; 2] = ["time_dr", "time_dr_sel"];

pub fn is_timing_metric(metric: &str) -> bool {
    metric.starts_with("time_")
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.repetitions == 0 || self.workers == 0 || self.k0 == 0 {
            return Err(Error::Argument(
                "dims, repetitions, workers and k0 must be nonempty/positive".into(),
            ));
        }
        if let Some(p) = self
            .dims
            .iter()
            .find(|p| **p < self.m.max(self.j) || **p == 0)
        {
            return Err(Error::Argument(format!(
                "dimension {p} is smaller than m = {} or j = {}",
                self.m, self.j
            )));
        }
        if self.j == 0 {
            return Err(Error::Argument("j is 1-based".into()));
        }
        self.solver.validate()
    }
}

fn run_one(config: &ScalingConfig, dim_idx: usize, rep: usize) -> Result<ExperimentTable> {
    let p = config.dims[dim_idx];
    let spec = LinearModelSpec {
        n: config.n,
        p,
        m: config.m,
        sigma: config.sigma,
        corr: config.corr,
        seed: config.seed,
        stream: ((dim_idx as u64) << 32) | rep as u64,
    };
    let model = gen_linear_model(&spec)?;
    let problem = TrexProblem::new(model.x, model.z, config.alpha, config.q)?;
    let id = format!("p={p};rep={rep}");

    let start = Instant::now();
    let plus = solve_subproblem(&problem, SubproblemId { j: config.j, s: 1 }, &config.solver)?;
    let minus = solve_subproblem(
        &problem,
        SubproblemId { j: config.j, s: -1 },
        &config.solver,
    )?;
    let time_dr = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let sel = dr_sel(&problem, config.j, &config.solver, config.k0)?;
    let time_dr_sel = start.elapsed().as_secs_f64();

    let mut t = ExperimentTable::new();
    let rows = [
        ("objective_plus", plus.objective),
        ("objective_minus", minus.objective),
        ("objective_dr_sel", sel.solution.objective),
        ("selected_sign", f64::from(sel.selected.s)),
        ("iterations_dr", (plus.iterations + minus.iterations) as f64),
        ("iterations_dr_sel", sel.total_iterations as f64),
        (
            "converged",
            f64::from(u8::from(
                plus.converged && minus.converged && sel.solution.converged,
            )),
        ),
        ("time_dr", time_dr),
        ("time_dr_sel", time_dr_sel),
    ];
    for (metric, value) in rows {
        t.push(id.clone(), config.seed, metric, value);
    }
    log::info!("scaling {id}: DR {time_dr:.3}s, DR-Sel {time_dr_sel:.3}s");
    Ok(t)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

/// Times the two signed subproblems of column `j` with plain DR and with
/// DR-Sel, per dimension and repetition; appends per-dimension median and
/// mean times.
pub fn run_scaling_benchmark(config: &ScalingConfig) -> Result<ExperimentTable> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.dims.len())
        .flat_map(|d| (0..config.repetitions).map(move |r| (d, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))?;
    let parts = pool.install(|| {
        jobs.par_iter()
            .map(|&(d, r)| run_one(config, d, r))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut table = ExperimentTable::new();
    for part in parts {
        table.extend(part);
    }
    for &p in &config.dims {
        let prefix = format!("p={p};rep=");
        for metric in TIMING_METRICS {
            let values: Vec<f64> = table
                .rows()
                .iter()
                .filter(|r| r.config_id.starts_with(&prefix) && r.metric == metric)
                .map(|r| r.value)
                .collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            table.push(
                format!("p={p};summary"),
                config.seed,
                format!("{metric}_median"),
                median(values),
            );
            table.push(
                format!("p={p};summary"),
                config.seed,
                format!("{metric}_mean"),
                mean,
            );
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_and_selection() {
        let config = ScalingConfig {
            dims: vec![20, 30],
            n: 40,
            repetitions: 2,
            m: 5,
            ..Default::default()
        };
        let t = run_scaling_benchmark(&config).unwrap();
        for metric in TIMING_METRICS {
            assert_eq!(t.values(metric).len(), 2 * 2);
        }
        let plus = t.values("objective_plus");
        let minus = t.values("objective_minus");
        let sel = t.values("objective_dr_sel");
        for k in 0..4 {
            assert!(sel[k] <= plus[k].min(minus[k]) + 1e-6);
        }
        assert_eq!(t.values("time_dr_median").len(), 2);
    }

    #[test]
    fn rejects_too_small_dimensions() {
        let config = ScalingConfig {
            dims: vec![10],
            ..Default::default()
        };
        assert!(config.validate().is_err());
    }
}
