use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::solvers::graph::GraphProjector;

/// Relaxation parameters `mu_k`, each in `]0, 2[`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Relaxation {
    Constant(f64),
    /// `mu_k` for the first iterations; the last entry repeats afterwards.
    Schedule(Vec<f64>),
}

impl Relaxation {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Relaxation::Constant(mu) => *mu,
            Relaxation::Schedule(s) => s[k.min(s.len() - 1)],
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Relaxation::Constant(mu) => std::slice::from_ref(mu),
            Relaxation::Schedule(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DRConfig {
    pub gamma: f64,
    pub relaxation: Relaxation,
    pub tol: f64,
    pub max_iter: usize,
    pub check_every: usize,
    /// Maximum number of trace entries kept; older entries are decimated.
    pub trace_cap: usize,
}

impl Default for DRConfig {
    fn default() -> Self {
        Self {
            gamma: 70.0,
            relaxation: Relaxation::Constant(1.95),
            tol: 1e-10,
            max_iter: 100_000,
            check_every: 1,
            trace_cap: 10_000,
        }
    }
}

impl DRConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Argument(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        let mus = self.relaxation.values();
        if mus.is_empty() {
            return Err(Error::Argument("relaxation schedule is empty".into()));
        }
        if let Some(mu) = mus.iter().find(|mu| !(**mu > 0.0 && **mu < 2.0)) {
            return Err(Error::Argument(format!(
                "relaxation must lie in ]0, 2[, got {mu}"
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Argument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 || self.check_every == 0 || self.trace_cap < 2 {
            return Err(Error::Argument(
                "max_iter and check_every must be positive, trace_cap at least 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub objective: f64,
    pub delta_x: f64,
    pub delta_y: f64,
}

/// Bounded convergence trace; when full, every other entry is dropped and
/// the recording stride doubles.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
    stride: usize,
    cap: usize,
}

impl Trace {
    fn new(cap: usize) -> Self {
        Self {
            entries: Vec::new(),
            stride: 1,
            cap,
        }
    }

    fn record(&mut self, count: usize, entry: TraceEntry) {
        if count % self.stride != 0 {
            return;
        }
        if self.entries.len() >= self.cap {
            let kept: Vec<_> = self.entries.iter().copied().step_by(2).collect();
            self.entries = kept;
            self.stride *= 2;
            if count % self.stride != 0 {
                return;
            }
        }
        self.entries.push(entry);
    }
}

/// Outcome of a splitting solve.
#[derive(Debug, Clone)]
pub struct DRResult {
    pub solution: Vector,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Trace,
}

type Prox<'a> = &'a dyn Fn(&Vector, f64) -> Result<Vector>;

/// Douglas-Rachford for `min F + G`:
/// `x_k = prox_{gamma G}(y_k)`, `z_k = prox_{gamma F}(2 x_k - y_k)`,
/// `y_{k+1} = y_k + mu_k (z_k - x_k)`.
///
/// Stops once `min(||x_k - x_{k-1}||, ||y_{k+1} - y_k||) <= tol`. Without
/// convergence the iterate with the lowest `objective` is returned (the
/// last one if no objective is given).
pub fn douglas_rachford(
    prox_f: Prox<'_>,
    prox_g: Prox<'_>,
    config: &DRConfig,
    init: &Vector,
    objective: Option<&dyn Fn(&Vector) -> f64>,
) -> Result<DRResult> {
    config.validate()?;
    let gamma = config.gamma;
    let mut y = init.clone();
    let mut prev_x: Option<Vector> = None;
    let mut trace = Trace::new(config.trace_cap);
    let mut best: Option<(f64, Vector)> = None;
    let mut last_x = init.clone();
    for k in 0..config.max_iter {
        let x = prox_g(&y, gamma)?;
        let z = prox_f(&(2.0 * &x - &y), gamma)?;
        let step = config.relaxation.at(k) * (&z - &x);
        y += &step;
        let dx = prev_x.as_ref().map_or(f64::INFINITY, |p| (&x - p).norm());
        let dy = step.norm();
        let count = k + 1;
        if count % config.check_every == 0 {
            let obj = objective.map_or(f64::NAN, |f| f(&x));
            trace.record(
                count,
                TraceEntry {
                    iter: count,
                    objective: obj,
                    delta_x: dx,
                    delta_y: dy,
                },
            );
            if obj.is_finite() && best.as_ref().is_none_or(|b| obj < b.0) {
                best = Some((obj, x.clone()));
            }
            if dx.min(dy) <= config.tol {
                let objective = objective.map_or(f64::NAN, |f| f(&x));
                return Ok(DRResult {
                    solution: x,
                    objective,
                    converged: true,
                    iterations: count,
                    trace,
                });
            }
        }
        last_x = x.clone();
        prev_x = Some(x);
    }
    let (objective, solution) = match best {
        Some(b) => b,
        None => (objective.map_or(f64::NAN, |f| f(&last_x)), last_x),
    };
    Ok(DRResult {
        solution,
        objective,
        converged: false,
        iterations: config.max_iter,
        trace,
    })
}

/// Iterates of the graph-constrained scheme, enough to resume a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DRState {
    pub x: Vector,
    pub y: Vector,
    pub b: Vector,
    pub c: Vector,
    pub z: Vector,
    pub t: Vector,
    pub iter: usize,
    /// Lowest objective seen so far and its `b`; survives resumption.
    pub best: Option<(f64, Vector)>,
}

impl DRState {
    /// Starts from `x_0 = init`, `y_0 = 0`.
    pub fn new(init: Vector, range_dim: usize) -> Self {
        let p = init.len();
        Self {
            x: init,
            y: Vector::zeros(range_dim),
            b: Vector::zeros(p),
            c: Vector::zeros(range_dim),
            z: Vector::zeros(p),
            t: Vector::zeros(range_dim),
            iter: 0,
            best: None,
        }
    }

    /// Drops the remembered best iterate, e.g. before reusing the state as a
    /// warm start for a different objective.
    pub fn forget_best(&mut self) {
        self.best = None;
    }

    /// Keeps the driver blocks `x, y` and restarts the iteration count, for
    /// warm-starting a related problem.
    pub fn restart(&mut self) {
        self.iter = 0;
        self.best = None;
    }
}

/// Douglas-Rachford on `min h(b) + g(Mb)`, run in the product space with the
/// graph of `M` as the second function:
///
/// ```text
/// q = M x - y;  b = x - R q;  c = M b
/// z = prox_{gamma h}(2b - x);  t = prox_{gamma g}(2c - y)
/// x += mu (z - b);  y += mu (t - c)
/// ```
pub struct CompositeDR<'a> {
    pub proj: &'a GraphProjector,
    pub prox_h: Prox<'a>,
    pub prox_g: Prox<'a>,
    /// Objective at `(b, c = Mb)`; drives the trace and best-iterate fallback.
    pub objective: Option<&'a dyn Fn(&Vector, &Vector) -> f64>,
}

/// Per-iteration deltas of [`CompositeDR::step`].
#[derive(Debug, Clone, Copy)]
pub struct StepDeltas {
    pub delta_b: f64,
    pub delta_y: f64,
}

impl CompositeDR<'_> {
    /// One pass of the scheme; returns `||b_k - b_{k-1}||` and `||y_{k+1} - y_k||`.
    pub fn step(&self, state: &mut DRState, gamma: f64, mu: f64) -> Result<StepDeltas> {
        let m = self.proj.m();
        let q = m * &state.x - &state.y;
        let b = &state.x - self.proj.r() * q;
        let c = m * &b;
        let z = (self.prox_h)(&(2.0 * &b - &state.x), gamma)?;
        let t = (self.prox_g)(&(2.0 * &c - &state.y), gamma)?;
        let delta_b = if state.iter == 0 {
            f64::INFINITY
        } else {
            (&b - &state.b).norm()
        };
        state.x.axpy(mu, &z, 1.0);
        state.x.axpy(-mu, &b, 1.0);
        let dy = mu * (&t - &c);
        state.y += &dy;
        state.b = b;
        state.c = c;
        state.z = z;
        state.t = t;
        state.iter += 1;
        Ok(StepDeltas {
            delta_b,
            delta_y: dy.norm(),
        })
    }

    /// Runs from `state` until the stopping rule fires or `config.max_iter`
    /// total iterations have been taken.
    pub fn run(&self, state: &mut DRState, config: &DRConfig) -> Result<DRResult> {
        config.validate()?;
        if state.x.len() != self.proj.domain_dim() || state.y.len() != self.proj.range_dim() {
            return Err(Error::Argument(
                "DR state does not match the graph dimensions".into(),
            ));
        }
        let eval = |s: &DRState| self.objective.map_or(f64::NAN, |f| f(&s.b, &s.c));
        let mut trace = Trace::new(config.trace_cap);
        while state.iter < config.max_iter {
            let mu = config.relaxation.at(state.iter);
            let d = self.step(state, config.gamma, mu)?;
            if state.iter % config.check_every != 0 {
                continue;
            }
            let obj = eval(state);
            trace.record(
                state.iter,
                TraceEntry {
                    iter: state.iter,
                    objective: obj,
                    delta_x: d.delta_b,
                    delta_y: d.delta_y,
                },
            );
            log::trace!(
                "dr iter {} objective {obj:e} delta_b {:e} delta_y {:e}",
                state.iter,
                d.delta_b,
                d.delta_y
            );
            if obj.is_finite() && state.best.as_ref().is_none_or(|b| obj < b.0) {
                state.best = Some((obj, state.b.clone()));
            }
            if d.delta_b.min(d.delta_y) <= config.tol {
                return Ok(DRResult {
                    solution: state.b.clone(),
                    objective: obj,
                    converged: true,
                    iterations: state.iter,
                    trace,
                });
            }
        }
        let (objective, solution) = match &state.best {
            Some(b) => b.clone(),
            None => (eval(state), state.b.clone()),
        };
        Ok(DRResult {
            solution,
            objective,
            converged: false,
            iterations: state.iter,
            trace,
        })
    }
}

/// Composite solve from a fresh state `x_0 = init`, `y_0 = 0`.
pub fn dr_composite(
    prox_h: Prox<'_>,
    prox_g: Prox<'_>,
    proj: &GraphProjector,
    config: &DRConfig,
    init: &Vector,
    objective: Option<&dyn Fn(&Vector, &Vector) -> f64>,
) -> Result<(DRResult, DRState)> {
    let solver = CompositeDR {
        proj,
        prox_h,
        prox_g,
        objective,
    };
    let mut state = DRState::new(init.clone(), proj.range_dim());
    let result = solver.run(&mut state, config)?;
    Ok((result, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use crate::prox::soft_threshold;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn quad_prox(a: f64) -> impl Fn(&Vector, f64) -> Result<Vector> {
        // prox of gamma/2 ||. - a||^2
        move |x, g| Ok::<_, Error>(x.map(|xi| (xi + g * a) / (1.0 + g)))
    }

    fn cfg(gamma: f64, mu: f64) -> DRConfig {
        DRConfig {
            gamma,
            relaxation: Relaxation::Constant(mu),
            ..Default::default()
        }
    }

    #[test]
    fn midpoint_of_two_quadratics() {
        let (f, g) = (quad_prox(0.0), quad_prox(2.0));
        let r = douglas_rachford(&f, &g, &cfg(1.0, 1.0), &v(&[5.0]), None).unwrap();
        assert!(r.converged);
        assert!((r.solution[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn abs_plus_quadratic() {
        let f = |x: &Vector, g: f64| Ok::<_, Error>(v(&soft_threshold(x.as_slice(), g)));
        let g = quad_prox(3.0);
        let r = douglas_rachford(&f, &g, &cfg(0.7, 1.5), &v(&[0.0]), None).unwrap();
        assert!(r.converged);
        assert!((r.solution[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn common_point_of_two_singletons() {
        let zero = |x: &Vector, _: f64| Ok::<_, Error>(Vector::zeros(x.len()));
        let r = douglas_rachford(&zero, &zero, &cfg(1.0, 1.0), &v(&[3.0, -4.0]), None).unwrap();
        assert!(r.converged && r.solution.norm() == 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(1.0, 2.0).validate().is_err());
        assert!(cfg(1.0, 0.0).validate().is_err());
        assert!(cfg(0.0, 1.0).validate().is_err());
        let bad = DRConfig {
            relaxation: Relaxation::Schedule(vec![1.0, 2.5]),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(DRConfig {
            tol: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(DRConfig::default().validate().is_ok());
    }

    #[test]
    fn relaxation_schedule_repeats_last() {
        let r = Relaxation::Schedule(vec![1.0, 1.5]);
        assert_eq!((r.at(0), r.at(1), r.at(7)), (1.0, 1.5, 1.5));
    }

    #[test]
    fn composite_least_squares_with_invertible_map() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]);
        let a = v(&[0.7, -1.2]);
        let target = &m * &a;
        let proj = GraphProjector::new(m).unwrap();
        let zero_h = |x: &Vector, _: f64| Ok::<_, Error>(x.clone());
        let g = move |x: &Vector, gm: f64| Ok::<_, Error>((x + gm * &target) / (1.0 + gm));
        let (r, _) =
            dr_composite(&zero_h, &g, &proj, &cfg(1.0, 1.0), &Vector::zeros(2), None).unwrap();
        assert!(r.converged);
        assert!((&r.solution - a).norm() < 1e-8);
    }

    #[test]
    fn composite_tiny_lasso() {
        let proj = GraphProjector::new(Matrix::identity(2, 2)).unwrap();
        let h = |x: &Vector, g: f64| Ok::<_, Error>(v(&soft_threshold(x.as_slice(), g)));
        let z = v(&[3.0, 0.5]);
        let g = move |x: &Vector, gm: f64| Ok::<_, Error>((x + gm * &z) / (1.0 + gm));
        let (r, _) = dr_composite(&h, &g, &proj, &cfg(1.0, 1.0), &Vector::zeros(2), None).unwrap();
        assert!(r.converged);
        assert!(
            (&r.solution - v(&[2.0, 0.0])).norm() < 1e-8,
            "{}",
            r.solution
        );
    }

    #[test]
    fn composite_matches_product_space_dr() {
        let m = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.2]);
        let proj = GraphProjector::new(m).unwrap();
        let z = v(&[1.0, -2.0, 0.5]);
        let h = |x: &Vector, g: f64| Ok::<_, Error>(v(&soft_threshold(x.as_slice(), 0.3 * g)));
        let zc = z.clone();
        let g = move |x: &Vector, gm: f64| Ok::<_, Error>((x + gm * &zc) / (1.0 + gm));
        let config = DRConfig {
            max_iter: 40,
            ..cfg(0.8, 1.3)
        };

        let solver = CompositeDR {
            proj: &proj,
            prox_h: &h,
            prox_g: &g,
            objective: None,
        };
        let mut state = DRState::new(v(&[0.4, -0.1]), 3);
        let mut composite_b = Vec::new();
        for k in 0..40 {
            solver
                .step(&mut state, config.gamma, config.relaxation.at(k))
                .unwrap();
            composite_b.push(state.b.clone());
        }

        // Same iteration on the stacked vector (b, c): G = graph indicator.
        let split = |w: &Vector| (w.rows(0, 2).into_owned(), w.rows(2, 3).into_owned());
        let stack =
            |a: &Vector, b: &Vector| Vector::from_iterator(5, a.iter().chain(b.iter()).copied());
        let prox_graph = |w: &Vector, _: f64| {
            let (b, c) = split(w);
            let (pb, pc) = proj.project(&b, &c)?;
            Ok::<_, Error>(stack(&pb, &pc))
        };
        let prox_sum = |w: &Vector, gm: f64| {
            let (b, c) = split(w);
            Ok::<_, Error>(stack(&h(&b, gm)?, &g(&c, gm)?))
        };
        let mut y = stack(&v(&[0.4, -0.1]), &Vector::zeros(3));
        for (k, expected_b) in composite_b.iter().enumerate() {
            let x = prox_graph(&y, config.gamma).unwrap();
            let zk = prox_sum(&(2.0 * &x - &y), config.gamma).unwrap();
            y += config.relaxation.at(k) * (&zk - &x);
            assert!((split(&x).0 - expected_b).norm() < 1e-12, "iteration {k}");
        }
        let _ = config;
    }

    #[test]
    fn trace_is_decimated_to_cap() {
        let mut t = Trace::new(8);
        for i in 1..=100 {
            t.record(
                i,
                TraceEntry {
                    iter: i,
                    objective: 0.0,
                    delta_x: 0.0,
                    delta_y: 0.0,
                },
            );
        }
        assert!(t.entries.len() <= 8);
        assert!(t.entries.windows(2).all(|w| w[0].iter < w[1].iter));
        assert!(t.entries.last().unwrap().iter > 80);
    }

    #[test]
    fn fejer_monotone_with_unit_relaxation() {
        // F = 1/2 ||. - a||^2, G = 1/2 ||. - b||^2: y* = (1 + gamma) x* - gamma b
        // with x* = (a + b) / 2.
        let (a, b, gamma) = (v(&[1.0, -2.0]), v(&[3.0, 0.5]), 0.9);
        let (fa, fb) = (a.clone(), b.clone());
        let f = move |x: &Vector, g: f64| Ok::<_, Error>((x + g * &fa) / (1.0 + g));
        let g = move |x: &Vector, gm: f64| Ok::<_, Error>((x + gm * &fb) / (1.0 + gm));
        let xs = (&a + &b) / 2.0;
        let ystar = (1.0 + gamma) * &xs - gamma * &b;
        let mut y = v(&[10.0, -7.0]);
        let mut dist = (&y - &ystar).norm();
        for _ in 0..50 {
            let x = g(&y, gamma).unwrap();
            let z = f(&(2.0 * &x - &y), gamma).unwrap();
            y += &z - &x;
            let d = (&y - &ystar).norm();
            assert!(d <= dist + 1e-12);
            dist = d;
        }
    }
}
