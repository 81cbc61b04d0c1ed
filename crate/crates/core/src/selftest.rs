//! Randomized property suites for the perspective proximity operators.
//!
//! Each suite reports the largest violation it observed together with the
//! input that produced it, so a failure can be replayed from the report.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::oracle::{self, GridMinimizer, Search};
use crate::perspective::{HuberSpec, PerspectiveKind, PowerSpec, Profile, VapnikSpec};
use crate::prox::{norm, ProxStep};

/// One random instance: a kind, a prox step and a flat input point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub kind: PerspectiveKind,
    pub gamma: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub kind: String,
    pub draws: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub worst: Option<Draw>,
}

impl SuiteReport {
    fn new(
        suite: &str,
        kind: &str,
        draws: usize,
        tolerance: f64,
        worst: Option<(f64, Draw)>,
    ) -> Self {
        let max_violation = worst.as_ref().map_or(0.0, |w| w.0);
        Self {
            suite: suite.into(),
            kind: kind.into(),
            draws,
            max_violation,
            tolerance,
            passed: max_violation <= tolerance,
            worst: worst.map(|w| w.1),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| uniform(rng, -scale, scale)).collect()
}

fn random_profile(rng: &mut ChaCha8Rng) -> Profile {
    if rng.random_bool(0.5) {
        Profile::Cosh
    } else {
        Profile::Power {
            exponent: *[1.5, 2.0, 3.0].choose(rng).unwrap(),
            scale: uniform(rng, 0.5, 2.0),
        }
    }
}

fn random_offsets(rng: &mut ChaCha8Rng, dim: usize) -> (f64, Vec<f64>) {
    if rng.random_bool(0.5) {
        (0.0, Vec::new())
    } else {
        (uniform(rng, -1.0, 1.0), random_vec(rng, dim, 1.0))
    }
}

/// A random instance of the named kind whose `y` block has dimension `dim`
/// (forced to 1 for the scalar kinds).
pub fn sample_kind(name: &str, dim: usize, rng: &mut ChaCha8Rng) -> PerspectiveKind {
    match name {
        "radial" => {
            let (delta, v) = random_offsets(rng, dim);
            PerspectiveKind::Radial {
                profile: random_profile(rng),
                delta,
                v,
            }
        }
        "sqrt" => PerspectiveKind::Sqrt,
        "power" => {
            let q = if rng.random_bool(0.6) {
                *[9.0 / 8.0, 7.0 / 6.0, 1.5, 2.0, 3.0].choose(rng).unwrap()
            } else {
                uniform(rng, 1.1, 4.0)
            };
            let (delta, v) = random_offsets(rng, dim);
            PerspectiveKind::Power(PowerSpec {
                q,
                alpha: uniform(rng, 0.3, 3.0),
                delta,
                v,
            })
        }
        "quadratic" => {
            let (delta, v) = random_offsets(rng, dim);
            PerspectiveKind::Quadratic {
                alpha: uniform(rng, 0.3, 3.0),
                delta,
                v,
            }
        }
        "distance-ball" => PerspectiveKind::DistanceBall {
            profile: random_profile(rng),
        },
        "cone-orthant" => PerspectiveKind::ConeOrthant,
        "huber" => PerspectiveKind::Huber(HuberSpec {
            rho: uniform(rng, 0.3, 3.0),
        }),
        "vapnik" => PerspectiveKind::Vapnik(VapnikSpec {
            epsilon: uniform(rng, 0.2, 2.0),
        }),
        "separable" => {
            let inner = match rng.random_range(0..3) {
                0 => sample_kind("quadratic", 1, rng),
                1 => sample_kind("huber", 1, rng),
                _ => sample_kind("vapnik", 1, rng),
            };
            PerspectiveKind::Separable {
                inner: Box::new(inner),
                block: 2,
            }
        }
        other => panic!("unknown perspective kind {other}"),
    }
}

/// Ambient length of the flat argument for a kind with `dim`-dimensional `y`.
fn flat_len(kind: &PerspectiveKind, dim: usize) -> usize {
    match kind {
        PerspectiveKind::Huber(_) | PerspectiveKind::Vapnik(_) => 2,
        PerspectiveKind::Separable { block, .. } => block * dim.min(2),
        _ => dim + 1,
    }
}

/// Random kind parameters, `gamma` in `[0.2, 3]`, coordinates in `[-3, 3]`,
/// `y` dimension 1 to `max_dim`.
pub fn sample_draw(name: &str, max_dim: usize, rng: &mut ChaCha8Rng) -> Draw {
    let dim = rng.random_range(1..=max_dim);
    let kind = sample_kind(name, dim, rng);
    let gamma = uniform(rng, 0.2, 3.0);
    let x = random_vec(rng, flat_len(&kind, dim), 3.0);
    Draw { kind, gamma, x }
}

fn draw_rng(seed: u64, suite: u64, name: &str, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind_id = PerspectiveKind::NAMES
        .iter()
        .position(|n| *n == name)
        .unwrap_or(99) as u64;
    rng.set_stream((suite << 40) | (kind_id << 32) | i as u64);
    rng
}

fn max_by_violation(items: impl ParallelIterator<Item = (f64, Draw)>) -> Option<(f64, Draw)> {
    items.reduce_with(|a, b| if b.0 > a.0 || b.0.is_nan() { b } else { a })
}

/// The prox at `x`; an error becomes a NaN vector so it registers as a violation.
fn prox(d: &Draw, gamma: f64, x: &[f64]) -> Vec<f64> {
    match ProxStep::new(gamma).and_then(|s| d.kind.prox_flat(s, x)) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("{} prox failed at {x:?}: {e}", d.kind.name());
            vec![f64::NAN; x.len()]
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Nested line searches are exact for any convex function but cost about
/// `70^d` and miss domains that are thin slices (the sqrt cone); the grid is
/// fast but can stall in oblique kinks or sharp wedges, so its answer is
/// polished by exact searches over coordinate pairs.
fn oracle_search(d: &Draw) -> Search {
    const WIDTH: f64 = 1e-12;
    match &d.kind {
        PerspectiveKind::Sqrt => Search::Grid(GridMinimizer::default()),
        _ if d.x.len() <= 2 => Search::Nested(WIDTH),
        _ => Search::GridThenPairs(GridMinimizer::default(), WIDTH),
    }
}

/// Brute-force Moreau minimization versus the closed form, absolute error.
pub fn oracle_equivalence(name: &str, draws: usize, seed: u64, tolerance: f64) -> SuiteReport {
    let worst = max_by_violation((0..draws).into_par_iter().map(|i| {
        let d = sample_draw(name, 3, &mut draw_rng(seed, 1, name, i));
        let got = prox(&d, d.gamma, &d.x);
        let f = |u: &[f64]| oracle::perspective_value(&d.kind, u);
        let reference = oracle::brute_force_prox(&f, d.gamma, &d.x, &oracle_search(&d));
        let err = got
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        (
            if got.iter().any(|v| v.is_nan()) {
                f64::INFINITY
            } else {
                err
            },
            d,
        )
    }));
    SuiteReport::new("oracle-equivalence", name, draws, tolerance, worst)
}

/// `||Pu - Pv||^2 - <Pu - Pv, u - v>` on random pairs; nonpositive for a prox.
pub fn firm_nonexpansiveness(name: &str, pairs: usize, seed: u64, tolerance: f64) -> SuiteReport {
    let worst = max_by_violation((0..pairs).into_par_iter().map(|i| {
        let mut rng = draw_rng(seed, 2, name, i);
        let d = sample_draw(name, 3, &mut rng);
        // Half the partners are close to the first point, where the
        // inequality is tightest relative to rounding.
        let spread = if rng.random_bool(0.5) { 3.0 } else { 1e-3 };
        let v: Vec<f64> =
            d.x.iter()
                .map(|&a| a + uniform(&mut rng, -spread, spread))
                .collect();
        let (pu, pv) = (prox(&d, d.gamma, &d.x), prox(&d, d.gamma, &v));
        let dp: Vec<f64> = pu.iter().zip(&pv).map(|(a, b)| a - b).collect();
        let du: Vec<f64> = d.x.iter().zip(&v).map(|(a, b)| a - b).collect();
        let lhs: f64 = dp.iter().map(|a| a * a).sum();
        let rhs: f64 = dp.iter().zip(&du).map(|(a, b)| a * b).sum();
        let viol = lhs - rhs;
        (
            if viol.is_nan() { f64::INFINITY } else { viol },
            Draw {
                x: [d.x.clone(), v].concat(),
                ..d
            },
        )
    }));
    SuiteReport::new("firm-nonexpansiveness", name, pairs, tolerance, worst)
}

/// Counts draws where "prox is zero" and "threshold gate holds" disagree.
pub fn gate_equivalence(name: &str, draws: usize, seed: u64) -> SuiteReport {
    let worst = max_by_violation((0..draws).into_par_iter().map(|i| {
        let mut rng = draw_rng(seed, 3, name, i);
        let mut d = sample_draw(name, 3, &mut rng);
        // Pull some draws onto the zero region so both outcomes are exercised.
        if rng.random_bool(0.3) {
            d.x.iter_mut().skip(1).for_each(|v| *v *= 0.1);
            d.x[0] = -d.x[0].abs();
        }
        let out = prox(&d, d.gamma, &d.x);
        let zero = out.iter().all(|&v| v == 0.0);
        let gate = oracle::in_zero_region(&d.kind, d.gamma, &d.x);
        (if zero == gate { 0.0 } else { 1.0 }, d)
    }));
    SuiteReport::new("gate-equivalence", name, draws, 0.0, worst)
}

/// `prox_{l gamma}(l x) = l prox_gamma(x)` for `l` in `{0.5, 2, 10}`, error
/// relative to `max(1, ||l x||)`.
pub fn homogeneity(name: &str, draws: usize, seed: u64, tolerance: f64) -> SuiteReport {
    let worst = max_by_violation((0..draws).into_par_iter().map(|i| {
        let d = sample_draw(name, 3, &mut draw_rng(seed, 4, name, i));
        let base = prox(&d, d.gamma, &d.x);
        let mut viol = 0.0f64;
        for lambda in [0.5, 2.0, 10.0] {
            let lx: Vec<f64> = d.x.iter().map(|v| lambda * v).collect();
            let scaled = prox(&d, lambda * d.gamma, &lx);
            let expect: Vec<f64> = base.iter().map(|v| lambda * v).collect();
            let e = dist(&scaled, &expect) / norm(&lx).max(1.0);
            viol = viol.max(if e.is_nan() { f64::INFINITY } else { e });
        }
        (viol, d)
    }));
    SuiteReport::new("homogeneity", name, draws, tolerance, worst)
}

/// Moreau identity `prox = x - P_{gamma C}(x)` with `C` projected numerically;
/// defined for the scalar kinds with a closed conjugate domain.
pub fn moreau_identity(name: &str, draws: usize, seed: u64, tolerance: f64) -> SuiteReport {
    let worst = max_by_violation((0..draws).into_par_iter().map(|i| {
        let d = sample_draw(name, 1, &mut draw_rng(seed, 5, name, i));
        let radius = match d.kind {
            PerspectiveKind::Huber(h) => h.rho,
            PerspectiveKind::Vapnik(_) => 1.0,
            _ => panic!("moreau identity suite covers huber and vapnik only"),
        };
        let conj = |u: f64| oracle::base_conjugate(&d.kind, &[u]);
        let (mu, u) = oracle::project_scalar_gamma_c(&conj, radius, d.gamma, d.x[0], d.x[1]);
        let got = prox(&d, d.gamma, &d.x);
        let r = dist(&got, &[d.x[0] - mu, d.x[1] - u]) / norm(&d.x).max(1.0);
        (if r.is_nan() { f64::INFINITY } else { r }, d)
    }));
    SuiteReport::new("moreau-identity", name, draws, tolerance, worst)
}

/// Draw counts and tolerances for the full suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub seed: u64,
    pub oracle_draws: usize,
    pub oracle_tolerance: f64,
    pub pair_draws: usize,
    pub firm_tolerance: f64,
    pub gate_draws: usize,
    pub homogeneity_draws: usize,
    pub homogeneity_tolerance: f64,
    pub moreau_draws: usize,
    pub moreau_tolerance: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            oracle_draws: 1000,
            oracle_tolerance: 1e-5,
            pair_draws: 10_000,
            firm_tolerance: 1e-10,
            gate_draws: 10_000,
            homogeneity_draws: 10_000,
            homogeneity_tolerance: 1e-9,
            moreau_draws: 10_000,
            moreau_tolerance: 1e-6,
        }
    }
}

/// Property suites only (no brute-force oracle).
pub fn run_property_suites(cfg: &SuiteConfig) -> Vec<SuiteReport> {
    let mut out = Vec::new();
    for name in PerspectiveKind::NAMES {
        out.push(firm_nonexpansiveness(
            name,
            cfg.pair_draws,
            cfg.seed,
            cfg.firm_tolerance,
        ));
        out.push(gate_equivalence(name, cfg.gate_draws, cfg.seed));
        out.push(homogeneity(
            name,
            cfg.homogeneity_draws,
            cfg.seed,
            cfg.homogeneity_tolerance,
        ));
    }
    for name in ["huber", "vapnik"] {
        out.push(moreau_identity(
            name,
            cfg.moreau_draws,
            cfg.seed,
            cfg.moreau_tolerance,
        ));
    }
    out
}

/// Oracle equivalence for every kind.
pub fn run_oracle_suites(cfg: &SuiteConfig) -> Vec<SuiteReport> {
    PerspectiveKind::NAMES
        .iter()
        .map(|name| oracle_equivalence(name, cfg.oracle_draws, cfg.seed, cfg.oracle_tolerance))
        .collect()
}

pub fn run_all(cfg: &SuiteConfig) -> Vec<SuiteReport> {
    let mut out = run_oracle_suites(cfg);
    out.extend(run_property_suites(cfg));
    out
}
