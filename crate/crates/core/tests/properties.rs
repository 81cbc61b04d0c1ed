use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use prospect::experiments::{gen_linear_model, support_metrics, LinearModelSpec};
use prospect::oracle::in_zero_region;
use prospect::perspective::PerspectiveKind;
use prospect::prox::soft_threshold;
use prospect::selftest::sample_draw;
use prospect::solvers::{CompositeDR, DRConfig, DRState, GraphProjector};
use prospect::trex::{
    eval_subproblem_objective, eval_trex_objective, solve_subproblem, solve_trex_full,
    SubproblemId, TrexProblem,
};
use prospect::{Matrix, ProxStep, Vector};

fn kind_name() -> impl Strategy<Value = &'static str> {
    prop::sample::select(PerspectiveKind::NAMES.to_vec())
}

fn matrix(rows: usize, cols: usize, entries: &[f64]) -> Matrix {
    Matrix::from_row_slice(rows, cols, &entries[..rows * cols])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn prox_is_firmly_nonexpansive(name in kind_name(), seed in any::<u64>(), shift in prop::collection::vec(-2.0f64..2.0, 8)) {
        let d = sample_draw(name, 3, &mut ChaCha8Rng::seed_from_u64(seed));
        let step = ProxStep::new(d.gamma).unwrap();
        let v: Vec<f64> = d.x.iter().zip(&shift).map(|(a, s)| a + s).collect();
        let pu = d.kind.prox_flat(step, &d.x).unwrap();
        let pv = d.kind.prox_flat(step, &v).unwrap();
        let dp: Vec<f64> = pu.iter().zip(&pv).map(|(a, b)| a - b).collect();
        let lhs: f64 = dp.iter().map(|a| a * a).sum();
        let rhs: f64 = dp.iter().zip(d.x.iter().zip(&v)).map(|(p, (a, b))| p * (a - b)).sum();
        prop_assert!(lhs - rhs <= 1e-10, "{} > {}", lhs, rhs);
    }

    #[test]
    fn prox_scales_with_step(name in kind_name(), seed in any::<u64>(), lambda in 0.1f64..20.0) {
        let d = sample_draw(name, 3, &mut ChaCha8Rng::seed_from_u64(seed));
        let base = d.kind.prox_flat(ProxStep::new(d.gamma).unwrap(), &d.x).unwrap();
        let lx: Vec<f64> = d.x.iter().map(|v| lambda * v).collect();
        let scaled = d.kind.prox_flat(ProxStep::new(lambda * d.gamma).unwrap(), &lx).unwrap();
        let err = base.iter().zip(&scaled).map(|(a, b)| (lambda * a - b).powi(2)).sum::<f64>().sqrt();
        let size = lx.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        prop_assert!(err <= 1e-9 * size, "{}", err);
    }

    #[test]
    fn zero_output_exactly_when_gate_holds(name in kind_name(), seed in any::<u64>(), pull in any::<bool>()) {
        let mut d = sample_draw(name, 3, &mut ChaCha8Rng::seed_from_u64(seed));
        if pull {
            d.x.iter_mut().skip(1).for_each(|v| *v *= 0.05);
            d.x[0] = -d.x[0].abs();
        }
        let out = d.kind.prox_flat(ProxStep::new(d.gamma).unwrap(), &d.x).unwrap();
        prop_assert_eq!(out.iter().all(|&v| v == 0.0), in_zero_region(&d.kind, d.gamma, &d.x));
    }

    #[test]
    fn graph_projection_lands_on_graph_and_is_orthogonal(
        rows in 1usize..6, cols in 1usize..6,
        entries in prop::collection::vec(-3.0f64..3.0, 36),
        point in prop::collection::vec(-5.0f64..5.0, 12),
    ) {
        let m = matrix(rows, cols, &entries);
        let proj = GraphProjector::new(m.clone()).unwrap();
        let b = Vector::from_column_slice(&point[..cols]);
        let c = Vector::from_column_slice(&point[6..6 + rows]);
        let (v, mv) = proj.project(&b, &c).unwrap();
        prop_assert!((&m * &v - &mv).norm() <= 1e-10 * (1.0 + mv.norm()));
        // The residual is orthogonal to every graph direction (e, Me).
        for k in 0..cols {
            let mut e = Vector::zeros(cols);
            e[k] = 1.0;
            let me = &m * &e;
            let inner = (&b - &v).dot(&e) + (&c - &mv).dot(&me);
            prop_assert!(inner.abs() <= 1e-9 * (1.0 + b.norm() + c.norm()), "{}", inner);
        }
        let (v2, mv2) = proj.project(&v, &mv).unwrap();
        prop_assert!((&v2 - &v).norm() + (&mv2 - &mv).norm() <= 1e-10 * (1.0 + v.norm() + mv.norm()));
    }

    #[test]
    fn dr_governing_sequence_is_fejer(
        entries in prop::collection::vec(-2.0f64..2.0, 24),
        target in prop::collection::vec(-3.0f64..3.0, 6),
        gamma in 0.2f64..5.0, mu in 0.5f64..1.95,
    ) {
        // min ||b||_1 + 1/2 ||Mb - target||^2 on a 6 x 4 graph.
        let m = matrix(6, 4, &entries);
        let proj = GraphProjector::new(m).unwrap();
        let a = Vector::from_column_slice(&target);
        let prox_h = |x: &Vector, g: f64| Ok(Vector::from_vec(soft_threshold(x.as_slice(), g)));
        let prox_g = |w: &Vector, g: f64| Ok((w + g * &a) / (1.0 + g));
        let solver = CompositeDR { proj: &proj, prox_h: &prox_h, prox_g: &prox_g, objective: None };
        let mut fixed = DRState::new(Vector::zeros(4), 6);
        for _ in 0..20_000 {
            solver.step(&mut fixed, gamma, mu).unwrap();
        }
        let dist = |s: &DRState| ((&s.x - &fixed.x).norm_squared() + (&s.y - &fixed.y).norm_squared()).sqrt();
        let mut state = DRState::new(Vector::zeros(4), 6);
        let mut prev = dist(&state);
        for _ in 0..200 {
            solver.step(&mut state, gamma, mu).unwrap();
            let now = dist(&state);
            prop_assert!(now <= prev + 1e-8 * (1.0 + prev), "{} > {}", now, prev);
            prev = now;
        }
    }

    #[test]
    fn trex_objective_is_min_over_subproblems(seed in 0u64..1000, q in prop::sample::select(vec![1.5, 2.0, 3.0])) {
        let model = gen_linear_model(&LinearModelSpec { n: 8, p: 4, m: 2, sigma: 0.5, corr: 0.2, seed, stream: 0 }).unwrap();
        let problem = TrexProblem::new(model.x, model.z, 0.8, q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Vector::from_fn(4, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let global = eval_trex_objective(&problem, &b);
        let by_sub = problem.subproblem_ids().iter().map(|&id| eval_subproblem_objective(&problem, id, &b)).fold(f64::INFINITY, f64::min);
        prop_assert!((global - by_sub).abs() <= 1e-12 * global.abs().max(1.0), "{} vs {}", global, by_sub);
    }

    #[test]
    fn support_metrics_are_consistent(
        truth in prop::collection::vec(prop::sample::select(vec![-1.0, 0.0, 1.0]), 6),
        noise in prop::collection::vec(-0.2f64..0.2, 6),
    ) {
        let x = Matrix::identity(6, 6);
        let b_star = Vector::from_vec(truth);
        let b_hat = &b_star + Vector::from_vec(noise);
        let m = support_metrics(&x, &b_hat, &b_star, 0.05).unwrap();
        let expected_hamming = (0..6).filter(|&i| (b_hat[i].abs() > 0.05) != (b_star[i] != 0.0)).count();
        prop_assert_eq!(m.hamming, expected_hamming);
        prop_assert_eq!(m.exact_recovery, m.hamming == 0);
        prop_assert!(m.est_err >= 0.0 && m.pred_err >= 0.0);
        prop_assert!((m.est_err - m.pred_err).abs() <= 1e-12 * (1.0 + m.est_err));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn full_solve_dominates_every_subproblem(seed in 0u64..500) {
        let model = gen_linear_model(&LinearModelSpec { n: 12, p: 3, m: 1, sigma: 0.5, corr: 0.0, seed, stream: 0 }).unwrap();
        let problem = TrexProblem::new(model.x, model.z, 0.6, 1.5).unwrap();
        let config = DRConfig::default();
        let full = solve_trex_full(&problem, &config, 1).unwrap();
        for id in problem.subproblem_ids() {
            let sub = solve_subproblem(&problem, id, &config).unwrap();
            prop_assert!(full.subproblem_objective <= sub.objective + 1e-12);
        }
        let b = Vector::from_vec(full.b_hat.clone());
        prop_assert!((eval_trex_objective(&problem, &b) - full.objective).abs() <= 1e-12 * full.objective.max(1.0));
        prop_assert!(full.objective <= full.subproblem_objective + 1e-12);
        let winner = SubproblemId { j: full.winner.j, s: full.winner.s };
        prop_assert!((eval_subproblem_objective(&problem, winner, &b) - full.subproblem_objective).abs() <= 1e-12 * full.subproblem_objective.max(1.0));
    }
}
