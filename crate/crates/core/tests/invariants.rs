use cadam_core::diagnostics::theta_coefficients;
use cadam_core::linalg::{norm, Matrix};
use cadam_core::meta::{Activation, Architecture};
use cadam_core::optim::{cadam_step, run, Checkpoints, RunOptions, Solver};
use cadam_core::problems::{
    portfolio_objective_compositional, IdentityProblem, NoiseScales, NoisyQuadratic, PortfolioData,
    PortfolioProblem, QuadCompose,
};
use cadam_core::schedule::lipschitz_composition_constant;
use cadam_core::{CompositionalProblem, OracleRng, ScheduleConfig, SeedStreams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn schedule_strategy() -> impl Strategy<Value = ScheduleConfig<f64>> {
    (
        1e-4f64..1.0,
        1e-3f64..=1.0,
        0.5f64..4.0,
        0.1f64..=1.0,
        0.05f64..0.99,
        0.0f64..1.0,
        0.0f64..1.0,
    )
        .prop_map(|(c_alpha, c_beta, c1, c_gamma, mu, a, c)| ScheduleConfig {
            c_alpha,
            c_beta,
            c1,
            c2: c1,
            c3: c1,
            c_gamma,
            mu,
            a: a.max(1e-3),
            c,
            e: c,
            ..ScheduleConfig::default()
        })
}

fn returns_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..=50, 1usize..=10).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, n), m),
            prop::collection::vec(-2.0f64..2.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_is_monotone(cfg in schedule_strategy()) {
        let mut prev = cfg.at(1).unwrap();
        for t in 2..300 {
            let s = cfg.at(t).unwrap();
            prop_assert!(s.alpha < prev.alpha);
            prop_assert!(s.k1 >= prev.k1 && s.k2 >= prev.k2 && s.k3 >= prev.k3);
            prop_assert!(s.gamma2 >= 0.0 && s.gamma2 < 1.0);
            prop_assert!(s.gamma1 >= 0.0 && s.gamma1 < 1.0);
            prev = s;
        }
    }

    /// `γ²_t` dips while `1 − C_γ μ^t` is still growing, then rises toward one
    /// for good once `(1 − μ^t)² / t^{2a}` peaks (before `t = 100` for `μ ≤ 0.95`).
    #[test]
    fn default_exponents_push_gamma2_up(c_alpha in 1e-4f64..0.5, mu in 0.05f64..0.95) {
        let cfg = ScheduleConfig { c_alpha, mu, ..ScheduleConfig::default() };
        let mut prev = cfg.at(100).unwrap().gamma2;
        for t in 101..3000 {
            let g = cfg.at(t).unwrap().gamma2;
            prop_assert!(g >= prev);
            prev = g;
        }
        prop_assert!(prev < 1.0);
    }

    #[test]
    fn composition_constant_is_the_formula(
        mg in 0.0f64..10.0, lf in 0.0f64..10.0, lg in 0.0f64..10.0, mf in 0.0f64..10.0
    ) {
        let l = lipschitz_composition_constant(mg, lf, lg, mf);
        prop_assert_eq!(l, mg * mg * lf + lg * mf);
        prop_assert!(l >= 0.0);
    }

    #[test]
    fn portfolio_routes_agree((rows, x) in returns_strategy()) {
        let data = PortfolioData::from_rows(&rows).unwrap();
        let direct = data.objective_direct(&x);
        let composed = portfolio_objective_compositional(&data, &x);
        prop_assert!((direct - composed).abs() <= 1e-10 * (1.0 + direct.abs()));
    }

    #[test]
    fn theta_weights_sum_to_one(betas in prop::collection::vec(1e-6f64..=1.0, 1..=20)) {
        let theta = theta_coefficients(&betas);
        prop_assert_eq!(theta.len(), betas.len() + 1);
        prop_assert!(theta.iter().all(|&w| w >= 0.0));
        prop_assert!((theta.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn mlp_flatten_round_trips(h1 in 1usize..6, h2 in 1usize..6, seed in 0u64..1000, bias in any::<bool>()) {
        let mut arch = Architecture::new(vec![2, h1, h2, 1], Activation::Relu).unwrap();
        if !bias {
            arch = arch.without_bias();
        }
        let params: Vec<f64> = arch.init(&mut OracleRng::seed_from_u64(seed));
        let layers = arch.unflatten(&params).unwrap();
        prop_assert_eq!(arch.flatten(&layers).unwrap(), params);
    }

    /// `v ≥ 0`, `‖m‖` below the largest estimate so far, the extrapolation
    /// identity, and exact sample accounting, on every step of noisy runs.
    #[test]
    fn cadam_step_invariants(seed in 0u64..10_000, cfg in schedule_strategy(), beta in 0.05f64..=1.0) {
        let prob = QuadCompose::<f64>::random(4, 6, NoiseScales::uniform(0.5), seed).unwrap();
        let cfg = ScheduleConfig { c_beta: beta, ..cfg };
        let streams = SeedStreams::new(seed);
        let mut state = cadam_core::CAdamState::new(vec![0.5; 4], 6);
        let mut max_est: f64 = 0.0;
        let mut samples = 0usize;
        let mut expected = 0usize;
        for t in 1..=40 {
            let params = cfg.at(t).unwrap();
            expected += params.k1 + params.k2 + params.k3;
            let mut rngs = streams.step(t as u64, false);
            let (next, rep) = cadam_step(&prob, &state, &params, cfg.epsilon, &mut rngs).unwrap();
            samples += rep.total_samples();
            max_est = max_est.max(norm(&rep.composite_grad_estimate));
            prop_assert!(next.v.iter().all(|&v| v >= 0.0));
            prop_assert!(norm(&next.m) <= max_est * (1.0 + 1e-12));
            for i in 0..4 {
                let lhs = next.z[i] - state.x[i];
                let rhs = (next.x[i] - state.x[i]) / params.beta;
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
            }
            state = next;
        }
        prop_assert_eq!(samples, expected);
    }
}

#[test]
fn run_trace_counts_match_the_schedule() {
    let prob = QuadCompose::<f64>::random(3, 5, NoiseScales::uniform(0.2), 4).unwrap();
    let cfg = ScheduleConfig::default();
    let opts = RunOptions::new(200, 1).checkpoints(Checkpoints::Every);
    let res = run(&prob, &[0.0; 3], &Solver::CAdam(cfg), &opts).unwrap();
    let mut total = 0u64;
    let mut prev_t = 0;
    for row in &res.trace.rows {
        total += cfg.at(row.t).unwrap().samples() as u64;
        assert_eq!(row.cumulative_samples, total);
        assert!(row.t > prev_t);
        prev_t = row.t;
    }
    assert_eq!(res.total_samples, total);
}

#[test]
fn identical_seeds_give_identical_samples() {
    let prob = QuadCompose::<f64>::random(3, 4, NoiseScales::uniform(1.0), 2).unwrap();
    let draw = |seed| {
        let mut r = SeedStreams::new(seed).step(5, false);
        let inner = prob.sample_inner(&[0.1, 0.2, 0.3], 4, &mut r.inner_grad);
        let outer = prob.sample_outer(&[1.0; 4], 4, &mut r.outer);
        let dense: Vec<Matrix<f64>> = inner.jacobians.iter().map(|j| j.to_dense()).collect();
        (inner.values, dense, outer)
    };
    let (a, b) = (draw(17), draw(17));
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
    assert_ne!(draw(18).0, a.0);
}

#[test]
fn identity_problem_has_zero_tracking_error_after_one_unit_beta_step() {
    let mut rng = OracleRng::seed_from_u64(3);
    let scales: Vec<f64> = (0..5).map(|_| rng.random_range(0.5..2.0)).collect();
    let outer = NoisyQuadratic::diagonal(&scales, vec![1.0; 5], 0.3);
    let prob = IdentityProblem::new(Box::new(outer));
    let cfg = ScheduleConfig { c_beta: 1.0, ..ScheduleConfig::default() }.with_constant_batch(1);
    let opts = RunOptions::new(50, 9).checkpoints(Checkpoints::Every);
    let res = run(&prob, &[0.0; 5], &Solver::CAdam(cfg), &opts).unwrap();
    for row in &res.trace.rows {
        assert_eq!(row.tracking_err, Some(0.0), "t = {}", row.t);
    }
}

#[test]
fn portfolio_brute_force_unbiasedness() {
    let mut rng = OracleRng::seed_from_u64(11);
    let (m, n) = (6, 3);
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let prob = PortfolioProblem::new(PortfolioData::from_rows(&rows).unwrap());
    for _ in 0..10 {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..=n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let exact = prob.exact_inner(&x).unwrap();
        let mut mean_g = vec![0.0; n + 1];
        let mut mean_jac = Matrix::zeros(n + 1, n);
        let mut mean_f = vec![0.0; n + 1];
        for j in 0..m {
            let (g, jac) = prob.inner_atom(j, &x);
            let d = cadam_core::JacobianOp::to_dense(&jac);
            for k in 0..=n {
                mean_g[k] += g[k] / m as f64;
                mean_f[k] += prob.outer_atom_gradient(j, &y)[k] / m as f64;
            }
            for (a, b) in mean_jac.as_mut_slice().iter_mut().zip(d.as_slice()) {
                *a += b / m as f64;
            }
        }
        for k in 0..=n {
            assert!((mean_g[k] - exact[k]).abs() <= 1e-12 * (1.0 + exact[k].abs()));
        }
        let factored = mean_jac.t_matvec(&mean_f);
        let mut pairs = vec![0.0; n];
        for j in 0..m {
            let (_, jac) = prob.inner_atom(j, &x);
            for i in 0..m {
                let contrib = cadam_core::JacobianOp::transpose_apply(&jac, &prob.outer_atom_gradient(i, &y));
                for k in 0..n {
                    pairs[k] += contrib[k] / (m * m) as f64;
                }
            }
        }
        for k in 0..n {
            assert!((pairs[k] - factored[k]).abs() <= 1e-12 * (1.0 + factored[k].abs()));
        }
    }
}
