use cadam_core::linalg::Matrix;
use cadam_core::optim::{
    adam_step, ascpg_step, cadam_run, cadam_step, scgd_step, AdamState, BaselineState, OutputRule,
};
use cadam_core::problems::{IdentityProblem, NoiseScales, NoisyQuadratic, OuterOracle, QuadCompose};
use cadam_core::{CAdamState, CompositionalProblem, OracleRng, ScheduleConfig, SeedStreams, StepParams};
use rand::{Rng, SeedableRng};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + b.abs())
}

/// Straight-line evaluation of the C-ADAM recurrences on
/// `f(y) = ½‖y‖²`, `g(x) = Ax + b`, written without the library.
struct Scripted {
    a: [[f64; 2]; 2],
    b: [f64; 2],
    x: [f64; 2],
    y: [f64; 2],
    m: [f64; 2],
    v: [f64; 2],
}

impl Scripted {
    fn step(&mut self, t: f64, cfg: &ScheduleConfig<f64>) {
        let alpha = cfg.c_alpha / t.powf(cfg.a);
        let beta = cfg.c_beta / t.powf(cfg.b);
        let g1 = cfg.c_gamma * cfg.mu.powf(t);
        let g2 = (1.0 - cfg.c_alpha / t.powf(2.0 * cfg.a) * (1.0 - g1) * (1.0 - g1)).clamp(0.0, 1.0 - 1e-12);
        let a = self.a;
        // ∇f(y) = y and ∇g = A.
        let est = [
            a[0][0] * self.y[0] + a[1][0] * self.y[1],
            a[0][1] * self.y[0] + a[1][1] * self.y[1],
        ];
        let mut x_new = [0.0; 2];
        let mut z = [0.0; 2];
        for i in 0..2 {
            self.m[i] = g1 * self.m[i] + (1.0 - g1) * est[i];
            self.v[i] = g2 * self.v[i] + (1.0 - g2) * est[i] * est[i];
            x_new[i] = self.x[i] - alpha * self.m[i] / (self.v[i].sqrt() + cfg.epsilon);
            z[i] = (1.0 - 1.0 / beta) * self.x[i] + x_new[i] / beta;
        }
        for i in 0..2 {
            let g = a[i][0] * z[0] + a[i][1] * z[1] + self.b[i];
            self.y[i] = (1.0 - beta) * self.y[i] + beta * g;
        }
        self.x = x_new;
    }
}

#[test]
fn five_steps_match_a_scripted_reference() {
    let a = [[1.0, 0.5], [-0.3, 2.0]];
    let b = [0.7, -1.1];
    let prob = QuadCompose::new(
        Matrix::from_rows(&[a[0].to_vec(), a[1].to_vec()]).unwrap(),
        b.to_vec(),
        NoiseScales::none(),
    )
    .unwrap();
    let cfg = ScheduleConfig {
        c_alpha: 0.1,
        c_beta: 0.5,
        mu: 0.8,
        b: 0.3,
        ..ScheduleConfig::default()
    }
    .with_constant_batch(1);
    let x1 = [1.0, -1.0];
    let mut reference = Scripted {
        a,
        b,
        x: x1,
        y: [0.0; 2],
        m: [0.0; 2],
        v: [0.0; 2],
    };
    let mut state = CAdamState::new(x1.to_vec(), 2);
    let streams = SeedStreams::new(0);
    for t in 1..=5 {
        reference.step(t as f64, &cfg);
        let params = cfg.at(t).unwrap();
        state = cadam_step(&prob, &state, &params, cfg.epsilon, &mut streams.step(t as u64, false))
            .unwrap()
            .0;
        for i in 0..2 {
            assert!(close(state.x[i], reference.x[i]), "x at t = {t}");
            assert!(close(state.y[i], reference.y[i]), "y at t = {t}");
            assert!(close(state.m[i], reference.m[i]), "m at t = {t}");
            assert!(close(state.v[i], reference.v[i]), "v at t = {t}");
        }
    }
    let (x_out, trace) = cadam_run(&prob, &x1, &cfg, 5, 0, OutputRule::Last).unwrap();
    assert_eq!(trace.rows.len(), 5);
    for i in 0..2 {
        assert!(close(x_out[i], reference.x[i]));
    }
}

/// Largest per-coordinate gap between C-ADAM on the identity composition with
/// unit averaging and reference ADAM fed the same gradient draws.
fn reduction_gap(seed: u64, steps: usize) -> f64 {
    let mut rng = OracleRng::seed_from_u64(seed);
    let p = 6;
    let scales: Vec<f64> = (0..p).map(|_| rng.random_range(0.2..3.0)).collect();
    let center: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let outer = NoisyQuadratic::diagonal(&scales, center, 0.5);
    let prob = IdentityProblem::new(Box::new(outer.clone()));
    let cfg = ScheduleConfig {
        c_alpha: rng.random_range(0.01..0.5),
        c_beta: 1.0,
        mu: rng.random_range(0.5..0.99),
        ..ScheduleConfig::default()
    }
    .with_constant_batch(1);
    let x1: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
    // y_1 = x_1 puts the first outer query at the iterate as well.
    let mut c = CAdamState::new(x1.clone(), p);
    c.y = x1.clone();
    let mut r = AdamState::new(x1);
    let streams = SeedStreams::new(seed);
    let mut worst: f64 = 0.0;
    for t in 1..=steps {
        let params = cfg.at(t).unwrap();
        let rngs = streams.step(t as u64, false);
        let grad = outer.sample_gradient(&r.x, 1, &mut rngs.outer.clone()).remove(0);
        r = adam_step(&r, &grad, params.alpha, params.gamma1, params.gamma2, cfg.epsilon);
        c = cadam_step(&prob, &c, &params, cfg.epsilon, &mut rngs.clone()).unwrap().0;
        for i in 0..p {
            worst = worst.max((c.x[i] - r.x[i]).abs());
        }
    }
    worst
}

#[test]
fn cadam_reduces_to_adam_on_the_identity_composition() {
    for seed in 0..10 {
        let gap = reduction_gap(seed, 100);
        assert!(gap <= 1e-12, "seed {seed}: gap {gap}");
    }
}

fn unit_params(alpha: f64, beta: f64) -> StepParams<f64> {
    StepParams {
        alpha,
        beta,
        k1: 1,
        k2: 1,
        k3: 1,
        gamma1: 0.0,
        gamma2: 0.0,
    }
}

#[test]
fn scgd_hand_step() {
    // g(x) = 2x + 1, f(y) = ½y². From x = 1, y = 0 with β = 0.5, α = 0.1:
    // y' = 0.5·0 + 0.5·3 = 1.5, x' = 1 − 0.1·2·1.5 = 0.7.
    let prob = QuadCompose::new(Matrix::from_rows(&[vec![2.0]]).unwrap(), vec![1.0], NoiseScales::none()).unwrap();
    let state = BaselineState::new(vec![1.0], 1);
    let (next, rep) = scgd_step(&prob, &state, &unit_params(0.1, 0.5), &mut SeedStreams::new(0).step(1, false)).unwrap();
    assert!(close(next.y[0], 1.5));
    assert!(close(next.x[0], 0.7));
    assert_eq!(rep.total_samples(), 3);
    // β = 1 sets y to g(x_t) exactly.
    let (next, _) = scgd_step(&prob, &state, &unit_params(0.1, 1.0), &mut SeedStreams::new(0).step(1, false)).unwrap();
    assert_eq!(next.y, vec![3.0]);
}

#[test]
fn ascpg_hand_step() {
    // Same problem, y = 3 = g(1): x' = 1 − 0.1·2·3 = 0.4,
    // z = (1 − 2)·1 + 2·0.4 = −0.2, y' = 0.5·3 + 0.5·(2·(−0.2) + 1) = 1.8.
    let prob = QuadCompose::new(Matrix::from_rows(&[vec![2.0]]).unwrap(), vec![1.0], NoiseScales::none()).unwrap();
    let mut state = BaselineState::new(vec![1.0], 1);
    state.y = vec![3.0];
    let (next, _) = ascpg_step(&prob, &state, &unit_params(0.1, 0.5), &mut SeedStreams::new(0).step(1, false)).unwrap();
    assert!(close(next.x[0], 0.4));
    assert!(close(next.z[0], -0.2));
    assert!(close(next.y[0], 1.8));
}

#[test]
fn zero_gradients_leave_baselines_in_place() {
    let prob = QuadCompose::new(Matrix::identity(2), vec![0.0; 2], NoiseScales::none()).unwrap();
    let state = BaselineState::new(vec![0.0; 2], 2);
    for step in [scgd_step::<f64, QuadCompose<f64>>, ascpg_step] {
        let (next, _) = step(&prob, &state, &unit_params(0.3, 0.7), &mut SeedStreams::new(0).step(1, false)).unwrap();
        assert_eq!(next.x, state.x);
    }
}

#[test]
fn quad_oracle_variances_respect_their_scales() {
    let sigma = 0.5;
    let prob = QuadCompose::<f64>::random(4, 6, NoiseScales::uniform(sigma), 3).unwrap();
    let n = 100_000;
    let bound = sigma * sigma * (1.0 + 10.0 / (n as f64).sqrt());
    let x = [0.3, -0.2, 1.0, 0.5];
    let y = [1.0, -1.0, 0.5, 0.0, 2.0, 0.25];
    let mut rng = OracleRng::seed_from_u64(8);
    let exact = prob.exact_inner(&x).unwrap();
    let a = prob.a().clone();

    let values = prob.sample_inner_values(&x, n, &mut rng);
    let var_g = values
        .iter()
        .map(|v| v.iter().zip(&exact).map(|(s, e)| (s - e).powi(2)).sum::<f64>())
        .sum::<f64>()
        / n as f64;
    let jacobians = prob.sample_inner_jacobians(&x, n, &mut rng);
    let var_j = jacobians.iter().map(|j| j.to_dense().sub(&a).frobenius_sq()).sum::<f64>() / n as f64;
    let outer = prob.sample_outer(&y, n, &mut rng);
    let var_f = outer
        .iter()
        .map(|g| g.iter().zip(&y).map(|(s, e)| (s - e).powi(2)).sum::<f64>())
        .sum::<f64>()
        / n as f64;
    for (name, var) in [("values", var_g), ("jacobians", var_j), ("outer gradients", var_f)] {
        assert!(var <= bound, "{name}: {var} > {bound}");
        assert!(var > 0.9 * sigma * sigma, "{name}: {var} suspiciously small");
    }
}

#[test]
fn noiseless_quad_estimate_is_the_exact_gradient() {
    let prob = QuadCompose::<f64>::random(3, 5, NoiseScales::none(), 12).unwrap();
    let x = [0.4, -1.3, 2.2];
    let y = prob.exact_inner(&x).unwrap();
    let est = cadam_core::optim::composite_estimate(&prob, &x, &y, 3, 2, &mut SeedStreams::new(1).step(1, false)).unwrap();
    let exact = prob.exact_gradient(&x).unwrap();
    for i in 0..3 {
        assert!((est[i] - exact[i]).abs() <= 1e-12 * (1.0 + exact[i].abs()));
    }
}
