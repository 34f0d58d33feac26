use cadam_core::diagnostics::{
    certify_power_recursion, decay_exponent_fit, envelope_burn_in, estimate_constants, theta_coefficients,
    tracking_bound_recursions, PowerRecursionConfig,
};
use cadam_core::optim::{run, Checkpoints, RunOptions, Solver};
use cadam_core::problems::{IdentityProblem, NoiseScales, NoisyQuadratic, QuadCompose};
use cadam_core::{OracleRng, ProblemConstants, ScheduleConfig};
use rand::{Rng, SeedableRng};

#[test]
fn power_bound_holds_on_random_feasible_configs() {
    let mut rng = OracleRng::seed_from_u64(2024);
    for i in 0..20 {
        let cfg = PowerRecursionConfig::<f64>::sample_feasible(&mut rng);
        let cert = certify_power_recursion(&cfg, 10_000).unwrap();
        assert!(cert.holds(), "config {i} {cfg:?}: violated at {:?}", cert.first_violation);
        let bad = cert.sequence.iter().position(|v| !(v.is_finite() && *v >= 0.0));
        assert!(bad.is_none(), "{cfg:?} at {bad:?}: {:?}", bad.map(|i| cert.sequence[i]));
    }
}

#[test]
fn theta_weights_on_random_sequences() {
    let mut rng = OracleRng::seed_from_u64(5);
    for _ in 0..10 {
        for t in 1..=20 {
            let betas: Vec<f64> = (0..t).map(|_| 1.0 - rng.random_range(0.0..1.0)).collect();
            let sum: f64 = theta_coefficients(&betas).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }
}

fn generic_constants() -> ProblemConstants<f64> {
    ProblemConstants {
        b_f: 1.0,
        m_f: 2.0,
        m_g: 1.5,
        l_f: 1.0,
        l_g: 0.5,
        sigma1_sq: 0.25,
        sigma2_sq: 0.25,
        sigma3_sq: 0.25,
    }
}

#[test]
fn envelope_is_eventually_nonincreasing() {
    let states = tracking_bound_recursions(&ScheduleConfig::default(), &generic_constants(), 4.0, 20_000).unwrap();
    let burn = envelope_burn_in(&states).expect("envelope settles");
    assert!(burn < 20_000);
    for w in states[burn - 1..].windows(2) {
        assert!(w[1].envelope <= w[0].envelope);
    }
}

#[test]
fn unit_averaging_substitutes_directly() {
    let cfg = ScheduleConfig {
        c_beta: 1.0,
        ..ScheduleConfig::default()
    };
    let c = generic_constants();
    let states = tracking_bound_recursions(&cfg, &c, 4.0, 30).unwrap();
    let m_sq = (c.m_g * c.m_f).powi(2);
    for w in states.windows(2) {
        let p = cfg.at(w[0].t).unwrap();
        let drive = 2.0 * m_sq * p.alpha * p.alpha / (cfg.epsilon * cfg.epsilon);
        let d = drive + w[0].f_sq;
        assert!((w[1].d - d).abs() <= 1e-9 * d);
        let e = c.sigma3_sq / p.k3 as f64;
        assert!((w[1].e_sq - e).abs() <= 1e-12 * e);
    }
}

#[test]
fn quad_tracking_error_decays_at_the_predicted_rate() {
    let prob = QuadCompose::<f64>::random(10, 15, NoiseScales::uniform(0.5), 1).unwrap();
    let cfg = ScheduleConfig::default();
    let checkpoints = vec![10, 30, 100, 300, 1000];
    let traces: Vec<_> = (0..5)
        .map(|seed| {
            let opts = RunOptions::new(1000, seed).checkpoints(Checkpoints::List(checkpoints.clone()));
            run(&prob, &[0.0; 10], &Solver::CAdam(cfg), &opts).unwrap().trace
        })
        .collect();
    let slope = decay_exponent_fit(&traces, &checkpoints).unwrap();
    let rho = 0.5 * cfg.tracking_decay_exponent();
    assert!(slope <= -rho, "slope {slope}, predicted at most {}", -rho);
}

#[test]
fn gradient_bound_on_a_ball() {
    let outer = NoisyQuadratic::diagonal(&[1.0; 3], vec![0.0; 3], 0.0);
    let prob = IdentityProblem::new(Box::new(outer));
    let r = 2.0;
    let sampler = |rng: &mut OracleRng| {
        let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        let len = r * rng.random_range(0.0..1.0);
        v.iter().map(|a| a / n * len).collect()
    };
    let c = estimate_constants(&prob, sampler, 200, 4, 1).unwrap();
    assert!(c.m_f <= r + 1e-12 && c.m_f > 0.5 * r);
    assert!((c.m_g - 1.0).abs() < 1e-9);
    assert_eq!((c.sigma1_sq, c.sigma2_sq, c.sigma3_sq), (0.0, 0.0, 0.0));
}
