//! Empirical constants, tracking-error envelopes and power-recursion checks.

use std::path::Path;

use cadam_core::diagnostics::{
    certify_power_recursion, estimate_constants, tracking_bound_recursions, PowerRecursionConfig,
};
use cadam_core::linalg::norm_sq;
use cadam_core::{OracleRng, ProblemConstants, Solver};
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::io::{fmt_float, OutputDir};
use crate::problem::BuiltProblem;

#[derive(Debug, Clone)]
pub struct DiagnoseOptions {
    /// Points sampled uniformly in a ball around the start.
    pub points: usize,
    pub radius: f64,
    pub draws_per_point: usize,
    /// Length of envelope and power recursions.
    pub horizon: usize,
    pub power_configs: usize,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            points: 50,
            radius: 1.0,
            draws_per_point: 8,
            horizon: 10_000,
            power_configs: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnoseReport {
    pub constants: ProblemConstantsRecord,
    pub power_configs: usize,
    pub power_violations: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProblemConstantsRecord {
    pub b_f: f64,
    pub m_f: f64,
    pub m_g: f64,
    pub l_f: f64,
    pub l_g: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub sigma3_sq: f64,
    pub smoothness: f64,
}

impl From<ProblemConstants<f64>> for ProblemConstantsRecord {
    fn from(c: ProblemConstants<f64>) -> Self {
        Self {
            b_f: c.b_f,
            m_f: c.m_f,
            m_g: c.m_g,
            l_f: c.l_f,
            l_g: c.l_g,
            sigma1_sq: c.sigma1_sq,
            sigma2_sq: c.sigma2_sq,
            sigma3_sq: c.sigma3_sq,
            smoothness: c.smoothness(),
        }
    }
}

/// Writes `constants.json`, `envelope_<label>.csv` for every C-ADAM
/// optimizer, and `power.csv`.
pub fn diagnose(cfg: &ExperimentConfig, seed: u64, opts: &DiagnoseOptions, out_dir: &Path) -> Result<DiagnoseReport> {
    if opts.points == 0 || opts.horizon == 0 || !(opts.radius > 0.0) {
        return Err(BenchError::Config("points, horizon and radius must be positive".into()));
    }
    let problem = BuiltProblem::build(&cfg.problem)?;
    let p = problem.as_dyn();
    let center = problem.start(&cfg.start, seed)?;
    let radius = opts.radius;
    let sampler = |rng: &mut OracleRng| {
        let dir: Vec<f64> = (0..center.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = norm_sq(&dir).sqrt().max(f64::MIN_POSITIVE);
        let r = radius * rng.random_range(0.0f64..1.0).powf(1.0 / center.len() as f64);
        center.iter().zip(&dir).map(|(c, d)| c + r * d / n).collect()
    };
    let constants = estimate_constants(p, sampler, opts.points, opts.draws_per_point, seed)?;
    let g0 = p.exact_inner(&center);

    let mut envelopes = Vec::new();
    for (label, solver) in &cfg.optimizers {
        if let (Solver::CAdam(s), Some(g0)) = (solver, &g0) {
            let states = tracking_bound_recursions(s, &constants, norm_sq(g0), opts.horizon)?;
            let mut csv = String::from("t,d,f_sq,e_sq,envelope\n");
            for b in &states {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    b.t,
                    fmt_float(b.d),
                    fmt_float(b.f_sq),
                    fmt_float(b.e_sq),
                    fmt_float(b.envelope)
                ));
            }
            envelopes.push((format!("envelope_{label}.csv"), csv));
        }
    }

    let mut rng = OracleRng::seed_from_u64(seed);
    let mut power = String::from("config,c_eta,c_zeta,c1,c2,a,b,a1,c_a,worst_ratio,holds\n");
    let mut violations = 0;
    for i in 0..opts.power_configs {
        let c = PowerRecursionConfig::<f64>::sample_feasible(&mut rng);
        let cert = certify_power_recursion(&c, opts.horizon)?;
        violations += usize::from(!cert.holds());
        power.push_str(&format!(
            "{i},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_float(c.c_eta),
            fmt_float(c.c_zeta),
            fmt_float(c.c1),
            fmt_float(c.c2),
            fmt_float(c.a),
            fmt_float(c.b),
            fmt_float(c.a1),
            fmt_float(cert.c_a),
            fmt_float(cert.worst_ratio),
            cert.holds()
        ));
    }

    let report = DiagnoseReport {
        constants: constants.into(),
        power_configs: opts.power_configs,
        power_violations: violations,
    };
    let mut out = OutputDir::create(out_dir)?;
    let written = (|| {
        let json = serde_json::to_string_pretty(&report.constants).expect("constants serialise");
        out.write("constants.json", json.as_bytes())?;
        for (name, csv) in &envelopes {
            out.write(name, csv.as_bytes())?;
        }
        out.write("power.csv", power.as_bytes())?;
        Ok::<_, BenchError>(())
    })();
    match written {
        Ok(()) => {
            out.finish(serde_json::to_value(&report).expect("report serialises"))?;
            Ok(report)
        }
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}
