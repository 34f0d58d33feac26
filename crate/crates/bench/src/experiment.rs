//! Seeded optimizer × seed sweeps writing one trace CSV per run.

use std::path::Path;
use std::sync::Arc;

use cadam_core::optim::{run, RunOptions};
use cadam_core::RunResult;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::io::{fmt_float, trace_csv, OutputDir};
use crate::jstar::{compute_jstar, JStarCache};
use crate::problem::BuiltProblem;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub seed: u64,
    pub file: String,
    pub steps: usize,
    pub total_samples: u64,
    /// `J` at the last checkpoint.
    pub j_final: Option<f64>,
    /// `J` at the returned iterate.
    pub j_out: Option<f64>,
    pub gap_final: Option<f64>,
    pub grad_norm_sq_final: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutcome {
    pub jstar: Option<f64>,
    pub runs: Vec<RunSummary>,
}

impl ExperimentOutcome {
    /// Median final gap of one optimizer over its seeds.
    pub fn median_gap(&self, label: &str) -> Option<f64> {
        let mut gaps: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.label == label)
            .map(|r| r.gap_final)
            .collect::<Option<_>>()?;
        median(&mut gaps)
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub fn trace_file_name(label: &str, seed: u64) -> String {
    format!("trace_{label}_seed{seed}.csv")
}

fn clip(x: &mut [f64], (lo, hi): (f64, f64)) {
    x.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
}

/// Runs every `(optimizer, seed)` pair of `cfg` and returns the raw results
/// in config order, without touching the file system.
pub fn execute(cfg: &ExperimentConfig, problem: &BuiltProblem) -> Result<Vec<(String, u64, RunResult<f64>)>> {
    let pairs: Vec<(&String, &_, u64)> = cfg
        .optimizers
        .iter()
        .flat_map(|(label, solver)| cfg.seeds.iter().map(move |&s| (label, solver, s)))
        .collect();
    pairs
        .into_par_iter()
        .map(|(label, solver, seed)| {
            let mut x1 = problem.start(&cfg.start, seed)?;
            let mut opts = RunOptions::new(cfg.iterations, seed)
                .output_rule(cfg.output_rule)
                .checkpoints(cfg.checkpoints.clone())
                .record_wallclock(cfg.record_wallclock);
            if let Some(b) = cfg.sample_budget {
                opts = opts.sample_budget(b);
            }
            if let Some(bounds) = cfg.box_clip {
                clip(&mut x1, bounds);
                opts = opts.post_step(Arc::new(move |x: &mut [f64]| clip(x, bounds)));
            }
            let res = run(problem.as_dyn(), &x1, solver, &opts).map_err(|e| match BenchError::from(e) {
                BenchError::Numeric { t, .. } => BenchError::Numeric {
                    t,
                    context: format!("optimizer {label}, seed {seed}"),
                },
                other => other,
            })?;
            Ok((label.clone(), seed, res))
        })
        .collect()
}

/// `J*` of the configured problem, cached by content hash and start point.
pub fn problem_jstar(cfg: &ExperimentConfig, problem: &BuiltProblem, cache: &JStarCache) -> Result<Option<f64>> {
    let p = problem.as_dyn();
    let x0 = problem.start(&cfg.start, cfg.seeds[0])?;
    if p.exact_objective(&x0).is_none() || p.exact_gradient(&x0).is_none() {
        return Ok(None);
    }
    let key = crate::io::sha256_hex(
        format!("{} {:?} {}", problem.content_hash(), x0, cfg.jstar_budget).as_bytes(),
    );
    let j = cache.get_or_compute(&key, || compute_jstar(p, &x0, cfg.jstar_budget))?;
    Ok(Some(j.value))
}

/// Runs the sweep and writes traces, `summary.csv` and `manifest.json` to
/// `out_dir`. Nothing is left behind on failure.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, cache: &JStarCache) -> Result<ExperimentOutcome> {
    let problem = BuiltProblem::build(&cfg.problem)?;
    let jstar = problem_jstar(cfg, &problem, cache)?;
    let results = execute(cfg, &problem)?;
    let outcome = summarise(&problem, jstar, &results);

    let mut out = OutputDir::create(out_dir)?;
    let written = write_outputs(&mut out, cfg, &results, &outcome);
    match written {
        Ok(()) => {
            out.finish(serde_json::json!({
                "jstar": jstar,
                "iterations": cfg.iterations,
                "seeds": cfg.seeds,
                "optimizers": cfg.optimizers.iter().map(|(l, s)| (l.clone(), format!("{s:?}"))).collect::<Vec<_>>(),
                "problem": format!("{:?}", cfg.problem),
            }))?;
            Ok(outcome)
        }
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn summarise(problem: &BuiltProblem, jstar: Option<f64>, results: &[(String, u64, RunResult<f64>)]) -> ExperimentOutcome {
    let p = problem.as_dyn();
    let runs = results
        .iter()
        .map(|(label, seed, res)| {
            let last = res.trace.last();
            let j_final = last.and_then(|r| r.j_exact);
            RunSummary {
                label: label.clone(),
                seed: *seed,
                file: trace_file_name(label, *seed),
                steps: res.steps,
                total_samples: res.total_samples,
                j_final,
                j_out: p.exact_objective(&res.x_out),
                gap_final: j_final.zip(jstar).map(|(j, s)| j - s),
                grad_norm_sq_final: last.and_then(|r| r.grad_norm_sq),
            }
        })
        .collect();
    ExperimentOutcome { jstar, runs }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn write_outputs(
    out: &mut OutputDir,
    cfg: &ExperimentConfig,
    results: &[(String, u64, RunResult<f64>)],
    outcome: &ExperimentOutcome,
) -> Result<()> {
    for (label, seed, res) in results {
        out.write(&trace_file_name(label, *seed), trace_csv(&res.trace).as_bytes())?;
    }
    let mut summary = String::from("label,seed,steps,total_samples,j_final,j_out,gap_final,grad_norm_sq_final\n");
    for r in &outcome.runs {
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.label,
            r.seed,
            r.steps,
            r.total_samples,
            opt(r.j_final),
            opt(r.j_out),
            opt(r.gap_final),
            opt(r.grad_norm_sq_final)
        ));
    }
    out.write("summary.csv", summary.as_bytes())?;
    if let Some((lo, hi)) = cfg.box_clip {
        for (label, seed, res) in results {
            if res.x_last.iter().chain(&res.x_out).any(|v| *v < lo || *v > hi) {
                return Err(BenchError::Numeric {
                    t: res.steps,
                    context: format!("optimizer {label}, seed {seed} left the box"),
                });
            }
        }
    }
    Ok(())
}
