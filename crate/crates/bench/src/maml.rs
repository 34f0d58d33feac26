//! Meta-training followed by few-shot evaluation on fresh test tasks.

use std::path::Path;

use cadam_core::meta::{fine_tune_eval, train_meta, Architecture, FineTune, MetaTrainConfig, SineTask};
use cadam_core::{OracleRng, SeedStreams, Solver, StreamKind};
use rand::SeedableRng;
use serde::Serialize;

use crate::config::{ExperimentConfig, MamlSpec, ProblemSpec, Start};
use crate::error::{BenchError, Result};
use crate::io::{encode_checkpoint, fmt_float, OutputDir};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MamlReport {
    pub label: String,
    pub seed: u64,
    pub iterations: usize,
    pub total_samples: u64,
    /// Mean held-out MSE over test tasks after each fine-tuning step.
    pub meta_curve: Vec<f64>,
    pub random_curve: Vec<f64>,
}

impl MamlReport {
    /// Meta over random-init mean MSE after the last fine-tuning step.
    pub fn ratio(&self) -> f64 {
        self.meta_curve.last().copied().unwrap_or(f64::NAN) / self.random_curve.last().copied().unwrap_or(f64::NAN)
    }
}

pub struct MamlRun {
    pub arch: Architecture,
    pub meta_params: Vec<f64>,
    pub report: MamlReport,
    /// `(task, amplitude, phase, per-step MSE for meta, for random init)`
    pub per_task: Vec<(usize, SineTask<f64>, Vec<f64>, Vec<f64>)>,
}

fn spec(cfg: &ExperimentConfig) -> Result<(&MamlSpec, usize)> {
    match &cfg.problem {
        ProblemSpec::MamlCase1(m) => Ok((m, 1)),
        ProblemSpec::MamlCase2(m) => Ok((m, m.tasks)),
        _ => Err(BenchError::Config("the maml command needs kind maml-case1 or maml-case2".into())),
    }
}

/// Trains the first configured optimizer from a random network and fine-tunes
/// both it and the untrained network on the same batches of each test task.
pub fn train_and_evaluate(cfg: &ExperimentConfig, seed: u64) -> Result<MamlRun> {
    let (m, tasks) = spec(cfg)?;
    let (label, solver) = cfg
        .optimizers
        .first()
        .ok_or_else(|| BenchError::Config("no optimizer configured".into()))?;
    if !matches!(solver, Solver::CAdam(_) | Solver::Adam(_) | Solver::Sgd(_)) {
        return Err(BenchError::Config(format!("meta-training supports cadam, adam and sgd, not {}", solver.name())));
    }
    let arch = m.architecture()?;
    let x0 = match &cfg.start {
        Start::Problem => arch.init(&mut SeedStreams::new(seed).stream(0, StreamKind::Init)),
        Start::Fill(v) => vec![*v; arch.param_count()],
        Start::Point(v) => v.clone(),
    };
    let ev = &cfg.evaluation;
    let train = MetaTrainConfig {
        tasks_per_batch: tasks,
        iterations: cfg.iterations,
        alpha_inner: m.alpha_inner,
        shots: m.shots,
        solver: solver.clone(),
        resample_tasks: ev.resample_tasks,
        reduction: m.reduction.into(),
    };
    let (meta_params, log) = if cfg.iterations == 0 {
        (x0.clone(), Default::default())
    } else {
        train_meta(&arch, &x0, &train, seed).map_err(|e| match BenchError::from(e) {
            BenchError::Numeric { t, .. } => BenchError::Numeric {
                t,
                context: format!("meta-training with {label}"),
            },
            other => other,
        })?
    };

    let protocol = FineTune {
        steps: ev.fine_tune_steps,
        alpha_inner: ev.fine_tune_alpha.unwrap_or(m.alpha_inner),
        shots: ev.shots,
        eval_points: ev.eval_points,
        reduction: m.reduction.into(),
    };
    let test_seed = ev.test_seed.unwrap_or(seed);
    let mut task_rng = OracleRng::seed_from_u64(test_seed);
    let mut per_task = Vec::with_capacity(ev.test_tasks);
    let mut meta_sum = vec![0.0; protocol.steps + 1];
    let mut random_sum = vec![0.0; protocol.steps + 1];
    for i in 0..ev.test_tasks {
        let task = SineTask::sample(&mut task_rng);
        let batch_rng = SeedStreams::new(test_seed).stream(i as u64, StreamKind::Aux);
        let meta = fine_tune_eval(&arch, &meta_params, &task, &protocol, &mut batch_rng.clone())?;
        let random = fine_tune_eval(&arch, &x0, &task, &protocol, &mut batch_rng.clone())?;
        for s in 0..=protocol.steps {
            meta_sum[s] += meta[s];
            random_sum[s] += random[s];
        }
        per_task.push((i, task, meta, random));
    }
    let n = ev.test_tasks.max(1) as f64;
    Ok(MamlRun {
        arch,
        meta_params,
        report: MamlReport {
            label: label.clone(),
            seed,
            iterations: log.steps,
            total_samples: log.total_samples,
            meta_curve: meta_sum.iter().map(|v| v / n).collect(),
            random_curve: random_sum.iter().map(|v| v / n).collect(),
        },
        per_task,
    })
}

/// Writes `checkpoint_seed<s>.bin`, `report_seed<s>.csv` (one row per task,
/// model and fine-tuning step) and a summary of the mean curves.
pub fn maml_pipeline(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<MamlReport>> {
    let runs = cfg
        .seeds
        .iter()
        .map(|&s| train_and_evaluate(cfg, s))
        .collect::<Result<Vec<_>>>()?;
    let mut out = OutputDir::create(out_dir)?;
    let written = (|| {
        let mut summary = String::from("seed,model,step,mean_mse\n");
        for r in &runs {
            let seed = r.report.seed;
            out.write(&format!("checkpoint_seed{seed}.bin"), &encode_checkpoint(&r.arch, &r.meta_params)?)?;
            let mut csv = String::from("task,amplitude,phase,model,step,mse\n");
            for (i, task, meta, random) in &r.per_task {
                for (model, curve) in [("meta", meta), ("random", random)] {
                    for (s, v) in curve.iter().enumerate() {
                        csv.push_str(&format!(
                            "{i},{},{},{model},{s},{}\n",
                            fmt_float(task.amplitude),
                            fmt_float(task.phase),
                            fmt_float(*v)
                        ));
                    }
                }
            }
            out.write(&format!("report_seed{seed}.csv"), csv.as_bytes())?;
            for (model, curve) in [("meta", &r.report.meta_curve), ("random", &r.report.random_curve)] {
                for (s, v) in curve.iter().enumerate() {
                    summary.push_str(&format!("{seed},{model},{s},{}\n", fmt_float(*v)));
                }
            }
        }
        out.write("summary.csv", summary.as_bytes())?;
        Ok::<_, BenchError>(())
    })();
    match written {
        Ok(()) => {
            let reports: Vec<_> = runs.iter().map(|r| r.report.clone()).collect();
            out.finish(serde_json::json!({
                "reports": reports.iter().map(|r| serde_json::json!({
                    "seed": r.seed,
                    "optimizer": r.label,
                    "iterations": r.iterations,
                    "total_samples": r.total_samples,
                    "ratio": if r.ratio().is_finite() { Some(r.ratio()) } else { None },
                })).collect::<Vec<_>>(),
            }))?;
            Ok(reports)
        }
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}
