//! Experiment configuration files.
//!
//! ```toml
//! [problem]
//! kind = "portfolio"        # portfolio | quad | maml-case1 | maml-case2
//! regime = "medium"         # or `data = "returns.csv"`, or `m`/`n`
//! data_seed = 7
//!
//! [run]
//! iterations = 100000
//! repeats = 5
//! sample_budget = 100000
//! checkpoints = "geometric" # geometric | every | [10, 100, 1000]
//!
//! [optimizer.cadam]
//! preset = "portfolio"
//!
//! [optimizer.scgd]
//! c_alpha = 0.1
//! ```
//!
//! Optimizer sections are keyed by a label. `kind` defaults to the label.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cadam_core::meta::{Activation, Architecture, LossReduction};
use cadam_core::optim::{AdamConfig, SgdConfig};
use cadam_core::{BaselineSchedule, Checkpoints, OutputRule, ScheduleConfig, Solver};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{BenchError, Result};

fn config_err(m: impl Into<String>) -> BenchError {
    BenchError::Config(m.into())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSpec {
    Portfolio(PortfolioSpec),
    Quad(QuadSpec),
    MamlCase1(MamlSpec),
    MamlCase2(MamlSpec),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioSpec {
    /// Return matrix file; relative paths resolve against the config file.
    pub data: Option<PathBuf>,
    /// `medium` or `large`, for synthetic data.
    pub regime: Option<String>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    #[serde(default)]
    pub data_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSpec {
    pub p: usize,
    pub q: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_sigma() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MamlSpec {
    /// Tasks per meta-batch; ignored for case 1.
    #[serde(default = "default_tasks")]
    pub tasks: usize,
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default = "default_alpha_inner")]
    pub alpha_inner: f64,
    #[serde(default)]
    pub reduction: ReductionSpec,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: ActivationSpec,
    /// Seed of the fixed task set used by `run`.
    #[serde(default)]
    pub task_seed: u64,
    /// Freeze this many points per task so exact objectives exist (`run` only).
    pub full_batch: Option<usize>,
}

fn default_tasks() -> usize {
    8
}
fn default_shots() -> usize {
    10
}
fn default_alpha_inner() -> f64 {
    0.01
}
fn default_hidden() -> Vec<usize> {
    vec![40, 40]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionSpec {
    #[default]
    Sum,
    Mean,
}

impl From<ReductionSpec> for LossReduction {
    fn from(r: ReductionSpec) -> Self {
        match r {
            ReductionSpec::Sum => LossReduction::Sum,
            ReductionSpec::Mean => LossReduction::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationSpec {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl MamlSpec {
    pub fn architecture(&self) -> Result<Architecture> {
        let act = match self.activation {
            ActivationSpec::Relu => Activation::Relu,
            ActivationSpec::Tanh => Activation::Tanh,
            ActivationSpec::Identity => Activation::Identity,
        };
        let mut sizes = vec![1];
        sizes.extend(&self.hidden);
        sizes.push(1);
        Ok(Architecture::new(sizes, act)?)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum CheckpointSpec {
    Named(String),
    List(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum StartSpec {
    Fill(f64),
    Point(Vec<f64>),
}

/// Starting point of every run.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Start {
    /// Zeros for portfolio and quad, a seeded random network for MAML.
    #[default]
    Problem,
    Fill(f64),
    Point(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    iterations: usize,
    #[serde(default = "one")]
    repeats: usize,
    #[serde(default)]
    output_rule: Option<String>,
    #[serde(default)]
    checkpoints: Option<CheckpointSpec>,
    sample_budget: Option<u64>,
    box_clip: Option<[f64; 2]>,
    x0: Option<StartSpec>,
    #[serde(default = "default_jstar_budget")]
    jstar_budget: usize,
    #[serde(default)]
    record_wallclock: bool,
}

fn one() -> usize {
    1
}

fn default_jstar_budget() -> usize {
    100_000
}

/// Meta-test protocol of the `maml` command.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSpec {
    #[serde(default = "default_test_tasks")]
    pub test_tasks: usize,
    #[serde(default = "default_fine_tune_steps")]
    pub fine_tune_steps: usize,
    /// Inner step of fine-tuning; defaults to the problem's `alpha_inner`.
    pub fine_tune_alpha: Option<f64>,
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default = "default_eval_points")]
    pub eval_points: usize,
    #[serde(default = "yes")]
    pub resample_tasks: bool,
    /// Seed of the test tasks; defaults to the run seed.
    pub test_seed: Option<u64>,
}

fn default_test_tasks() -> usize {
    100
}
fn default_fine_tune_steps() -> usize {
    10
}
fn default_eval_points() -> usize {
    100
}
fn yes() -> bool {
    true
}

impl Default for EvaluationSpec {
    fn default() -> Self {
        Self {
            test_tasks: default_test_tasks(),
            fine_tune_steps: default_fine_tune_steps(),
            fine_tune_alpha: None,
            shots: default_shots(),
            eval_points: default_eval_points(),
            resample_tasks: true,
            test_seed: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: ProblemSpec,
    run: RunSection,
    #[serde(default)]
    optimizer: BTreeMap<String, toml::Table>,
    #[serde(default)]
    evaluation: EvaluationSpec,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    /// `(label, solver)` in label order.
    pub optimizers: Vec<(String, Solver<f64>)>,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub output_rule: OutputRule,
    pub checkpoints: Checkpoints,
    pub sample_budget: Option<u64>,
    pub box_clip: Option<(f64, f64)>,
    pub start: Start,
    pub jstar_budget: usize,
    pub record_wallclock: bool,
    pub evaluation: EvaluationSpec,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub iterations: Option<usize>,
    pub repeats: Option<usize>,
    pub sample_budget: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path, base_seed: u64, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut cfg = Self::parse(&text, base_seed, overrides)?;
        if let ProblemSpec::Portfolio(PortfolioSpec { data: Some(d), .. }) = &mut cfg.problem {
            if d.is_relative() {
                if let Some(dir) = path.parent() {
                    *d = dir.join(&*d);
                }
            }
        }
        Ok(cfg)
    }

    /// Parses a config; run `r` gets seed `base_seed + r`.
    pub fn parse(text: &str, base_seed: u64, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let run = raw.run;
        let iterations = overrides.iterations.unwrap_or(run.iterations);
        let repeats = overrides.repeats.unwrap_or(run.repeats);
        // Zero iterations is meaningful only for meta-learning: it reports the untrained network.
        let meta = matches!(raw.problem, ProblemSpec::MamlCase1(_) | ProblemSpec::MamlCase2(_));
        if iterations == 0 && !meta {
            return Err(config_err("run.iterations must be at least 1"));
        }
        if repeats == 0 {
            return Err(config_err("run.repeats must be at least 1"));
        }
        let seeds = (0..repeats as u64)
            .map(|r| base_seed.checked_add(r).ok_or_else(|| config_err("seed overflow")))
            .collect::<Result<Vec<_>>>()?;

        let output_rule = match run.output_rule.as_deref() {
            None | Some("uniform") => OutputRule::Uniform,
            Some("last") => OutputRule::Last,
            Some("best") => OutputRule::BestEvaluated,
            Some(o) => return Err(config_err(format!("unknown output_rule {o:?}"))),
        };
        let checkpoints = match run.checkpoints {
            None => Checkpoints::Geometric,
            Some(CheckpointSpec::Named(s)) => match s.as_str() {
                "geometric" => Checkpoints::Geometric,
                "every" => Checkpoints::Every,
                o => return Err(config_err(format!("unknown checkpoints {o:?}"))),
            },
            Some(CheckpointSpec::List(mut ts)) => {
                ts.sort_unstable();
                ts.dedup();
                if ts.first() == Some(&0) {
                    return Err(config_err("checkpoints are numbered from 1"));
                }
                Checkpoints::List(ts)
            }
        };
        let box_clip = match run.box_clip {
            Some([lo, hi]) if !(lo <= hi) => {
                return Err(config_err(format!("box_clip [{lo}, {hi}] is empty")))
            }
            Some([lo, hi]) => Some((lo, hi)),
            None => None,
        };
        let start = match run.x0 {
            None => Start::Problem,
            Some(StartSpec::Fill(v)) => Start::Fill(v),
            Some(StartSpec::Point(v)) => Start::Point(v),
        };

        if raw.optimizer.is_empty() {
            return Err(config_err("at least one [optimizer.<label>] section is required"));
        }
        let optimizers = raw
            .optimizer
            .into_iter()
            .map(|(label, table)| {
                check_label(&label)?;
                let solver = parse_solver(&label, table)?;
                Ok((label, solver))
            })
            .collect::<Result<Vec<_>>>()?;

        if let ProblemSpec::Portfolio(p) = &raw.problem {
            let sources = [p.data.is_some(), p.regime.is_some(), p.m.is_some() || p.n.is_some()];
            if sources.iter().filter(|s| **s).count() != 1 {
                return Err(config_err("portfolio needs exactly one of `data`, `regime`, or `m` and `n`"));
            }
        }

        Ok(Self {
            problem: raw.problem,
            optimizers,
            iterations,
            seeds,
            output_rule,
            checkpoints,
            sample_budget: overrides.sample_budget.or(run.sample_budget),
            box_clip,
            start,
            jstar_budget: run.jstar_budget,
            record_wallclock: run.record_wallclock,
            evaluation: raw.evaluation,
        })
    }
}

fn check_label(label: &str) -> Result<()> {
    let ok = !label.is_empty() && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.');
    if ok {
        Ok(())
    } else {
        Err(config_err(format!("optimizer label {label:?} must be alphanumeric, '_', '-' or '.'")))
    }
}

fn fields<T: DeserializeOwned>(label: &str, table: toml::Table) -> Result<T> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| config_err(format!("[optimizer.{label}]: {e}")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CAdamFields {
    preset: Option<String>,
    batch: Option<usize>,
    c_alpha: Option<f64>,
    c_beta: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    c3: Option<f64>,
    c_gamma: Option<f64>,
    mu: Option<f64>,
    epsilon: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    e: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaselineFields {
    batch: Option<usize>,
    c_alpha: Option<f64>,
    c_beta: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    c3: Option<f64>,
    c: Option<f64>,
    e: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdamFields {
    batch: Option<usize>,
    alpha: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    epsilon: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SgdFields {
    batch: Option<usize>,
    c_alpha: Option<f64>,
    a: Option<f64>,
}

fn set(slot: &mut f64, v: Option<f64>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn parse_solver(label: &str, mut table: toml::Table) -> Result<Solver<f64>> {
    let kind = match table.remove("kind") {
        None => label.to_string(),
        Some(toml::Value::String(s)) => s,
        Some(v) => return Err(config_err(format!("[optimizer.{label}]: kind must be a string, got {v}"))),
    };
    let solver = match kind.as_str() {
        "cadam" => {
            let f: CAdamFields = fields(label, table)?;
            let mut s = match f.preset.as_deref() {
                None | Some("default") => ScheduleConfig::default(),
                Some("portfolio") => ScheduleConfig::portfolio(),
                Some("maml") => ScheduleConfig::maml(),
                Some(p) => return Err(config_err(format!("[optimizer.{label}]: unknown preset {p:?}"))),
            };
            if let Some(k) = f.batch {
                s = s.with_constant_batch(k);
            }
            for (slot, v) in [
                (&mut s.c_alpha, f.c_alpha),
                (&mut s.c_beta, f.c_beta),
                (&mut s.c1, f.c1),
                (&mut s.c2, f.c2),
                (&mut s.c3, f.c3),
                (&mut s.c_gamma, f.c_gamma),
                (&mut s.mu, f.mu),
                (&mut s.epsilon, f.epsilon),
                (&mut s.a, f.a),
                (&mut s.b, f.b),
                (&mut s.c, f.c),
                (&mut s.e, f.e),
            ] {
                set(slot, v);
            }
            s.validate()?;
            Solver::CAdam(s)
        }
        "scgd" | "ascpg" => {
            let f: BaselineFields = fields(label, table)?;
            let mut s = if kind == "scgd" {
                BaselineSchedule::scgd()
            } else {
                BaselineSchedule::ascpg()
            };
            if let Some(k) = f.batch {
                s = s.with_constant_batch(k);
            }
            for (slot, v) in [
                (&mut s.c_alpha, f.c_alpha),
                (&mut s.c_beta, f.c_beta),
                (&mut s.a, f.a),
                (&mut s.b, f.b),
                (&mut s.c1, f.c1),
                (&mut s.c2, f.c2),
                (&mut s.c3, f.c3),
                (&mut s.c, f.c),
                (&mut s.e, f.e),
            ] {
                set(slot, v);
            }
            s.validate()?;
            if kind == "scgd" {
                Solver::Scgd(s)
            } else {
                Solver::AscPg(s)
            }
        }
        "adam" => {
            let f: AdamFields = fields(label, table)?;
            let mut c = AdamConfig::default();
            if let Some(k) = f.batch {
                c.k1 = k;
                c.k2 = k;
            }
            set(&mut c.alpha, f.alpha);
            set(&mut c.beta1, f.beta1);
            set(&mut c.beta2, f.beta2);
            set(&mut c.epsilon, f.epsilon);
            Solver::Adam(c)
        }
        "sgd" => {
            let f: SgdFields = fields(label, table)?;
            let mut c = SgdConfig::default();
            if let Some(k) = f.batch {
                c.k1 = k;
                c.k2 = k;
            }
            set(&mut c.c_alpha, f.c_alpha);
            set(&mut c.a, f.a);
            Solver::Sgd(c)
        }
        other => {
            return Err(config_err(format!(
                "[optimizer.{label}]: unknown kind {other:?} (cadam, scgd, ascpg, adam, sgd)"
            )))
        }
    };
    solver.params(1)?;
    Ok(solver)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [problem]
        kind = "quad"
        p = 3
        q = 4

        [run]
        iterations = 10
        repeats = 3
        checkpoints = [5, 1]

        [optimizer.cadam]
        preset = "portfolio"
        c_alpha = 0.5

        [optimizer.slow]
        kind = "scgd"
        batch = 4
    "#;

    #[test]
    fn parses_optimizers_and_seeds() {
        let cfg = ExperimentConfig::parse(BASE, 10, &Overrides::default()).unwrap();
        assert_eq!(cfg.seeds, vec![10, 11, 12]);
        assert_eq!(cfg.checkpoints, Checkpoints::List(vec![1, 5]));
        assert_eq!(cfg.optimizers[0].0, "cadam");
        match &cfg.optimizers[0].1 {
            Solver::CAdam(s) => {
                assert_eq!(s.c_alpha, 0.5);
                assert_eq!(s.c, 0.0);
            }
            other => panic!("{other:?}"),
        }
        match &cfg.optimizers[1].1 {
            Solver::Scgd(s) => assert_eq!((s.c1, s.c3), (4.0, 4.0)),
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.problem, ProblemSpec::Quad(QuadSpec { p: 3, q: 4, sigma: 0.5, seed: 0 }));
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            iterations: Some(7),
            repeats: Some(1),
            sample_budget: Some(99),
        };
        let cfg = ExperimentConfig::parse(BASE, 0, &o).unwrap();
        assert_eq!((cfg.iterations, cfg.seeds.len(), cfg.sample_budget), (7, 1, Some(99)));
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            BASE.replace("c_alpha = 0.5", "c_alfa = 0.5"),
            BASE.replace("iterations = 10", "iterations = 0"),
            BASE.replace("kind = \"scgd\"", "kind = \"newton\""),
            BASE.replace("p = 3", "p = 3\nbogus = 1"),
            BASE.replace("[optimizer.cadam]\n        preset = \"portfolio\"\n        c_alpha = 0.5", "")
                .replace("[optimizer.slow]\n        kind = \"scgd\"\n        batch = 4", ""),
            BASE.replace("preset = \"portfolio\"", "preset = \"fast\""),
            BASE.replace("c_alpha = 0.5", "c_alpha = -1.0"),
            BASE.replace("[optimizer.slow]", "[optimizer.\"a b\"]"),
        ];
        for text in bad {
            let err = ExperimentConfig::parse(&text, 0, &Overrides::default()).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{err}");
        }
    }

    #[test]
    fn portfolio_needs_one_source() {
        let text = BASE.replace("kind = \"quad\"\n        p = 3\n        q = 4", "kind = \"portfolio\"\nregime = \"medium\"\nm = 3");
        assert!(ExperimentConfig::parse(&text, 0, &Overrides::default()).is_err());
        let text = BASE.replace("kind = \"quad\"\n        p = 3\n        q = 4", "kind = \"portfolio\"\nregime = \"medium\"");
        assert!(ExperimentConfig::parse(&text, 0, &Overrides::default()).is_ok());
    }
}
