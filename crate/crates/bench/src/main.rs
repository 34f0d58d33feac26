use std::path::PathBuf;
use std::process::ExitCode;

use cadam_bench::ablation::{ablation_grid, AblationAxis};
use cadam_bench::config::{ExperimentConfig, Overrides};
use cadam_bench::diagnose::{diagnose, DiagnoseOptions};
use cadam_bench::error::{BenchError, Result};
use cadam_bench::experiment::{problem_jstar, run_experiment, ExperimentOutcome};
use cadam_bench::io::{fmt_float, returns_csv};
use cadam_bench::jstar::JStarCache;
use cadam_bench::maml::maml_pipeline;
use cadam_bench::problem::BuiltProblem;
use cadam_core::problems::{ReturnsRegime, SyntheticReturns};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cadam-bench", version, about = "Benchmarks for compositional stochastic optimizers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Base seed; repeat r runs with seed + r.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    sample_budget: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let o = Overrides {
            iterations: self.iterations,
            repeats: self.repeats,
            sample_budget: self.sample_budget,
        };
        ExperimentConfig::from_file(&self.config, self.seed, &o)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured optimizer on every seed.
    Run {
        #[command(flatten)]
        args: RunArgs,
        /// Directory for cached optimal values.
        #[arg(long)]
        jstar_cache: Option<PathBuf>,
    },
    /// Run the configured optimizers over a grid of batch sizes or step constants.
    Ablate {
        #[command(flatten)]
        args: RunArgs,
        /// `batch` (all batch sizes = K) or `step` (C_alpha = C_beta = C).
        #[arg(long)]
        axis: AblationAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        jstar_cache: Option<PathBuf>,
    },
    /// Meta-train on sine regression and evaluate few-shot fine-tuning.
    Maml {
        #[command(flatten)]
        args: RunArgs,
    },
    /// Compute the reference optimal value of the configured problem.
    Jstar {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Write a synthetic return matrix.
    GenData {
        /// `medium` or `large`; otherwise give --m and --n.
        #[arg(long)]
        regime: Option<String>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate problem constants and check the bound recursions.
    Diagnose {
        #[command(flatten)]
        args: RunArgs,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
        #[arg(long, default_value_t = 20)]
        power_configs: usize,
    },
}

fn cache(dir: Option<PathBuf>) -> JStarCache {
    dir.map(JStarCache::with_dir).unwrap_or_default()
}

fn print_outcome(o: &ExperimentOutcome, cfg: &ExperimentConfig) {
    if let Some(j) = o.jstar {
        println!("J* = {}", fmt_float(j));
    }
    for (label, _) in &cfg.optimizers {
        match o.median_gap(label) {
            Some(g) => println!("{label}: median final gap {}", fmt_float(g)),
            None => println!("{label}: no exact objective"),
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { args, jstar_cache } => {
            let cfg = args.load()?;
            let o = run_experiment(&cfg, &args.out_dir, &cache(jstar_cache))?;
            print_outcome(&o, &cfg);
        }
        Command::Ablate {
            args,
            axis,
            values,
            jstar_cache,
        } => {
            let cfg = ablation_grid(&args.load()?, axis, &values)?;
            let o = run_experiment(&cfg, &args.out_dir, &cache(jstar_cache))?;
            print_outcome(&o, &cfg);
        }
        Command::Maml { args } => {
            let cfg = args.load()?;
            for r in maml_pipeline(&cfg, &args.out_dir)? {
                println!(
                    "seed {}: meta MSE {}, random-init MSE {}, ratio {}",
                    r.seed,
                    fmt_float(*r.meta_curve.last().unwrap_or(&f64::NAN)),
                    fmt_float(*r.random_curve.last().unwrap_or(&f64::NAN)),
                    fmt_float(r.ratio())
                );
            }
        }
        Command::Jstar {
            config,
            seed,
            budget,
            cache_dir,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config, seed, &Overrides::default())?;
            if let Some(b) = budget {
                cfg.jstar_budget = b;
            }
            let problem = BuiltProblem::build(&cfg.problem)?;
            match problem_jstar(&cfg, &problem, &cache(cache_dir))? {
                Some(j) => println!("{}", fmt_float(j)),
                None => return Err(BenchError::Config("the problem has no exact objective".into())),
            }
        }
        Command::GenData { regime, m, n, seed, out } => {
            let regime = match (regime.as_deref(), m, n) {
                (Some("medium"), None, None) => ReturnsRegime::Medium,
                (Some("large"), None, None) => ReturnsRegime::Large,
                (None, Some(m), Some(n)) => ReturnsRegime::Custom { m, n },
                _ => return Err(BenchError::Config("give --regime medium|large, or both --m and --n".into())),
            };
            let data = SyntheticReturns::new(regime, seed).generate::<f64>()?;
            std::fs::write(&out, returns_csv(&data)).map_err(|e| BenchError::io(&out, e))?;
        }
        Command::Diagnose {
            args,
            points,
            radius,
            horizon,
            power_configs,
        } => {
            let cfg = args.load()?;
            let opts = DiagnoseOptions {
                points,
                radius,
                horizon,
                power_configs,
                ..DiagnoseOptions::default()
            };
            let r = diagnose(&cfg, args.seed, &opts, &args.out_dir)?;
            println!("{}", serde_json::to_string_pretty(&r).expect("report serialises"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
