//! Builds concrete oracles from problem configs.

use cadam_core::meta::{Architecture, MamlProblem, SineTask};
use cadam_core::problems::{NoiseScales, PortfolioProblem, QuadCompose, ReturnsRegime, SyntheticReturns};
use cadam_core::{CompositionalProblem, OracleRng, SeedStreams, StreamKind};
use rand::SeedableRng;

use crate::config::{ProblemSpec, Start};
use crate::error::{BenchError, Result};
use crate::io::{load_returns_csv, matrix_hash, sha256_hex};

pub enum BuiltProblem {
    Portfolio(PortfolioProblem<f64>),
    Quad(QuadCompose<f64>),
    Maml(MamlProblem<f64>),
}

impl BuiltProblem {
    pub fn build(spec: &ProblemSpec) -> Result<Self> {
        Ok(match spec {
            ProblemSpec::Portfolio(p) => {
                let data = if let Some(path) = &p.data {
                    load_returns_csv(path)?
                } else {
                    let regime = match (p.regime.as_deref(), p.m, p.n) {
                        (Some("medium"), _, _) => ReturnsRegime::Medium,
                        (Some("large"), _, _) => ReturnsRegime::Large,
                        (Some(r), _, _) => {
                            return Err(BenchError::Config(format!("unknown regime {r:?} (medium, large)")))
                        }
                        (None, Some(m), Some(n)) => ReturnsRegime::Custom { m, n },
                        _ => return Err(BenchError::Config("synthetic portfolio needs both m and n".into())),
                    };
                    SyntheticReturns::new(regime, p.data_seed).generate()?
                };
                BuiltProblem::Portfolio(PortfolioProblem::new(data))
            }
            ProblemSpec::Quad(q) => BuiltProblem::Quad(QuadCompose::random(
                q.p,
                q.q,
                NoiseScales::uniform(q.sigma),
                q.seed,
            )?),
            ProblemSpec::MamlCase1(m) | ProblemSpec::MamlCase2(m) => {
                let arch = m.architecture()?;
                let count = if matches!(spec, ProblemSpec::MamlCase1(_)) { 1 } else { m.tasks };
                let mut rng = OracleRng::seed_from_u64(m.task_seed);
                let tasks: Vec<SineTask<f64>> = (0..count).map(|_| SineTask::sample(&mut rng)).collect();
                let prob = MamlProblem::case2(arch, tasks, m.alpha_inner, m.shots)?.with_reduction(m.reduction.into());
                BuiltProblem::Maml(match m.full_batch {
                    Some(k) => prob.frozen(k, &mut rng)?,
                    None => prob,
                })
            }
        })
    }

    pub fn as_dyn(&self) -> &dyn CompositionalProblem<f64> {
        match self {
            BuiltProblem::Portfolio(p) => p,
            BuiltProblem::Quad(p) => p,
            BuiltProblem::Maml(p) => p,
        }
    }

    pub fn architecture(&self) -> Option<&Architecture> {
        match self {
            BuiltProblem::Maml(p) => Some(p.arch()),
            _ => None,
        }
    }

    /// Resolves the configured start; random networks come from `seed`'s init stream.
    pub fn start(&self, start: &Start, seed: u64) -> Result<Vec<f64>> {
        let p = self.as_dyn().decision_dim();
        let x = match start {
            Start::Problem => match self {
                BuiltProblem::Maml(m) => m.arch().init(&mut SeedStreams::new(seed).stream(0, StreamKind::Init)),
                _ => vec![0.0; p],
            },
            Start::Fill(v) => vec![*v; p],
            Start::Point(v) => v.clone(),
        };
        if x.len() != p {
            return Err(BenchError::Config(format!("x0 has {} entries, the problem has {p}", x.len())));
        }
        Ok(x)
    }

    /// Hash of everything that determines the exact objective.
    pub fn content_hash(&self) -> String {
        match self {
            BuiltProblem::Portfolio(p) => matrix_hash("portfolio", &[p.data().returns()], &[]),
            BuiltProblem::Quad(q) => matrix_hash("quad", &[q.a()], &[q.b()]),
            BuiltProblem::Maml(m) => sha256_hex(
                format!(
                    "maml {:?} {:?} {:?} {:?} {:?}",
                    m.arch(),
                    m.tasks(),
                    m.alpha_inner(),
                    m.reduction(),
                    m.mode()
                )
                .as_bytes(),
            ),
        }
    }
}
