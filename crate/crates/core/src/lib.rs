//! Adaptive stochastic solver for two-level nested compositional problems
//! `min_x E_ν[f_ν(E_ω[g_ω(x)])]`, with compositional baselines, portfolio and
//! meta-learning problems, and numeric diagnostics.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` / `*F32` aliases below fix the precision.

pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod meta;
pub mod optim;
pub mod problem;
pub mod problems;
pub mod rng;
pub mod scalar;
pub mod schedule;

pub use error::{CoreError, Result};
pub use linalg::Matrix;
pub use optim::{
    cadam_run, cadam_step, run, BaselineSchedule, CAdamState, Checkpoints, OutputRule, RunOptions,
    RunResult, RunTrace, Solver, TraceRow,
};
pub use problem::{CompositionalProblem, InnerBatch, Jacobian, JacobianOp};
pub use rng::{OracleRng, SeedStreams, StreamKind};
pub use scalar::Scalar;
pub use schedule::{ProblemConstants, ScheduleConfig, StepParams};

pub type CAdamStateF64 = CAdamState<f64>;
pub type CAdamStateF32 = CAdamState<f32>;
pub type ScheduleConfigF64 = ScheduleConfig<f64>;
pub type ScheduleConfigF32 = ScheduleConfig<f32>;
pub type SolverF64 = Solver<f64>;
pub type SolverF32 = Solver<f32>;
pub type RunTraceF64 = RunTrace<f64>;
pub type RunTraceF32 = RunTrace<f32>;
pub type MatrixF64 = Matrix<f64>;
pub type MatrixF32 = Matrix<f32>;
pub type QuadComposeF64 = problems::QuadCompose<f64>;
pub type QuadComposeF32 = problems::QuadCompose<f32>;
pub type PortfolioProblemF64 = problems::PortfolioProblem<f64>;
pub type PortfolioProblemF32 = problems::PortfolioProblem<f32>;
pub type MamlProblemF64 = meta::MamlProblem<f64>;
pub type MamlProblemF32 = meta::MamlProblem<f32>;
