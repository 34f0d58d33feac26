//! C-ADAM, compositional baselines and the run driver.

mod adam;
mod baselines;
mod cadam;
mod run;

pub use adam::{adam_step, sgd_step, AdamState};
pub use baselines::{ascpg_step, scgd_step, BaselineSchedule, BaselineState};
pub use cadam::{cadam_step, cadam_step_with_next, composite_estimate, CAdamState, StepReport};
pub(crate) use run::plugin_estimate;
pub use run::{
    cadam_run, run, AdamConfig, Checkpoints, OutputRule, PostStep, RunOptions,
    RunResult, RunTrace, SgdConfig, Solver, TraceRow,
};
