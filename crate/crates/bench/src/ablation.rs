//! Ablation grids over batch size or step-size constant.

use std::str::FromStr;

use cadam_core::Solver;

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    /// Every batch size set to the same constant `K`.
    Batch,
    /// `C_α = C_β = C`.
    Step,
}

impl FromStr for AblationAxis {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(AblationAxis::Batch),
            "step" => Ok(AblationAxis::Step),
            o => Err(BenchError::Config(format!("unknown ablation axis {o:?} (batch, step)"))),
        }
    }
}

/// `solver` with the axis set to `value`.
pub fn vary(solver: &Solver<f64>, axis: AblationAxis, value: f64) -> Result<Solver<f64>> {
    let s = match axis {
        AblationAxis::Batch => {
            if !(value >= 1.0 && value.fract() == 0.0 && value <= usize::MAX as f64) {
                return Err(BenchError::Config(format!("batch size {value} is not a positive integer")));
            }
            let k = value as usize;
            match solver.clone() {
                Solver::CAdam(c) => Solver::CAdam(c.with_constant_batch(k)),
                Solver::Scgd(c) => Solver::Scgd(c.with_constant_batch(k)),
                Solver::AscPg(c) => Solver::AscPg(c.with_constant_batch(k)),
                Solver::Adam(mut c) => {
                    c.k1 = k;
                    c.k2 = k;
                    Solver::Adam(c)
                }
                Solver::Sgd(mut c) => {
                    c.k1 = k;
                    c.k2 = k;
                    Solver::Sgd(c)
                }
            }
        }
        AblationAxis::Step => match solver.clone() {
            Solver::CAdam(mut c) => {
                c.c_alpha = value;
                c.c_beta = value;
                c.validate()?;
                Solver::CAdam(c)
            }
            Solver::Scgd(mut c) | Solver::AscPg(mut c) => {
                c.c_alpha = value;
                c.c_beta = value;
                c.validate()?;
                if matches!(solver, Solver::Scgd(_)) {
                    Solver::Scgd(c)
                } else {
                    Solver::AscPg(c)
                }
            }
            Solver::Adam(mut c) => {
                c.alpha = value;
                Solver::Adam(c)
            }
            Solver::Sgd(mut c) => {
                c.c_alpha = value;
                Solver::Sgd(c)
            }
        },
    };
    s.params(1)?;
    Ok(s)
}

/// One config whose optimizer list holds every base optimizer at every
/// value, labelled `<label>_K<v>` or `<label>_C<v>`.
pub fn ablation_grid(base: &ExperimentConfig, axis: AblationAxis, values: &[f64]) -> Result<ExperimentConfig> {
    if values.is_empty() {
        return Err(BenchError::Config("ablation needs at least one value".into()));
    }
    let tag = match axis {
        AblationAxis::Batch => "K",
        AblationAxis::Step => "C",
    };
    let mut optimizers = Vec::with_capacity(base.optimizers.len() * values.len());
    for (label, solver) in &base.optimizers {
        for &v in values {
            optimizers.push((format!("{label}_{tag}{v}"), vary(solver, axis, v)?));
        }
    }
    Ok(ExperimentConfig {
        optimizers,
        ..base.clone()
    })
}
