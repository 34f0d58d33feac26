//! Experiment harness: TOML configs, return-matrix I/O, seeded optimizer
//! sweeps with CSV traces, optimal-value references, ablation grids, the
//! sine meta-learning pipeline and numeric diagnostics.

pub mod ablation;
pub mod config;
pub mod diagnose;
pub mod error;
pub mod experiment;
pub mod io;
pub mod jstar;
pub mod maml;
pub mod problem;
