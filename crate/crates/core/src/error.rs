// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors produced by the model, solvers and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state {state} outside [{lo}, {hi}]")]
    StateOutOfRange { state: usize, lo: usize, hi: usize },

    #[error("{what} = {value} outside its domain ({domain})")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("result overflows double precision (log value {log_value})")]
    Overflow { log_value: f64 },

    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("dimension {n} exceeds the dense size cap {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("requires R0 > 1 (got R0 = {r0})")]
    Subcritical { r0: f64 },

    #[error("no trajectory survived to t = {t_snap} ({replicates} replicates)")]
    NoSurvivors { t_snap: f64, replicates: usize },

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),
}

pub type Result<T> = std::result::Result<T, Error>;
