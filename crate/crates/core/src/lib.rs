// SPDX-License-Identifier: Apache-2.0

//! Quasi-stationary distribution and expected extinction time of the
//! stochastic SIS epidemic.
//!
//! Three analytic routes, and exact simulation to check them against:
//!
//! * [`stationary`]: the equilibrium of the restarted chain and the exact
//!   mean extinction time from state 1;
//! * [`spectral`]: the QSD as the left eigenvector of the transient
//!   generator, its eigenvalue, survival law and transition probabilities;
//! * [`clt`]: the normal approximation of the endemic level and the
//!   continuity-corrected estimate of `q̃_1`;
//! * [`sim`]: Gillespie simulation of the plain and restarted processes.

pub mod chain;
pub mod clt;
pub mod error;
pub mod logspace;
pub mod sim;
pub mod special;
pub mod spectral;
pub mod stationary;

#[cfg(feature = "cli")]
pub mod cli;
#[cfg(feature = "cli")]
pub mod output;

pub use chain::{
    birth_rate, build_transient_generator, death_rate, ModelParams, TransientGenerator,
};
pub use error::{Error, Result};
pub use stationary::ProbabilityVector;
