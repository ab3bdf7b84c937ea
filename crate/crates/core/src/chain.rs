// SPDX-License-Identifier: Apache-2.0

//! The SIS birth–death chain on `{0, 1, …, n}` with absorbing state 0.
//!
//! States are numbered 1..=n in the public API. From state `i` an infection
//! occurs at rate `λ i (n − i) / n` and a recovery at rate `γ i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Population size and rates of the SIS chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    n: usize,
    lambda: f64,
    gamma: f64,
}

impl ModelParams {
    pub fn new(n: usize, lambda: f64, gamma: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and > 0 (got {lambda})"
            )));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be finite and > 0 (got {gamma})"
            )));
        }
        let r0 = lambda / gamma;
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "R0 = lambda/gamma must be finite and positive (got {r0})"
            )));
        }
        Ok(Self { n, lambda, gamma })
    }

    /// Parameterise by reproduction number: `λ = r0 · γ`.
    pub fn from_r0(n: usize, r0: f64, gamma: f64) -> Result<Self> {
        Self::new(n, r0 * gamma, gamma)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r0(&self) -> f64 {
        self.lambda / self.gamma
    }

    fn check_state(&self, i: usize) -> Result<()> {
        if i > self.n {
            Err(Error::StateOutOfRange {
                state: i,
                lo: 0,
                hi: self.n,
            })
        } else {
            Ok(())
        }
    }

    // Unchecked forms for hot loops where `i <= n` is already known.
    #[inline]
    pub(crate) fn birth(&self, i: usize) -> f64 {
        let nf = self.n as f64;
        let x = i as f64;
        self.lambda * x * (nf - x) / nf
    }

    #[inline]
    pub(crate) fn death(&self, i: usize) -> f64 {
        self.gamma * i as f64
    }
}

/// Infection rate `λ i (n − i) / n` out of state `i`.
pub fn birth_rate(i: usize, p: &ModelParams) -> Result<f64> {
    p.check_state(i)?;
    Ok(p.birth(i))
}

/// Recovery rate `γ i` out of state `i`.
pub fn death_rate(i: usize, p: &ModelParams) -> Result<f64> {
    p.check_state(i)?;
    Ok(p.death(i))
}

/// The generator restricted to the transient states 1..=n, stored as three
/// bands. Index `k` in each band refers to state `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientGenerator {
    params: ModelParams,
    /// `sub[k]` is the rate from state `k + 2` down to `k + 1` (length n − 1).
    sub: Vec<f64>,
    diag: Vec<f64>,
    /// `sup[k]` is the rate from state `k + 1` up to `k + 2` (length n − 1).
    sup: Vec<f64>,
}

impl TransientGenerator {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    /// Entry `(i, j)` with 1-based states.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let n = self.dim();
        assert!((1..=n).contains(&i) && (1..=n).contains(&j));
        if i == j {
            self.diag[i - 1]
        } else if j == i + 1 {
            self.sup[i - 1]
        } else if i == j + 1 {
            self.sub[j - 1]
        } else {
            0.0
        }
    }

    /// Row sums, i.e. `Q_TT · 1`.
    pub fn row_sums(&self) -> Vec<f64> {
        let ones = vec![1.0; self.dim()];
        self.mul_vec(&ones)
    }

    /// `Q_TT · x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|k| {
                // Each row is summed as (outflow terms) so that rows of a
                // conservative part cancel exactly against the diagonal.
                let mut acc = self.diag[k] * x[k];
                if k + 1 < n {
                    acc += self.sup[k] * x[k + 1];
                }
                if k > 0 {
                    acc += self.sub[k - 1] * x[k - 1];
                }
                acc
            })
            .collect()
    }

    /// `x · Q_TT` for a row vector `x`.
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|k| {
                let mut acc = x[k] * self.diag[k];
                if k > 0 {
                    acc += x[k - 1] * self.sup[k - 1];
                }
                if k + 1 < n {
                    acc += x[k + 1] * self.sub[k];
                }
                acc
            })
            .collect()
    }

    /// Dense row-major copy; only for small `n`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (1..=n)
            .map(|i| (1..=n).map(|j| self.entry(i, j)).collect())
            .collect()
    }
}

/// Builds `Q_TT` on states 1..=n.
pub fn build_transient_generator(p: &ModelParams) -> TransientGenerator {
    let n = p.n();
    let diag = (1..=n).map(|i| -(p.birth(i) + p.death(i))).collect();
    let sup = (1..n).map(|i| p.birth(i)).collect();
    let sub = (2..=n).map(|i| p.death(i)).collect();
    TransientGenerator {
        params: *p,
        sub,
        diag,
        sup,
    }
}
