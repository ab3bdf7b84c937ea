// SPDX-License-Identifier: Apache-2.0

//! Equilibrium of the restarted process and the exact mean extinction time.
//!
//! The restarted chain jumps from 0 straight back to state 1, which makes it
//! reversible on 1..=n. Its equilibrium follows from the detailed-balance
//! recurrence `π̂_{i+1} / π̂_i = b_i / d_{i+1}`. All products are accumulated
//! as sums of logarithms and normalised with a max-shifted log-sum-exp, so
//! nothing overflows for large `n`.

use serde::Serialize;

use crate::chain::ModelParams;
use crate::error::{Error, Result};
use crate::logspace::log_sum_exp;

/// A distribution over the transient states 1..=n.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityVector {
    values: Vec<f64>,
}

impl ProbabilityVector {
    const SUM_TOL: f64 = 1e-12;

    /// Validates nonnegativity and unit mass (within 1e-12).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "entry {bad} is not a probability"
            )));
        }
        let s: f64 = values.iter().sum();
        if (s - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {s}")));
        }
        Ok(Self { values })
    }

    /// Normalises unnormalised log weights. Returns the vector together with
    /// the normalised log values, which stay finite where `exp` underflows.
    pub fn from_log_weights(log_weights: &[f64]) -> Result<(Self, Vec<f64>)> {
        let z = log_sum_exp(log_weights);
        if !z.is_finite() {
            return Err(Error::InvalidDistribution(format!("log normaliser {z}")));
        }
        let logs: Vec<f64> = log_weights.iter().map(|l| l - z).collect();
        let mut values: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        // exp of normalised logs can miss unit mass by a few ulps.
        let s: f64 = values.iter().sum();
        values.iter_mut().for_each(|v| *v /= s);
        Ok((Self { values }, logs))
    }

    /// Point mass on `state` (1-based) among `n` states.
    pub fn point_mass(n: usize, state: usize) -> Result<Self> {
        if state == 0 || state > n {
            return Err(Error::StateOutOfRange {
                state,
                lo: 1,
                hi: n,
            });
        }
        let mut values = vec![0.0; n];
        values[state - 1] = 1.0;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Probability of `state` (1-based).
    pub fn get(&self, state: usize) -> f64 {
        self.values[state - 1]
    }

    /// Total-variation distance to another vector of the same length.
    pub fn total_variation(&self, other: &ProbabilityVector) -> f64 {
        assert_eq!(self.len(), other.len());
        0.5 * self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// 1-based state with the largest mass (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        best + 1
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| (k + 1) as f64 * v)
            .sum()
    }
}

/// Unnormalised `log π̂_i` with `log π̂_1 = 0`, from the detailed-balance
/// recurrence.
pub fn unnormalized_log_weights(p: &ModelParams) -> Vec<f64> {
    let n = p.n();
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    out.push(acc);
    for i in 1..n {
        acc += p.birth(i).ln() - p.death(i + 1).ln();
        out.push(acc);
    }
    out
}

/// Normalised `log π̂_i`, finite even where `π̂_i` underflows.
pub fn log_stationary_distribution(p: &ModelParams) -> Vec<f64> {
    let w = unnormalized_log_weights(p);
    let z = log_sum_exp(&w);
    w.into_iter().map(|l| l - z).collect()
}

/// Equilibrium `π̂` of the restarted process.
pub fn stationary_distribution(p: &ModelParams) -> ProbabilityVector {
    let w = unnormalized_log_weights(p);
    ProbabilityVector::from_log_weights(&w)
        .expect("detailed-balance weights are finite")
        .0
}

/// `log E(T_ext) = −log γ − log π̂_1`.
pub fn log_expected_extinction_time(p: &ModelParams) -> f64 {
    let w = unnormalized_log_weights(p);
    log_sum_exp(&w) - p.gamma().ln()
}

/// `E(T_ext) = 1 / (γ π̂_1)`, the mean extinction time from state 1.
///
/// Fails with [`Error::Overflow`] (carrying the log value) when the result is
/// not representable.
pub fn exact_expected_extinction_time(p: &ModelParams) -> Result<f64> {
    let log_value = log_expected_extinction_time(p);
    let v = log_value.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow { log_value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use libm::lgamma as ln_gamma;
    use proptest::prelude::*;

    fn p(n: usize, lambda: f64, gamma: f64) -> ModelParams {
        ModelParams::new(n, lambda, gamma).unwrap()
    }

    /// `log π̂_i − log π̂_1` straight from the closed form with factorials
    /// expressed through `ln Γ`.
    fn closed_form_log_ratio(q: &ModelParams, i: usize) -> f64 {
        let n = q.n() as f64;
        let x = i as f64;
        -x.ln() + (x - 1.0) * (q.lambda() / (n * q.gamma())).ln() + ln_gamma(n)
            - ln_gamma(n - x + 1.0)
    }

    #[test]
    fn single_state() {
        let pi = stationary_distribution(&p(1, 3.0, 2.0));
        assert_eq!(pi.values(), &[1.0]);
        assert_relative_eq!(
            exact_expected_extinction_time(&p(1, 3.0, 2.0)).unwrap(),
            0.5
        );
        assert_eq!(log_expected_extinction_time(&p(1, 7.0, 1.0)), 0.0);
    }

    #[test]
    fn two_states() {
        let q = p(2, 1.0, 1.0);
        let pi = stationary_distribution(&q);
        assert_relative_eq!(pi.get(1), 0.8, max_relative = 1e-15);
        assert_relative_eq!(pi.get(2), 0.2, max_relative = 1e-14);
        assert_relative_eq!(
            exact_expected_extinction_time(&q).unwrap(),
            1.25,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            log_expected_extinction_time(&q),
            1.25f64.ln(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn endemic_peak_location() {
        let pi = stationary_distribution(&p(100, 5.0, 1.0));
        let m = pi.argmax() as i64;
        assert!((m - 80).abs() <= 2, "argmax {m}");
    }

    #[test]
    fn subcritical_large_n_limit() {
        // γ = 1, λ < 1: E(T_ext) → −log(1 − λ)/λ.
        let t = exact_expected_extinction_time(&p(10_000, 0.5, 1.0)).unwrap();
        let lim = -(1.0f64 - 0.5).ln() / 0.5;
        assert!((t - lim).abs() / lim < 0.01, "{t} vs {lim}");
    }

    #[test]
    fn overflow_is_reported_with_log() {
        let q = p(1000, 5.0, 1.0);
        let l = log_expected_extinction_time(&q);
        assert!(l.is_finite() && l > 709.0);
        match exact_expected_extinction_time(&q) {
            Err(Error::Overflow { log_value }) => assert_eq!(log_value, l),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn recurrence_matches_closed_form() {
        for &(n, lambda, gamma) in &[
            (5, 2.0, 1.0),
            (50, 0.5, 1.0),
            (120, 8.0, 0.5),
            (200, 3.0, 2.0),
            (170, 1.0, 1.0),
        ] {
            let q = p(n, lambda, gamma);
            let w = unnormalized_log_weights(&q);
            let closed: Vec<f64> = (1..=n).map(|i| closed_form_log_ratio(&q, i)).collect();
            let (a, _) = ProbabilityVector::from_log_weights(&w).unwrap();
            let (b, _) = ProbabilityVector::from_log_weights(&closed).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                if *y > 1e-300 {
                    assert_relative_eq!(*x, *y, max_relative = 1e-10);
                }
            }
            // explicit sum form of the extinction time
            let t_sum = log_sum_exp(&closed) - gamma.ln();
            assert_relative_eq!(
                log_expected_extinction_time(&q),
                t_sum,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn global_balance_including_boundaries() {
        for &(n, lambda, gamma) in &[(2, 1.0, 1.0), (10, 3.0, 1.0), (40, 0.7, 1.3)] {
            let q = p(n, lambda, gamma);
            let pi = stationary_distribution(&q);
            let v = pi.values();
            // restarted chain: the 1 → 0 → 1 loop is a self-transition
            let out = |i: usize| q.birth(i) + if i == 1 { 0.0 } else { q.death(i) };
            for i in 1..=n {
                let lhs = out(i) * v[i - 1];
                let mut rhs = 0.0;
                if i > 1 {
                    rhs += q.birth(i - 1) * v[i - 2];
                }
                if i < n {
                    rhs += q.death(i + 1) * v[i];
                }
                assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn probability_vector_validation() {
        assert!(ProbabilityVector::new(vec![]).is_err());
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityVector::new(vec![1.5, -0.5]).is_err());
        assert!(ProbabilityVector::new(vec![0.25, 0.75]).is_ok());
        assert!(ProbabilityVector::point_mass(3, 0).is_err());
        assert_eq!(
            ProbabilityVector::point_mass(3, 2).unwrap().values(),
            &[0.0, 1.0, 0.0]
        );
    }

    proptest! {
        #[test]
        fn detailed_balance(n in 2usize..400, lambda in 0.05f64..12.0, gamma in 0.05f64..5.0) {
            let q = p(n, lambda, gamma);
            let pi = stationary_distribution(&q);
            let v = pi.values();
            let s: f64 = v.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            for i in 1..n {
                let lhs = v[i - 1] * q.birth(i);
                let rhs = v[i] * q.death(i + 1);
                if lhs > 1e-290 {
                    prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs, "i={} {} {}", i, lhs, rhs);
                }
            }
        }

        #[test]
        fn log_and_direct_times_agree(n in 1usize..150, lambda in 0.05f64..4.0, gamma in 0.2f64..5.0) {
            let q = p(n, lambda, gamma);
            if let Ok(t) = exact_expected_extinction_time(&q) {
                let l = log_expected_extinction_time(&q);
                prop_assert!((l.exp() - t).abs() <= 1e-12 * t);
                let pi1 = stationary_distribution(&q).get(1);
                prop_assert!((t - 1.0 / (gamma * pi1)).abs() <= 1e-12 * t);
            }
        }
    }
}
