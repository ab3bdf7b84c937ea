// SPDX-License-Identifier: Apache-2.0

//! Quasi-stationary distribution, dominant eigenvalue and transition
//! probabilities from the spectral decomposition of `Q_TT`.
//!
//! With `W = diag(π̂)`, the matrix `S = W^{1/2} Q_TT W^{-1/2}` is symmetric
//! tridiagonal with off-diagonal `√(b_i d_{i+1})`, which depends only on the
//! rates. Writing `S = Σ λ_k u_k u_kᵀ` gives `Q_TT = Σ λ_k E_k` with
//! `E_k = (W^{-1/2} u_k)(u_kᵀ W^{1/2})`, so `e^{Q_TT t} = Σ e^{λ_k t} E_k`
//! and the rows `u_kᵀ W^{1/2}` are left eigenvectors of `Q_TT`. The row for
//! the dominant eigenvalue, normalised to unit mass, is the QSD `q̃`.
//!
//! The weights are carried as logarithms throughout, so `π̂` underflowing
//! for large `n` never blocks the eigensolve.

mod tridiag;

use serde::Serialize;

use crate::chain::{build_transient_generator, ModelParams, TransientGenerator};
use crate::error::{Error, Result};
use crate::stationary::{log_stationary_distribution, ProbabilityVector};
use tridiag::Bidiagonal;

/// Largest `n` accepted by [`full_decomposition`] and the dense operations
/// built on it.
pub const FULL_DECOMPOSITION_CAP: usize = 4096;

/// Relative bracket width for eigenvalues (`λ = −σ²`, so `σ` is bracketed
/// to half of it).
const EIGENVALUE_REL_TOL: f64 = 1e-12;
const MAX_INVERSE_ITERATIONS: usize = 200;
const LOG_VECTOR_TOL: f64 = 1e-14;

/// `W^{1/2} Q_TT W^{-1/2}` as a symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrizedGenerator {
    params: ModelParams,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
    log_weights: Vec<f64>,
    factor: Bidiagonal,
}

impl SymmetrizedGenerator {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// `log π̂_i` used for `W`.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `π̂_i` (entries may underflow to zero for large `n`).
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// Infinity norm.
    pub fn norm(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                self.diag[i].abs()
                    + if i > 0 {
                        self.offdiag[i - 1].abs()
                    } else {
                        0.0
                    }
                    + if i + 1 < n {
                        self.offdiag[i].abs()
                    } else {
                        0.0
                    }
            })
            .fold(0.0, f64::max)
    }

    /// `S · x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.offdiag[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.offdiag[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }
}

/// Symmetrises `Q_TT` with `W = diag(π̂)`. `pi` must be the equilibrium of
/// the restarted chain for the same parameters and strictly positive.
pub fn symmetrize(g: &TransientGenerator, pi: &ProbabilityVector) -> Result<SymmetrizedGenerator> {
    if pi.len() != g.dim() {
        return Err(Error::InvalidDistribution(format!(
            "weights have length {}, generator has dimension {}",
            pi.len(),
            g.dim()
        )));
    }
    if let Some(v) = pi.values().iter().find(|v| **v <= 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "non-positive weight {v}"
        )));
    }
    let log_pi: Vec<f64> = pi.values().iter().map(|v| v.ln()).collect();
    Ok(symmetrize_log(g, log_pi))
}

/// As [`symmetrize`], taking `log π̂` directly.
pub fn symmetrize_log(g: &TransientGenerator, log_pi: Vec<f64>) -> SymmetrizedGenerator {
    let p = *g.params();
    let n = g.dim();
    assert_eq!(log_pi.len(), n);
    let root_b: Vec<f64> = (1..n).map(|i| p.birth(i).sqrt()).collect();
    let root_d: Vec<f64> = (1..=n).map(|i| p.death(i).sqrt()).collect();
    let offdiag = (0..n - 1).map(|k| root_b[k] * root_d[k + 1]).collect();
    SymmetrizedGenerator {
        params: p,
        diag: g.diag().to_vec(),
        offdiag,
        log_weights: log_pi,
        factor: Bidiagonal {
            diag: root_d,
            sub: root_b,
        },
    }
}

/// The dominant eigenvalue of `S` and its positive unit eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct DominantEigenpair {
    /// `λ₁ < 0`; may underflow to `-0.0` when `|λ₁| < 1e-308`.
    pub lambda1: f64,
    /// `log(−λ₁)`, always finite.
    pub log_decay_rate: f64,
    pub u1: Vec<f64>,
    /// `log u1_i`, finite where `u1_i` underflows.
    pub log_u1: Vec<f64>,
    pub iterations: usize,
}

/// Largest eigenvalue of `S` by Sturm bisection, eigenvector by inverse
/// iteration.
pub fn dominant_eigenpair(s: &SymmetrizedGenerator) -> Result<DominantEigenpair> {
    let sigma = s.factor.singular_value(0, 4.0 * f64::EPSILON);
    let (log_u1, log_rq, iterations) = s
        .factor
        .smallest_log_vector(MAX_INVERSE_ITERATIONS, LOG_VECTOR_TOL)?;

    let (lambda1, log_decay_rate) = if sigma > 0.0 {
        (-(sigma * sigma), 2.0 * sigma.ln())
    } else {
        (-log_rq.exp(), log_rq)
    };
    let u1: Vec<f64> = log_u1.iter().map(|l| l.exp()).collect();

    let su = s.mul_vec(&u1);
    let residual = su
        .iter()
        .zip(&u1)
        .map(|(a, b)| (a - lambda1 * b).powi(2))
        .sum::<f64>()
        .sqrt();
    if residual > 1e-10 * s.norm() {
        return Err(Error::NoConvergence { iterations });
    }

    Ok(DominantEigenpair {
        lambda1,
        log_decay_rate,
        u1,
        log_u1,
        iterations,
    })
}

/// Dominant eigenvalue, QSD and (after [`full_decomposition`]) the full
/// spectrum of `Q_TT`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralResult {
    #[serde(skip)]
    params: ModelParams,
    pub lambda1: f64,
    pub log_decay_rate: f64,
    pub qsd: ProbabilityVector,
    #[serde(skip)]
    pub log_qsd: Vec<f64>,
    /// `λ₁ > λ₂ ≥ … ≥ λ_n`.
    pub eigenvalues: Option<Vec<f64>>,
    /// Orthonormal eigenvectors `u_k` of `S`, in eigenvalue order.
    #[serde(skip)]
    pub basis: Option<Vec<Vec<f64>>>,
    #[serde(skip)]
    log_weights: Vec<f64>,
}

impl SpectralResult {
    fn from_pair(s: &SymmetrizedGenerator, pair: &DominantEigenpair) -> Result<Self> {
        let lw: Vec<f64> = pair
            .log_u1
            .iter()
            .zip(&s.log_weights)
            .map(|(lu, lp)| lu + 0.5 * lp)
            .collect();
        let (qsd, log_qsd) = ProbabilityVector::from_log_weights(&lw)?;
        Ok(Self {
            params: s.params,
            lambda1: pair.lambda1,
            log_decay_rate: pair.log_decay_rate,
            qsd,
            log_qsd,
            eigenvalues: None,
            basis: None,
            log_weights: s.log_weights.clone(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// `log q̃_1`.
    pub fn log_q1(&self) -> f64 {
        self.log_qsd[0]
    }

    /// `log E(T_Q) = −log γ − log q̃_1`.
    pub fn log_expected_time(&self) -> f64 {
        -self.params.gamma().ln() - self.log_q1()
    }

    /// `E(T_Q) = 1/(γ q̃_1)`.
    pub fn expected_time(&self) -> Result<f64> {
        let log_value = self.log_expected_time();
        let v = log_value.exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow { log_value })
        }
    }

    /// `P(T_Q > t) = e^{λ₁ t}` for a start distributed as `q̃`.
    pub fn survival(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok((self.lambda1 * t).exp())
    }

    fn spectrum(&self) -> Result<(&[f64], &[Vec<f64>])> {
        match (&self.eigenvalues, &self.basis) {
            (Some(e), Some(b)) => Ok((e, b)),
            _ => Err(Error::InvalidParameter(
                "full decomposition required; use full_decomposition".into(),
            )),
        }
    }

    /// Dense spectral projector `E_k` (0-based `k`).
    pub fn projector(&self, k: usize) -> Result<Vec<Vec<f64>>> {
        let (_, basis) = self.spectrum()?;
        let u = &basis[k];
        let n = u.len();
        let lw = &self.log_weights;
        Ok((0..n)
            .map(|i| {
                (0..n)
                    .map(|j| u[i] * u[j] * (0.5 * (lw[j] - lw[i])).exp())
                    .collect()
            })
            .collect())
    }

    /// Left eigenvector `u_kᵀ W^{1/2}` of `Q_TT` (unnormalised).
    pub fn left_eigenvector(&self, k: usize) -> Result<Vec<f64>> {
        let (_, basis) = self.spectrum()?;
        Ok(basis[k]
            .iter()
            .zip(&self.log_weights)
            .map(|(u, lw)| u * (0.5 * lw).exp())
            .collect())
    }

    /// `Σ_k e^{(λ_k − shift) t} u_ki u_kj √(π̂_j/π̂_i)`.
    fn kernel_entry(&self, t: f64, shift: f64, i: usize, j: usize) -> Result<f64> {
        let (vals, basis) = self.spectrum()?;
        let acc: f64 = vals
            .iter()
            .zip(basis)
            .map(|(l, u)| ((l - shift) * t).exp() * u[i] * u[j])
            .sum();
        Ok(acc * (0.5 * (self.log_weights[j] - self.log_weights[i])).exp())
    }

    /// `P_{ij}(t) = [e^{Q_TT t}]_{ij}`, 1-based states.
    pub fn transition_probability(&self, t: f64, i: usize, j: usize) -> Result<f64> {
        check_time(t)?;
        let n = self.qsd.len();
        check_state(i, n)?;
        check_state(j, n)?;
        Ok(self.kernel_entry(t, 0.0, i - 1, j - 1)?.clamp(0.0, 1.0))
    }

    /// Full matrix `e^{Q_TT t}`.
    pub fn transition_matrix(&self, t: f64) -> Result<Vec<Vec<f64>>> {
        check_time(t)?;
        let n = self.qsd.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| Ok(self.kernel_entry(t, 0.0, i, j)?.clamp(0.0, 1.0)))
                    .collect()
            })
            .collect()
    }

    /// `q_{i·}(t) = P_{i·}(t) / (1 − P_{i,0}(t))` for a 1-based `i`.
    ///
    /// Exponentials are shifted by `λ₁` so the row stays representable when
    /// `P(t)` itself has decayed below the smallest double.
    pub fn conditioned_row(&self, t: f64, i: usize) -> Result<Vec<f64>> {
        check_time(t)?;
        let n = self.qsd.len();
        check_state(i, n)?;
        let row: Vec<f64> = (0..n)
            .map(|j| Ok(self.kernel_entry(t, self.lambda1, i - 1, j)?.max(0.0)))
            .collect::<Result<_>>()?;
        let s: f64 = row.iter().sum();
        Ok(row.into_iter().map(|v| v / s).collect())
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "t",
            value: t,
            domain: "t >= 0",
        })
    }
}

fn check_state(i: usize, n: usize) -> Result<()> {
    if (1..=n).contains(&i) {
        Ok(())
    } else {
        Err(Error::StateOutOfRange {
            state: i,
            lo: 1,
            hi: n,
        })
    }
}

fn check_cap(n: usize) -> Result<()> {
    if n > FULL_DECOMPOSITION_CAP {
        Err(Error::SizeCap {
            n,
            cap: FULL_DECOMPOSITION_CAP,
        })
    } else {
        Ok(())
    }
}

/// The symmetrised generator for `p`, with weights from the stationary
/// module.
pub fn symmetrized_generator(p: &ModelParams) -> SymmetrizedGenerator {
    let g = build_transient_generator(p);
    symmetrize_log(&g, log_stationary_distribution(p))
}

/// QSD `q̃` and dominant eigenvalue `λ₁` of `Q_TT`.
pub fn quasi_stationary_distribution(p: &ModelParams) -> Result<SpectralResult> {
    let s = symmetrized_generator(p);
    let pair = dominant_eigenpair(&s)?;
    SpectralResult::from_pair(&s, &pair)
}

/// Mean time to extinction from the QSD, `1/(γ q̃_1)`.
pub fn expected_time_qsd(p: &ModelParams) -> Result<f64> {
    quasi_stationary_distribution(p)?.expected_time()
}

/// `log E(T_Q)`, finite even when the value overflows.
pub fn log_expected_time_qsd(p: &ModelParams) -> Result<f64> {
    Ok(quasi_stationary_distribution(p)?.log_expected_time())
}

/// `P(T_Q > t) = e^{λ₁ t}`, assuming the chain starts distributed as `q̃`.
pub fn survival_probability(p: &ModelParams, t: f64) -> Result<f64> {
    check_time(t)?;
    quasi_stationary_distribution(p)?.survival(t)
}

/// All eigenpairs of `S`: eigenvalues by Sturm bisection, eigenvectors by
/// inverse iteration (clusters handled in parallel).
pub fn full_decomposition(s: &SymmetrizedGenerator) -> Result<SpectralResult> {
    let n = s.dim();
    check_cap(n)?;
    let pair = dominant_eigenpair(s)?;
    let mut result = SpectralResult::from_pair(s, &pair)?;

    let sigmas = s.factor.singular_values(0.5 * EIGENVALUE_REL_TOL);
    let mut eigenvalues: Vec<f64> = sigmas.iter().map(|v| -(v * v)).collect();
    eigenvalues[0] = pair.lambda1;

    let mut basis = tridiag::inverse_iteration_vectors(&s.diag, &s.offdiag, &eigenvalues);
    basis[0] = pair.u1.clone();
    for u in basis.iter_mut().skip(1) {
        let big = u
            .iter()
            .copied()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if big < 0.0 {
            u.iter_mut().for_each(|v| *v = -*v);
        }
    }

    result.eigenvalues = Some(eigenvalues);
    result.basis = Some(basis);
    Ok(result)
}

/// Full decomposition for `p`.
pub fn decompose(p: &ModelParams) -> Result<SpectralResult> {
    check_cap(p.n())?;
    full_decomposition(&symmetrized_generator(p))
}

/// `P_{ij}(t) = [e^{Q_TT t}]_{ij}`, 1-based states.
pub fn transition_probability(p: &ModelParams, t: f64, i: usize, j: usize) -> Result<f64> {
    check_time(t)?;
    check_state(i, p.n())?;
    check_state(j, p.n())?;
    decompose(p)?.transition_probability(t, i, j)
}

/// `P(Y(t) = j | Y(t) > 0, Y(0) = i)`.
pub fn conditioned_probability(p: &ModelParams, t: f64, i: usize, j: usize) -> Result<f64> {
    check_time(t)?;
    check_state(i, p.n())?;
    check_state(j, p.n())?;
    Ok(decompose(p)?.conditioned_row(t, i)?[j - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(n: usize, lambda: f64, gamma: f64) -> ModelParams {
        ModelParams::new(n, lambda, gamma).unwrap()
    }

    // n = 2, λ = γ = 1: characteristic polynomial x² + 3.5x + 2
    fn lambda1_n2() -> f64 {
        (-3.5 + 4.25f64.sqrt()) / 2.0
    }
    fn lambda2_n2() -> f64 {
        (-3.5 - 4.25f64.sqrt()) / 2.0
    }

    #[test]
    fn symmetrize_small() {
        let q = p(1, 1.0, 1.0);
        let s = symmetrized_generator(&q);
        assert_eq!(s.diag(), &[-1.0]);
        assert!(s.offdiag().is_empty());

        let q = p(2, 1.0, 1.0);
        let g = build_transient_generator(&q);
        let pi = crate::stationary::stationary_distribution(&q);
        let s = symmetrize(&g, &pi).unwrap();
        assert_eq!(s.diag(), &[-1.5, -2.0]);
        assert_relative_eq!(s.offdiag()[0], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn symmetrize_rejects_nonpositive_weights() {
        let q = p(2, 1.0, 1.0);
        let g = build_transient_generator(&q);
        let pi = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        assert!(symmetrize(&g, &pi).is_err());
        let wrong_len = ProbabilityVector::new(vec![1.0]).unwrap();
        assert!(symmetrize(&g, &wrong_len).is_err());
    }

    #[test]
    fn symmetrized_is_similar_to_generator() {
        // W^{1/2} Q W^{-1/2} entry-wise against the stored bands
        let q = p(6, 3.0, 1.2);
        let g = build_transient_generator(&q);
        let s = symmetrized_generator(&q);
        let w = s.weights();
        for i in 1..6 {
            let upper = w[i - 1].sqrt() * g.entry(i, i + 1) / w[i].sqrt();
            let lower = w[i].sqrt() * g.entry(i + 1, i) / w[i - 1].sqrt();
            assert_relative_eq!(upper, s.offdiag()[i - 1], max_relative = 1e-13);
            assert_relative_eq!(lower, s.offdiag()[i - 1], max_relative = 1e-13);
        }
    }

    #[test]
    fn dominant_pair_small() {
        let pair = dominant_eigenpair(&symmetrized_generator(&p(1, 1.0, 1.0))).unwrap();
        assert_relative_eq!(pair.lambda1, -1.0, max_relative = 1e-12);
        assert_relative_eq!(pair.u1[0], 1.0, max_relative = 1e-14);

        let pair = dominant_eigenpair(&symmetrized_generator(&p(2, 1.0, 1.0))).unwrap();
        assert_relative_eq!(pair.lambda1, lambda1_n2(), max_relative = 1e-12);
        assert!(pair.u1.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn qsd_n2() {
        let r = quasi_stationary_distribution(&p(2, 1.0, 1.0)).unwrap();
        // left eigenvector of [[-1.5, 0.5], [2, -2]]: q1 = -λ₁, q2 = 1 + λ₁
        let l = lambda1_n2();
        assert_relative_eq!(r.qsd.get(1), -l, max_relative = 1e-12);
        assert_relative_eq!(r.qsd.get(2), 1.0 + l, max_relative = 1e-12);
        assert!((r.qsd.get(1) - 0.7192236).abs() < 1e-7);
        assert_relative_eq!(r.qsd.get(1), -r.lambda1, max_relative = 1e-12);
        assert_relative_eq!(
            r.expected_time().unwrap(),
            1.0 / 0.719_223_593_595_585,
            max_relative = 1e-11
        );
        assert!((r.expected_time().unwrap() - 1.390388).abs() < 1e-6);
    }

    #[test]
    fn survival_law() {
        let q = p(2, 1.0, 1.0);
        assert_eq!(survival_probability(&q, 0.0).unwrap(), 1.0);
        let s1 = survival_probability(&q, 1.0).unwrap();
        assert_relative_eq!(s1, lambda1_n2().exp(), max_relative = 1e-12);
        assert!((s1 - 0.4871).abs() < 1e-4);
        assert!(survival_probability(&q, -1.0).is_err());
        // mean of Exp(−λ₁) equals E(T_Q)
        let r = quasi_stationary_distribution(&q).unwrap();
        assert_relative_eq!(
            -1.0 / r.lambda1,
            r.expected_time().unwrap(),
            max_relative = 1e-11
        );
    }

    #[test]
    fn full_spectrum_small() {
        let r = decompose(&p(1, 1.0, 3.0)).unwrap();
        assert_relative_eq!(
            r.eigenvalues.as_ref().unwrap()[0],
            -3.0,
            max_relative = 1e-12
        );

        let r = decompose(&p(2, 1.0, 1.0)).unwrap();
        let e = r.eigenvalues.unwrap();
        assert_relative_eq!(e[0], lambda1_n2(), max_relative = 1e-12);
        assert_relative_eq!(e[1], lambda2_n2(), max_relative = 1e-12);
    }

    #[test]
    fn trace_invariance() {
        for &(n, l) in &[(7, 0.5), (20, 2.0), (40, 5.0)] {
            let q = p(n, l, 1.0);
            let r = decompose(&q).unwrap();
            let tr: f64 = build_transient_generator(&q).diag().iter().sum();
            let s: f64 = r.eigenvalues.unwrap().iter().sum();
            assert_relative_eq!(s, tr, max_relative = 1e-9);
        }
    }

    #[test]
    fn size_cap_is_checked_first() {
        let q = p(FULL_DECOMPOSITION_CAP + 1, 2.0, 1.0);
        assert!(matches!(decompose(&q), Err(Error::SizeCap { .. })));
        assert!(matches!(
            transition_probability(&q, 1.0, 1, 1),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn transition_probability_basics() {
        let q = p(4, 2.0, 1.0);
        let r = decompose(&q).unwrap();
        for i in 1..=4 {
            for j in 1..=4 {
                let v = r.transition_probability(0.0, i, j).unwrap();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        let q = p(1, 1.0, 1.0);
        assert_relative_eq!(
            transition_probability(&q, 2.0, 1, 1).unwrap(),
            (-2f64).exp(),
            max_relative = 1e-12
        );
        assert!(transition_probability(&q, -2.0, 1, 1).is_err());
        assert!(transition_probability(&q, 1.0, 2, 1).is_err());
    }

    #[test]
    fn conditioned_rows() {
        let q = p(2, 1.0, 1.0);
        assert!((conditioned_probability(&q, 0.0, 1, 1).unwrap() - 1.0).abs() < 1e-12);
        let r = decompose(&q).unwrap();
        let row = r.conditioned_row(20.0, 1).unwrap();
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in row.iter().zip(r.qsd.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn huge_population_qsd_in_log_form() {
        // q̃_1 underflows; its log and E(T_Q) in log form stay finite
        let r = quasi_stationary_distribution(&p(1000, 5.0, 1.0)).unwrap();
        assert!(r.log_q1().is_finite() && r.log_q1() < -745.0);
        assert!(matches!(r.expected_time(), Err(Error::Overflow { .. })));
        assert_relative_eq!(r.log_decay_rate, r.log_q1(), max_relative = 1e-9);
        let m = r.qsd.mean();
        assert!((m - 800.0).abs() < 2.0, "{m}");
    }
}
