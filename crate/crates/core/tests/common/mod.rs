// SPDX-License-Identifier: Apache-2.0

//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;
use sis_qsd::chain::TransientGenerator;

/// `e^{Q t}` by uniformisation: `Σ_k Pois(k; Λt) (I + Q/Λ)^k` with
/// `Λ = max_i |Q_ii|`, Poisson weights accumulated in log space and the
/// series cut once past the mode with weights below 1e-30.
pub fn uniformized_exp(q: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = q.len();
    let rate = q
        .iter()
        .enumerate()
        .map(|(i, r)| r[i].abs())
        .fold(0.0, f64::max);
    let mut id = vec![vec![0.0; n]; n];
    for (i, row) in id.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    if t == 0.0 || rate == 0.0 {
        return id;
    }
    let kernel: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| id[i][j] + q[i][j] / rate).collect())
        .collect();
    let mu = rate * t;
    let mut power = id;
    let mut out = vec![vec![0.0; n]; n];
    let mut log_w = -mu;
    let mut k = 0usize;
    loop {
        let w = log_w.exp();
        for i in 0..n {
            for j in 0..n {
                out[i][j] += w * power[i][j];
            }
        }
        if k as f64 > mu && log_w < -69.0 {
            break;
        }
        if k > 100_000 {
            panic!("uniformisation did not terminate");
        }
        k += 1;
        log_w += mu.ln() - (k as f64).ln();
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for l in 0..n {
                let a = power[i][l];
                if a != 0.0 {
                    for j in 0..n {
                        next[i][j] += a * kernel[l][j];
                    }
                }
            }
        }
        power = next;
    }
    out
}

/// Eigenvalues of a dense (possibly non-symmetric) matrix, descending by
/// real part.
pub fn dense_eigenvalues(q: &[Vec<f64>]) -> Vec<f64> {
    let n = q.len();
    let m = DMatrix::from_fn(n, n, |i, j| q[i][j]);
    let ev = m.complex_eigenvalues();
    let mut re: Vec<f64> = ev.iter().map(|c| c.re).collect();
    re.sort_by(|a, b| b.partial_cmp(a).unwrap());
    re
}

pub fn dense_generator(g: &TransientGenerator) -> Vec<Vec<f64>> {
    g.to_dense()
}

pub fn sup_norm(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..b.len()).map(|l| a[i][l] * b[l][j]).sum())
                .collect()
        })
        .collect()
}

/// Kolmogorov–Smirnov statistic of `sample` against a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(m: usize) -> f64 {
    1.627_6 / (m as f64).sqrt()
}
