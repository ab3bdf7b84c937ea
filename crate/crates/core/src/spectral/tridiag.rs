// SPDX-License-Identifier: Apache-2.0

//! Symmetric tridiagonal kernels: Sturm counts, bisection and inverse
//! iteration.
//!
//! The negated symmetrised generator factors as `−S = BᵀB` with `B` lower
//! bidiagonal (`B_ii = √d_i`, `B_{i+1,i} = −√b_i`). Eigenvalues of `S` are
//! `−σ²` for the singular values `σ` of `B`, and those are found by bisection
//! on the Golub–Kahan matrix of `B` (zero diagonal, off-diagonal
//! `√d_1, √b_1, √d_2, …, √d_n`). That matrix has no diagonal to cancel
//! against, so even eigenvalues hundreds of orders of magnitude below `‖S‖`
//! come out with full relative accuracy.

use crate::error::{Error, Result};
use crate::logspace::log_add_exp;

/// Number of eigenvalues strictly below `x` of the symmetric tridiagonal
/// matrix with diagonal `diag` and squared off-diagonal `off_sq`.
pub(crate) fn sturm_count(diag: &[f64], off_sq: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    for k in 0.. {
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        if k + 1 == diag.len() {
            break;
        }
        q = diag[k + 1] - x - off_sq[k] / q;
    }
    count
}

#[cfg(test)]
/// `k`-th smallest eigenvalue (0-based) by plain bisection to absolute
/// width `abs_tol`.
pub(crate) fn bisect_eigenvalue(diag: &[f64], off_sq: &[f64], k: usize, abs_tol: f64) -> f64 {
    let (mut lo, mut hi) = gershgorin(diag, off_sq);
    let pivmin = pivmin(off_sq);
    while hi - lo > abs_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off_sq, mid, pivmin) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn gershgorin(diag: &[f64], off_sq: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += off_sq[i - 1].sqrt();
        }
        if i + 1 < n {
            r += off_sq[i].sqrt();
        }
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let pad = 1e-14 * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    (lo - pad, hi + pad)
}

fn pivmin(off_sq: &[f64]) -> f64 {
    let m = off_sq.iter().copied().fold(1.0f64, f64::max);
    f64::MIN_POSITIVE * m
}

/// Lower-bidiagonal factor `B` of `−S`: `diag[i] = √d_{i+1}`,
/// `sub[i] = √b_{i+1}` (magnitude of the entry below `diag[i]`).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Bidiagonal {
    pub diag: Vec<f64>,
    pub sub: Vec<f64>,
}

/// Smallest singular value below which `σ²` underflows to zero.
const SIGMA_FLOOR: f64 = 1e-160;

impl Bidiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    fn gk_off_sq(&self) -> Vec<f64> {
        let n = self.dim();
        let mut e = Vec::with_capacity(2 * n - 1);
        for i in 0..n {
            e.push(self.diag[i] * self.diag[i]);
            if i + 1 < n {
                e.push(self.sub[i] * self.sub[i]);
            }
        }
        e
    }

    /// `k`-th smallest singular value (0-based), bracketed to relative width
    /// `rel_tol`. Values below [`SIGMA_FLOOR`] are returned as 0.
    pub fn singular_value(&self, k: usize, rel_tol: f64) -> f64 {
        let off_sq = self.gk_off_sq();
        self.singular_value_with(&off_sq, k, rel_tol)
    }

    fn singular_value_with(&self, off_sq: &[f64], k: usize, rel_tol: f64) -> f64 {
        let n = self.dim();
        let zeros = vec![0.0; 2 * n];
        let target = n + k;
        let pivmin = pivmin(off_sq);
        let count = |x: f64| sturm_count(&zeros, off_sq, x, pivmin);

        let mut lo = SIGMA_FLOOR;
        if count(lo) > target {
            return 0.0;
        }
        let mut hi = gershgorin(&zeros, off_sq).1;
        while hi - lo > rel_tol * hi {
            // geometric midpoint while the bracket spans orders of magnitude
            let mid = if hi > 4.0 * lo {
                (lo * hi).sqrt()
            } else {
                0.5 * (lo + hi)
            };
            if mid <= lo || mid >= hi {
                break;
            }
            if count(mid) > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// All singular values, ascending.
    pub fn singular_values(&self, rel_tol: f64) -> Vec<f64> {
        let off_sq = self.gk_off_sq();
        (0..self.dim())
            .map(|k| self.singular_value_with(&off_sq, k, rel_tol))
            .collect()
    }

    /// Right singular vector for the smallest singular value, in log form,
    /// by inverse iteration with `(BᵀB)⁻¹`.
    ///
    /// `B` has a positive diagonal and nonpositive sub-diagonal, so both
    /// triangular solves only add positive terms. Run in log space this
    /// keeps every component to full relative accuracy however small it is.
    /// Returns `(log u, log σ², iterations)` with `Σ u_i² = 1`.
    pub fn smallest_log_vector(
        &self,
        max_iter: usize,
        log_tol: f64,
    ) -> Result<(Vec<f64>, f64, usize)> {
        let n = self.dim();
        let log_a: Vec<f64> = self.diag.iter().map(|v| v.ln()).collect();
        let log_c: Vec<f64> = self.sub.iter().map(|v| v.ln()).collect();

        let mut y = vec![-0.5 * (n as f64).ln(); n];
        let mut w = vec![0.0; n];
        let mut x = vec![0.0; n];
        for it in 1..=max_iter {
            // Bᵀ w = y, backward
            w[n - 1] = y[n - 1] - log_a[n - 1];
            for i in (0..n - 1).rev() {
                w[i] = log_add_exp(y[i], log_c[i] + w[i + 1]) - log_a[i];
            }
            // B x = w, forward
            x[0] = w[0] - log_a[0];
            for i in 1..n {
                x[i] = log_add_exp(w[i], log_c[i - 1] + x[i - 1]) - log_a[i];
            }
            // Rayleigh quotient of (BᵀB)⁻¹ at y: yᵀx = 1/σ²
            let mut ray = f64::NEG_INFINITY;
            let mut norm2 = f64::NEG_INFINITY;
            for i in 0..n {
                ray = log_add_exp(ray, y[i] + x[i]);
                norm2 = log_add_exp(norm2, 2.0 * x[i]);
            }
            let half = 0.5 * norm2;
            let mut delta: f64 = 0.0;
            for i in 0..n {
                let v = x[i] - half;
                delta = delta.max((v - y[i]).abs());
                y[i] = v;
            }
            if !delta.is_finite() {
                return Err(Error::NoConvergence { iterations: it });
            }
            if delta <= log_tol && it >= 2 {
                return Ok((y, -ray, it));
            }
        }
        Err(Error::NoConvergence {
            iterations: max_iter,
        })
    }
}

/// LU factorisation with partial pivoting of a shifted tridiagonal matrix,
/// `T − μI = P L U`, `U` with two super-diagonals.
struct TridiagLu {
    l: Vec<f64>,
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64, tiny: f64) -> Self {
        let n = diag.len();
        let mut u0: Vec<f64> = diag.iter().map(|d| d - shift).collect();
        let mut u1: Vec<f64> = off.to_vec();
        u1.push(0.0);
        let mut u2 = vec![0.0; n];
        let mut l = vec![0.0; n];
        let mut swapped = vec![false; n];
        // pivot row k holds columns (k, k+1, k+2) in (u0, u1, u2); row k+1
        // still holds (off[k], u0[k+1], u1[k+1])
        for k in 0..n.saturating_sub(1) {
            let below = off[k];
            if below.abs() > u0[k].abs() {
                swapped[k] = true;
                let (a0, a1, a2) = (u0[k], u1[k], u2[k]);
                u0[k] = below;
                u1[k] = u0[k + 1];
                u2[k] = u1[k + 1];
                let m = a0 / below;
                l[k] = m;
                u0[k + 1] = a1 - m * u1[k];
                u1[k + 1] = a2 - m * u2[k];
            } else {
                if u0[k].abs() < tiny {
                    u0[k] = tiny.copysign(u0[k]);
                }
                let m = below / u0[k];
                l[k] = m;
                u0[k + 1] -= m * u1[k];
                u1[k + 1] -= m * u2[k];
            }
        }
        if let Some(last) = u0.last_mut() {
            if last.abs() < tiny {
                *last = tiny.copysign(*last);
            }
        }
        Self {
            l,
            u0,
            u1,
            u2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for k in 0..n.saturating_sub(1) {
            if self.swapped[k] {
                b.swap(k, k + 1);
            }
            b[k + 1] -= self.l[k] * b[k];
        }
        for k in (0..n).rev() {
            let mut v = b[k];
            if k + 1 < n {
                v -= self.u1[k] * b[k + 1];
            }
            if k + 2 < n {
                v -= self.u2[k] * b[k + 2];
            }
            b[k] = v / self.u0[k];
        }
    }
}

/// Eigenvectors of the symmetric tridiagonal `(diag, off)` for the given
/// eigenvalues (sorted descending), by inverse iteration. Vectors inside a
/// cluster (gap below `1e-3 ‖T‖`) are reorthogonalised against each other.
pub(crate) fn inverse_iteration_vectors(
    diag: &[f64],
    off: &[f64],
    eigenvalues: &[f64],
) -> Vec<Vec<f64>> {
    let n = diag.len();
    let norm = diag
        .iter()
        .enumerate()
        .map(|(i, d)| {
            d.abs()
                + if i > 0 { off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { off[i].abs() } else { 0.0 }
        })
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let ortol = 1e-3 * norm;
    let eps = f64::EPSILON;

    let mut clusters: Vec<std::ops::Range<usize>> = Vec::new();
    let mut start = 0;
    for k in 1..=eigenvalues.len() {
        if k == eigenvalues.len() || (eigenvalues[k - 1] - eigenvalues[k]).abs() > ortol {
            clusters.push(start..k);
            start = k;
        }
    }

    let solve_cluster = |range: std::ops::Range<usize>| -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(range.len());
        let mut prev_shift = f64::NAN;
        for k in range {
            let mut shift = eigenvalues[k];
            // separate coincident shifts so the factorisations differ
            if !prev_shift.is_nan() && (shift - prev_shift).abs() < 10.0 * eps * norm {
                shift = prev_shift - 10.0 * eps * norm;
            }
            prev_shift = shift;
            let lu = TridiagLu::factor(diag, off, shift, eps * norm);
            let mut x: Vec<f64> = (0..n)
                .map(|i| 1.0 + 0.25 * (((i * 7 + k * 13) % 17) as f64 / 17.0 - 0.5))
                .collect();
            for _ in 0..5 {
                lu.solve(&mut x);
                for v in &out {
                    let dot: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
                    x.iter_mut().zip(v).for_each(|(xi, vi)| *xi -= dot * vi);
                }
                let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                x.iter_mut().for_each(|v| *v /= nrm);
            }
            out.push(x);
        }
        out
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        clusters
            .into_par_iter()
            .flat_map_iter(solve_cluster)
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        clusters.into_iter().flat_map(solve_cluster).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sturm_counts_diagonal_matrix() {
        let d = [1.0, 2.0, 3.0];
        let e = [0.0, 0.0];
        assert_eq!(sturm_count(&d, &e, 0.5, 1e-300), 0);
        assert_eq!(sturm_count(&d, &e, 2.5, 1e-300), 2);
        assert_eq!(sturm_count(&d, &e, 9.0, 1e-300), 3);
    }

    #[test]
    fn bisection_2x2() {
        // [[2,1],[1,2]] has eigenvalues 1, 3
        let d = [2.0, 2.0];
        let e = [1.0];
        assert!((bisect_eigenvalue(&d, &e, 0, 1e-14) - 1.0).abs() < 1e-13);
        assert!((bisect_eigenvalue(&d, &e, 1, 1e-14) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn singular_values_of_graded_bidiagonal() {
        // B = [[1,0],[-1,1]]: BᵀB = [[2,-1],[-1,1]], eigenvalues (3 ± √5)/2
        let b = Bidiagonal {
            diag: vec![1.0, 1.0],
            sub: vec![1.0],
        };
        let s = b.singular_values(1e-15);
        assert!((s[0] * s[0] - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((s[1] * s[1] - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn tiny_singular_value_relative_accuracy() {
        // diag (ε, 1): smallest singular value of [[ε,0],[-1,1]] ≈ ε/√2
        let eps = 1e-120;
        let b = Bidiagonal {
            diag: vec![eps, 1.0],
            sub: vec![1.0],
        };
        let s = b.singular_value(0, 1e-14);
        // exact: σ_min σ_max = det = ε, σ_min² + σ_max² = 2 + ε²
        let smax = b.singular_value(1, 1e-15);
        assert!((s * smax / eps - 1.0).abs() < 1e-12, "{s}");
        let (_, log_s2, _) = b.smallest_log_vector(200, 1e-14).unwrap();
        assert!((log_s2 - 2.0 * s.ln()).abs() < 1e-10);
    }

    #[test]
    fn inverse_iteration_recovers_vectors() {
        let d = [2.0, 2.0, 2.0];
        let e = [1.0, 1.0];
        let s2 = 2f64.sqrt();
        let vals = [2.0 + s2, 2.0, 2.0 - s2];
        let vecs = inverse_iteration_vectors(&d, &e, &vals);
        for (lam, v) in vals.iter().zip(&vecs) {
            let tv = [
                d[0] * v[0] + e[0] * v[1],
                e[0] * v[0] + d[1] * v[1] + e[1] * v[2],
                e[1] * v[1] + d[2] * v[2],
            ];
            for i in 0..3 {
                assert!((tv[i] - lam * v[i]).abs() < 1e-12);
            }
        }
    }
}
