// SPDX-License-Identifier: Apache-2.0

//! Log-domain accumulation helpers.

/// `log(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log Σ exp(x_i)`, shifting by the maximum term.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// `log(1 − exp(x))` for `x <= 0`.
#[inline]
pub fn log1m_exp(x: f64) -> f64 {
    debug_assert!(x <= 0.0);
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_basic() {
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        let big = log_sum_exp(&[1000.0, 1000.0]);
        assert!((big - (1000.0 + 2f64.ln())).abs() < 1e-12);
        let tiny = log_sum_exp(&[-1000.0, -1001.0]);
        assert!((tiny - (-1000.0 + (1.0 + (-1f64).exp()).ln())).abs() < 1e-12);
    }

    #[test]
    fn add_exp_matches_lse() {
        for &(a, b) in &[
            (0.0, -3.0),
            (-700.0, -705.0),
            (12.0, 11.5),
            (f64::NEG_INFINITY, 2.0),
        ] {
            assert!((log_add_exp(a, b) - log_sum_exp(&[a, b])).abs() < 1e-13);
        }
    }

    #[test]
    fn log1m_exp_branches() {
        for &x in &[-1e-10f64, -0.1, -0.7, -1.0] {
            let want = (-x.exp_m1()).ln();
            let got = log1m_exp(x);
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1e-300), "{x}");
        }
        assert!((log1m_exp(-1e-20) - (1e-20f64).ln()).abs() < 1e-12);
        let e = (-30f64).exp();
        let series = -(e + e * e / 2.0 + e * e * e / 3.0);
        assert!((log1m_exp(-30.0) - series).abs() <= 1e-15 * series.abs());
    }
}
