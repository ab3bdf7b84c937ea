// SPDX-License-Identifier: Apache-2.0

//! Standard normal density and distribution function in log space.
//!
//! For `|z| <= 8` the CDF comes from `erfc`. Beyond that the lower tail is
//! `φ(z) · R(−z)` with the Mills ratio `R` evaluated by its continued
//! fraction, which stays accurate where `erfc` underflows.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;

use crate::logspace::log1m_exp;

const TAIL: f64 = 8.0;

/// `log φ(z)`.
pub fn log_norm_pdf(z: f64) -> f64 {
    -0.5 * z * z - 0.5 * (2.0 * PI).ln()
}

/// Mills ratio `Φ(−x)/φ(x)` for `x >= TAIL`, continued fraction
/// `1/(x + 1/(x + 2/(x + 3/(x + …))))` evaluated by modified Lentz.
fn mills_ratio(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// `log Φ(z)`.
pub fn log_norm_cdf(z: f64) -> f64 {
    if z < -TAIL {
        log_norm_pdf(z) + mills_ratio(-z).ln()
    } else if z <= TAIL {
        (0.5 * erfc(-z / SQRT_2)).ln()
    } else {
        log1m_exp(log_norm_sf(z))
    }
}

/// `log(1 − Φ(z))`.
pub fn log_norm_sf(z: f64) -> f64 {
    log_norm_cdf(-z)
}

/// `log(Φ(hi) − Φ(lo))` for `lo < hi`, choosing the tail that avoids
/// cancellation.
pub fn log_norm_interval(lo: f64, hi: f64) -> f64 {
    assert!(lo < hi, "empty interval [{lo}, {hi}]");
    if lo > 0.0 {
        // both in the upper tail: Φc(lo) − Φc(hi)
        let a = log_norm_sf(lo);
        let b = log_norm_sf(hi);
        a + log1m_exp(b - a)
    } else if hi < 0.0 {
        let a = log_norm_cdf(hi);
        let b = log_norm_cdf(lo);
        a + log1m_exp(b - a)
    } else {
        // straddles 0: 1 − Φc(hi) − Φ(lo)
        let outside = log_norm_sf(hi).exp() + log_norm_cdf(lo).exp();
        (-outside).ln_1p()
    }
}
