// SPDX-License-Identifier: Apache-2.0

//! Normal (diffusion) approximation of the endemic level.
//!
//! With infected fraction `y`, the SIS chain has drift `F(y) = λy(1−y) − γy`
//! and diffusion `G(y) = λy(1−y) + γy`. Linearising at the endemic point
//! `ŷ = 1 − 1/R₀` gives the scaled variance ODE
//! `dσ²/dt = G(ŷ) + 2 F'(ŷ) σ²`, `σ²(0) = 0`, whose limit `γ/λ` solves the
//! scalar Lyapunov balance. The endemic count is then approximately
//! `N((1 − 1/R₀) n, n/R₀)` and a continuity correction over 1..=n turns
//! that into an estimate of `q̃_1` and `E(T_Q)`.
//!
//! Everything here requires `R₀ > 1`.

use serde::Serialize;

use crate::chain::ModelParams;
use crate::error::{Error, Result};
use crate::special::{log_norm_interval, log_norm_pdf};

fn check_fraction(y: f64) -> Result<()> {
    if (0.0..=1.0).contains(&y) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "y",
            value: y,
            domain: "0 <= y <= 1",
        })
    }
}

fn check_supercritical(p: &ModelParams) -> Result<()> {
    if p.r0() > 1.0 {
        Ok(())
    } else {
        Err(Error::Subcritical { r0: p.r0() })
    }
}

/// `F(y) = λy(1−y) − γy`.
pub fn drift(y: f64, p: &ModelParams) -> Result<f64> {
    check_fraction(y)?;
    Ok(p.lambda() * y * (1.0 - y) - p.gamma() * y)
}

/// `F'(y) = λ(1 − 2y) − γ`.
pub fn drift_derivative(y: f64, p: &ModelParams) -> Result<f64> {
    check_fraction(y)?;
    Ok(p.lambda() * (1.0 - 2.0 * y) - p.gamma())
}

/// `G(y) = λy(1−y) + γy`.
pub fn diffusion(y: f64, p: &ModelParams) -> Result<f64> {
    check_fraction(y)?;
    Ok(p.lambda() * y * (1.0 - y) + p.gamma() * y)
}

/// Endemic equilibrium and its normal approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndemicSummary {
    pub y_hat: f64,
    pub d_f_hat: f64,
    pub g_hat: f64,
    pub sigma2_inf: f64,
    pub mu_n: f64,
    pub sigma2_n: f64,
}

impl EndemicSummary {
    /// `−G(ŷ) − 2F'(ŷ)σ²_∞`, zero up to rounding.
    pub fn lyapunov_residual(&self) -> f64 {
        -self.g_hat - 2.0 * self.d_f_hat * self.sigma2_inf
    }
}

/// `Y_n ≈ N((1 − 1/R₀) n, n/R₀)`.
pub fn endemic_normal(p: &ModelParams) -> Result<EndemicSummary> {
    check_supercritical(p)?;
    let (lambda, gamma) = (p.lambda(), p.gamma());
    let r0 = p.r0();
    let n = p.n() as f64;
    let y_hat = 1.0 - 1.0 / r0;
    Ok(EndemicSummary {
        y_hat,
        d_f_hat: -(lambda - gamma),
        g_hat: 2.0 * (gamma / lambda) * (lambda - gamma),
        sigma2_inf: gamma / lambda,
        mu_n: y_hat * n,
        sigma2_n: n / r0,
    })
}

/// Closed form `σ²(t) = (γ/λ)(1 − e^{−2(λ−γ)t})`.
pub fn variance_at(t: f64, p: &ModelParams) -> Result<f64> {
    check_supercritical(p)?;
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain {
            what: "t",
            value: t,
            domain: "t >= 0",
        });
    }
    let k = p.lambda() - p.gamma();
    Ok(-(p.gamma() / p.lambda()) * (-2.0 * k * t).exp_m1())
}

/// RK4 integration of the variance ODE on `[0, t_max]` with `steps` equal
/// steps, coefficients frozen at the endemic equilibrium. Returns
/// `steps + 1` samples `(t, σ²(t))`.
pub fn integrate_variance_ode(
    t_max: f64,
    p: &ModelParams,
    steps: usize,
) -> Result<Vec<(f64, f64)>> {
    check_supercritical(p)?;
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::Domain {
            what: "t_max",
            value: t_max,
            domain: "t_max > 0",
        });
    }
    if steps < 10 {
        return Err(Error::InvalidParameter(format!(
            "steps must be >= 10 (got {steps})"
        )));
    }
    let y_hat = 1.0 - 1.0 / p.r0();
    let a = drift_derivative(y_hat, p)?;
    let g = diffusion(y_hat, p)?;
    let rhs = |s: f64| g + 2.0 * a * s;

    let h = t_max / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = 0.0;
    out.push((0.0, s));
    for k in 1..=steps {
        let k1 = rhs(s);
        let k2 = rhs(s + 0.5 * h * k1);
        let k3 = rhs(s + 0.5 * h * k2);
        let k4 = rhs(s + h * k3);
        s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push((k as f64 * h, s));
    }
    Ok(out)
}

/// Continuity-corrected normal estimate of `q̃_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Q1Approx {
    /// May underflow to zero.
    pub value: f64,
    pub log_value: f64,
}

/// `q̃_1 ≈ (1/σ_n) φ((1 − μ_n)/σ_n) / [Φ((n + ½ − μ_n)/σ_n) − Φ((½ − μ_n)/σ_n)]`.
pub fn q1_normal_approx(p: &ModelParams) -> Result<Q1Approx> {
    let e = endemic_normal(p)?;
    let n = p.n() as f64;
    let sd = e.sigma2_n.sqrt();
    let z1 = (1.0 - e.mu_n) / sd;
    let lo = (0.5 - e.mu_n) / sd;
    let hi = (n + 0.5 - e.mu_n) / sd;
    let log_value = log_norm_pdf(z1) - sd.ln() - log_norm_interval(lo, hi);
    Ok(Q1Approx {
        value: log_value.exp(),
        log_value,
    })
}

/// Normal-approximation estimate of the mean extinction time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeApprox {
    /// `None` when the value overflows.
    pub value: Option<f64>,
    pub log_value: f64,
}

impl TimeApprox {
    /// The natural value, or [`Error::Overflow`] carrying the log.
    pub fn finite(&self) -> Result<f64> {
        self.value.ok_or(Error::Overflow {
            log_value: self.log_value,
        })
    }
}

/// `E(T_Q) ≈ 1/(γ q̃_1)` with the normal estimate of `q̃_1`. Rejects
/// `n = 1`, where a normal law over a single state is meaningless.
pub fn expected_time_clt(p: &ModelParams) -> Result<TimeApprox> {
    if p.n() < 2 {
        return Err(Error::InvalidParameter(
            "normal approximation needs n >= 2".into(),
        ));
    }
    let q = q1_normal_approx(p)?;
    let log_value = -p.gamma().ln() - q.log_value;
    let v = log_value.exp();
    Ok(TimeApprox {
        value: v.is_finite().then_some(v),
        log_value,
    })
}
