// SPDX-License-Identifier: Apache-2.0

//! Browser bindings for the interactive page in `www/`.
//!
//! Each exported function returns a JSON string; the `*_json` functions are
//! the same computations without the wasm boundary.

use serde_json::{json, Value};
use sis_qsd::clt::{endemic_normal, expected_time_clt};
use sis_qsd::sim::{conditioned_ensemble, SeedSpec};
use sis_qsd::special::log_norm_interval;
use sis_qsd::spectral::{decompose, quasi_stationary_distribution};
use sis_qsd::stationary::{log_expected_extinction_time, log_stationary_distribution};
use sis_qsd::{ModelParams, Result};
use wasm_bindgen::prelude::*;

/// Largest population the page offers; keeps every call interactive.
pub const MAX_N: usize = 2000;

/// Spectral decompositions are dense in `n`.
pub const MAX_N_SURVIVAL: usize = 300;

fn params(n: usize, r0: f64, gamma: f64, cap: usize) -> Result<ModelParams> {
    if n > cap {
        return Err(sis_qsd::Error::SizeCap { n, cap });
    }
    ModelParams::from_r0(n, r0, gamma)
}

fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// QSD, restarted-chain equilibrium and the continuity-corrected normal
/// masses over the states `1..=n`, with the three mean extinction times.
pub fn distributions_json(n: usize, r0: f64, gamma: f64) -> Result<Value> {
    let p = params(n, r0, gamma, MAX_N)?;
    let s = quasi_stationary_distribution(&p)?;
    let pi: Vec<f64> = log_stationary_distribution(&p)
        .iter()
        .map(|l| l.exp())
        .collect();
    let (normal, log_et_clt) = match endemic_normal(&p) {
        Ok(e) => {
            let sd = e.sigma2_n.sqrt();
            let mass: Vec<f64> = (1..=n)
                .map(|i| {
                    let x = i as f64;
                    log_norm_interval((x - 0.5 - e.mu_n) / sd, (x + 0.5 - e.mu_n) / sd).exp()
                })
                .collect();
            let et = if n >= 2 {
                expected_time_clt(&p).ok().map(|t| t.log_value)
            } else {
                None
            };
            (
                json!({"mu_n": e.mu_n, "sigma2_n": e.sigma2_n, "mass": mass}),
                et,
            )
        }
        Err(_) => (Value::Null, None),
    };
    Ok(json!({
        "n": n,
        "r0": p.r0(),
        "gamma": p.gamma(),
        "qsd": s.qsd.values(),
        "pi_hat": pi,
        "normal": normal,
        "lambda1": s.lambda1,
        "log_et_qsd": s.log_expected_time(),
        "log_et_exact": log_expected_extinction_time(&p),
        "log_et_clt": log_et_clt.map_or(Value::Null, finite),
    }))
}

/// Survival from a single infective next to the exponential law of a QSD start.
pub fn survival_json(n: usize, r0: f64, gamma: f64, t_max: f64, points: usize) -> Result<Value> {
    let p = params(n, r0, gamma, MAX_N_SURVIVAL)?;
    if !(t_max.is_finite() && t_max > 0.0) || points < 2 {
        return Err(sis_qsd::Error::InvalidParameter(
            "need t_max > 0 and at least 2 points".into(),
        ));
    }
    let r = decompose(&p)?;
    let mut ts = Vec::with_capacity(points);
    let mut from_one = Vec::with_capacity(points);
    let mut from_qsd = Vec::with_capacity(points);
    for k in 0..points {
        let t = t_max * k as f64 / (points - 1) as f64;
        let alive: f64 = (1..=n)
            .map(|j| r.transition_probability(t, 1, j))
            .sum::<Result<f64>>()?;
        ts.push(t);
        from_one.push(alive.min(1.0));
        from_qsd.push(r.survival(t)?);
    }
    Ok(json!({"t": ts, "from_one": from_one, "from_qsd": from_qsd, "lambda1": r.lambda1}))
}

/// Histogram of the surviving replicates at `t_snap`, started from one infective.
pub fn ensemble_json(
    n: usize,
    r0: f64,
    gamma: f64,
    t_snap: f64,
    replicates: usize,
    seed: u64,
) -> Result<Value> {
    let p = params(n, r0, gamma, MAX_N)?;
    let e = conditioned_ensemble(&p, replicates, t_snap, SeedSpec::new(seed, 0))?;
    let normal = endemic_normal(&p).ok().map_or(
        Value::Null,
        |s| json!({"mu_n": s.mu_n, "sigma2_n": s.sigma2_n}),
    );
    let var = if e.survivors.len() > 1 {
        finite(e.variance())
    } else {
        Value::Null
    };
    Ok(json!({
        "counts": &e.histogram(n)[1..],
        "survivors": e.survivors.len(),
        "survival_fraction": e.survival_fraction,
        "mean": e.mean(),
        "variance": var,
        "normal": normal,
    }))
}

fn to_js(v: Result<Value>) -> std::result::Result<String, JsError> {
    v.map(|v| v.to_string())
        .map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn distributions(n: usize, r0: f64, gamma: f64) -> std::result::Result<String, JsError> {
    to_js(distributions_json(n, r0, gamma))
}

#[wasm_bindgen]
pub fn survival(
    n: usize,
    r0: f64,
    gamma: f64,
    t_max: f64,
    points: usize,
) -> std::result::Result<String, JsError> {
    to_js(survival_json(n, r0, gamma, t_max, points))
}

#[wasm_bindgen]
pub fn ensemble(
    n: usize,
    r0: f64,
    gamma: f64,
    t_snap: f64,
    replicates: usize,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(ensemble_json(
        n,
        r0,
        gamma,
        t_snap,
        replicates,
        u64::from(seed),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum(v: &Value) -> f64 {
        v.as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .sum()
    }

    #[test]
    fn distributions_are_normalized() {
        let v = distributions_json(100, 3.0, 1.0).unwrap();
        assert!((sum(&v["qsd"]) - 1.0).abs() < 1e-12);
        assert!((sum(&v["pi_hat"]) - 1.0).abs() < 1e-12);
        let normal_mass = sum(&v["normal"]["mass"]);
        assert!(normal_mass > 0.99 && normal_mass <= 1.0 + 1e-12);
        assert!(v["log_et_clt"].is_number());
    }

    #[test]
    fn subcritical_has_no_normal_curve() {
        let v = distributions_json(30, 0.8, 1.0).unwrap();
        assert!(v["normal"].is_null());
        assert!(v["log_et_clt"].is_null());
    }

    #[test]
    fn survival_curves() {
        let v = survival_json(2, 1.0, 1.0, 5.0, 11).unwrap();
        assert!((v["from_one"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
        let lam = v["lambda1"].as_f64().unwrap();
        assert!((v["from_qsd"][10].as_f64().unwrap() - (5.0 * lam).exp()).abs() < 1e-15);
        let s: Vec<f64> = v["from_one"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        assert!(s.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(survival_json(MAX_N_SURVIVAL + 1, 2.0, 1.0, 1.0, 3).is_err());
    }

    #[test]
    fn ensemble_is_reproducible() {
        let a = ensemble_json(200, 4.0, 1.0, 5.0, 300, 9).unwrap();
        let b = ensemble_json(200, 4.0, 1.0, 5.0, 300, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a["counts"].as_array().unwrap().len(), 200);
        assert!((a["normal"]["mu_n"].as_f64().unwrap() - 150.0).abs() < 1e-9);
    }
}
