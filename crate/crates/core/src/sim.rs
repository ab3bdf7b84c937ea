// SPDX-License-Identifier: Apache-2.0

//! Exact event-driven (Gillespie) simulation of the SIS chain.
//!
//! Every trajectory owns a ChaCha8 generator. A [`SeedSpec`] maps to a
//! generator by `ChaCha8Rng::seed_from_u64(root_seed)` followed by
//! `set_stream(stream_index)`. Ensemble functions give replicate `r` the
//! stream `stream_index + r` (wrapping), so results do not depend on how
//! replicates are scheduled across threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::ModelParams;
use crate::error::{Error, Result};
use crate::stationary::ProbabilityVector;

/// Number of events stored per trajectory before switching to statistics only.
pub const EVENT_LOG_CAP: usize = 10_000_000;

/// Jump budget for a single run-to-absorption replicate.
pub const MAX_ABSORPTION_EVENTS: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeedSpec {
    pub root_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(root_seed: u64, stream_index: u64) -> Self {
        Self {
            root_seed,
            stream_index,
        }
    }

    /// Seed of the `r`-th replicate of an ensemble started from `self`.
    pub fn replicate(&self, r: u64) -> SeedSpec {
        SeedSpec::new(self.root_seed, self.stream_index.wrapping_add(r))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub state: usize,
    /// Set on the instantaneous return to state 1 after an extinction.
    pub restart: bool,
}

/// Per-state summaries, kept for the whole run even when the log is truncated.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyStats {
    /// Time spent in each state `0..=n`.
    pub time_in_state: Vec<f64>,
    /// Completed sojourns per state (censored final sojourn excluded).
    pub sojourns: Vec<u64>,
    pub sojourn_sum: Vec<f64>,
    pub sojourn_sum_sq: Vec<f64>,
}

impl OccupancyStats {
    fn new(n: usize) -> Self {
        Self {
            time_in_state: vec![0.0; n + 1],
            sojourns: vec![0; n + 1],
            sojourn_sum: vec![0.0; n + 1],
            sojourn_sum_sq: vec![0.0; n + 1],
        }
    }

    fn record(&mut self, state: usize, dt: f64, completed: bool) {
        self.time_in_state[state] += dt;
        if completed {
            self.sojourns[state] += 1;
            self.sojourn_sum[state] += dt;
            self.sojourn_sum_sq[state] += dt * dt;
        }
    }

    /// Mean completed sojourn in `state` and its standard error.
    pub fn mean_sojourn(&self, state: usize) -> Option<(f64, f64)> {
        let k = *self.sojourns.get(state)?;
        if k < 2 {
            return None;
        }
        let kf = k as f64;
        let mean = self.sojourn_sum[state] / kf;
        let var = (self.sojourn_sum_sq[state] / kf - mean * mean).max(0.0) * kf / (kf - 1.0);
        Some((mean, (var / kf).sqrt()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n: usize,
    pub initial_state: usize,
    /// Jumps in time order. A restart appears as an extinction row followed by
    /// a flagged row at the same time with state 1.
    pub events: Vec<Event>,
    pub t_end: f64,
    pub final_state: usize,
    pub restarted: bool,
    pub restart_count: u64,
    /// Restart instants, subject to the same cap as `events`.
    pub restart_times: Vec<f64>,
    pub event_count: u64,
    pub truncated: bool,
    pub stats: OccupancyStats,
}

impl Trajectory {
    pub fn absorbed(&self) -> bool {
        !self.restarted && self.final_state == 0
    }

    /// Restarts per unit time.
    pub fn restart_rate(&self) -> f64 {
        self.restart_count as f64 / self.t_end
    }

    /// Writes one `time,state,restart_flag` row per stored event.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,state,restart_flag")?;
        for e in &self.events {
            writeln!(w, "{:?},{},{}", e.time, e.state, u8::from(e.restart))?;
        }
        Ok(())
    }
}

struct Sim<'a> {
    p: &'a ModelParams,
    rng: ChaCha8Rng,
}

impl<'a> Sim<'a> {
    /// Holding time and next state from `i >= 1`.
    fn step(&mut self, i: usize) -> (f64, usize) {
        let b = self.p.birth(i);
        let d = self.p.death(i);
        let total = b + d;
        let e: f64 = self.rng.sample(Exp1);
        let u: f64 = self.rng.random();
        let next = if u * total < b { i + 1 } else { i - 1 };
        (e / total, next)
    }

    fn draw_state(&mut self, init: &ProbabilityVector) -> usize {
        // u in (0, 1]; first index whose cumulative sum reaches u
        let u = 1.0 - self.rng.random::<f64>();
        let mut acc = 0.0;
        let mut last = 1;
        for (k, &v) in init.values().iter().enumerate() {
            if v > 0.0 {
                last = k + 1;
            }
            acc += v;
            if acc >= u && v > 0.0 {
                return k + 1;
            }
        }
        last
    }

    fn run(&mut self, y0: usize, t_max: f64, restart: bool) -> Trajectory {
        let n = self.p.n();
        let mut tr = Trajectory {
            n,
            initial_state: y0,
            events: Vec::new(),
            t_end: t_max,
            final_state: y0,
            restarted: restart,
            restart_count: 0,
            restart_times: Vec::new(),
            event_count: 0,
            truncated: false,
            stats: OccupancyStats::new(n),
        };
        let mut t = 0.0;
        let mut i = y0;
        loop {
            let (dt, next) = self.step(i);
            if t + dt > t_max {
                tr.stats.record(i, t_max - t, false);
                break;
            }
            t += dt;
            tr.stats.record(i, dt, true);
            push(
                &mut tr,
                Event {
                    time: t,
                    state: next,
                    restart: false,
                },
            );
            i = next;
            if i == 0 {
                if !restart {
                    tr.t_end = t;
                    break;
                }
                i = 1;
                tr.restart_count += 1;
                if tr.restart_times.len() < EVENT_LOG_CAP {
                    tr.restart_times.push(t);
                }
                push(
                    &mut tr,
                    Event {
                        time: t,
                        state: 1,
                        restart: true,
                    },
                );
            }
        }
        tr.final_state = i;
        tr
    }

    /// State at `t_snap`, or `None` if absorbed first.
    fn state_at(&mut self, y0: usize, t_snap: f64) -> Option<usize> {
        let mut t = 0.0;
        let mut i = y0;
        loop {
            let (dt, next) = self.step(i);
            t += dt;
            if t > t_snap {
                return Some(i);
            }
            if next == 0 {
                return None;
            }
            i = next;
        }
    }

    fn absorption_time(&mut self, y0: usize) -> Result<f64> {
        let mut t = 0.0;
        let mut i = y0;
        let mut jumps = 0u64;
        while i > 0 {
            let (dt, next) = self.step(i);
            t += dt;
            i = next;
            jumps += 1;
            if jumps >= MAX_ABSORPTION_EVENTS {
                return Err(Error::NoConvergence {
                    iterations: jumps as usize,
                });
            }
        }
        Ok(t)
    }
}

fn push(tr: &mut Trajectory, e: Event) {
    tr.event_count += 1;
    if tr.events.len() < EVENT_LOG_CAP {
        tr.events.push(e);
    } else {
        tr.truncated = true;
    }
}

fn check_horizon(what: &'static str, t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: t,
            domain: "finite and > 0",
        })
    }
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates == 0 {
        return Err(Error::InvalidParameter(
            "replicates must be at least 1".into(),
        ));
    }
    Ok(())
}

fn check_init(p: &ModelParams, init: &ProbabilityVector) -> Result<()> {
    if init.len() != p.n() {
        return Err(Error::InvalidDistribution(format!(
            "initial law has {} entries, expected {}",
            init.len(),
            p.n()
        )));
    }
    Ok(())
}

fn map_replicates<T, F>(replicates: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..replicates as u64).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..replicates as u64).map(f).collect()
    }
}

/// Plain process from `y0`, stopped at absorption or `t_max`.
pub fn simulate(p: &ModelParams, y0: usize, t_max: f64, seed: SeedSpec) -> Result<Trajectory> {
    if y0 < 1 || y0 > p.n() {
        return Err(Error::StateOutOfRange {
            state: y0,
            lo: 1,
            hi: p.n(),
        });
    }
    check_horizon("t_max", t_max)?;
    Ok(Sim { p, rng: seed.rng() }.run(y0, t_max, false))
}

/// Restarted process started at state 1 and run for `t_max`.
pub fn simulate_restarted(p: &ModelParams, t_max: f64, seed: SeedSpec) -> Result<Trajectory> {
    check_horizon("t_max", t_max)?;
    Ok(Sim { p, rng: seed.rng() }.run(1, t_max, true))
}

/// Time-weighted fraction of the run spent in each of the states `1..=n`.
pub fn empirical_occupancy(tr: &Trajectory) -> Result<ProbabilityVector> {
    let occ = &tr.stats.time_in_state[1..];
    let total: f64 = occ.iter().sum();
    if tr.t_end.is_nan() || tr.t_end <= 0.0 || total.is_nan() || total <= 0.0 {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let mut v: Vec<f64> = occ.iter().map(|t| t / total).collect();
    // put the rounding residue on the largest entry
    let s: f64 = v.iter().sum();
    let k = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    v[k] += 1.0 - s;
    ProbabilityVector::new(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub replicates: usize,
    pub t_snap: f64,
    /// States of the surviving replicates, in replicate order.
    pub survivors: Vec<usize>,
    pub survival_fraction: f64,
}

impl Ensemble {
    pub fn mean(&self) -> f64 {
        self.survivors.iter().map(|&s| s as f64).sum::<f64>() / self.survivors.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let k = self.survivors.len() as f64;
        self.survivors
            .iter()
            .map(|&s| (s as f64 - m).powi(2))
            .sum::<f64>()
            / (k - 1.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.survivors.len() as f64).sqrt()
    }

    /// Counts for states `0..=n`.
    pub fn histogram(&self, n: usize) -> Vec<u64> {
        let mut h = vec![0u64; n + 1];
        for &s in &self.survivors {
            h[s] += 1;
        }
        h
    }
}

/// States at `t_snap` of the replicates started at state 1 that are still alive.
pub fn conditioned_ensemble(
    p: &ModelParams,
    replicates: usize,
    t_snap: f64,
    seed: SeedSpec,
) -> Result<Ensemble> {
    let start = ProbabilityVector::point_mass(p.n(), 1)?;
    conditioned_ensemble_from(p, replicates, t_snap, seed, &start)
}

/// As [`conditioned_ensemble`] with initial states drawn from `init`.
pub fn conditioned_ensemble_from(
    p: &ModelParams,
    replicates: usize,
    t_snap: f64,
    seed: SeedSpec,
    init: &ProbabilityVector,
) -> Result<Ensemble> {
    check_replicates(replicates)?;
    check_horizon("t_snap", t_snap)?;
    check_init(p, init)?;
    let states = map_replicates(replicates, |r| {
        let mut sim = Sim {
            p,
            rng: seed.replicate(r).rng(),
        };
        let y0 = sim.draw_state(init);
        sim.state_at(y0, t_snap)
    });
    let survivors: Vec<usize> = states.into_iter().flatten().collect();
    if survivors.is_empty() {
        return Err(Error::NoSurvivors { t_snap, replicates });
    }
    Ok(Ensemble {
        replicates,
        t_snap,
        survival_fraction: survivors.len() as f64 / replicates as f64,
        survivors,
    })
}

/// Fraction of replicates alive at `t_snap`; unlike the ensemble, zero is a value.
pub fn survival_fraction(
    p: &ModelParams,
    replicates: usize,
    t_snap: f64,
    seed: SeedSpec,
) -> Result<f64> {
    match conditioned_ensemble(p, replicates, t_snap, seed) {
        Ok(e) => Ok(e.survival_fraction),
        Err(Error::NoSurvivors { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionSample {
    pub times: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
}

impl ExtinctionSample {
    fn from_times(times: Vec<f64>) -> Self {
        let k = times.len() as f64;
        let mean = times.iter().sum::<f64>() / k;
        let var = if times.len() > 1 {
            times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        Self {
            times,
            mean,
            std_error: (var / k).sqrt(),
        }
    }
}

/// Absorption time of each replicate, started from a state drawn from `init`.
pub fn extinction_time_samples(
    p: &ModelParams,
    replicates: usize,
    seed: SeedSpec,
    init: &ProbabilityVector,
) -> Result<ExtinctionSample> {
    check_replicates(replicates)?;
    check_init(p, init)?;
    let times = map_replicates(replicates, |r| {
        let mut sim = Sim {
            p,
            rng: seed.replicate(r).rng(),
        };
        let y0 = sim.draw_state(init);
        sim.absorption_time(y0)
    });
    let times = times.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(ExtinctionSample::from_times(times))
}
