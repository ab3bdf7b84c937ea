// SPDX-License-Identifier: Apache-2.0

//! Command-line driver. Every command renders its complete output before any
//! file is touched, so a failed run leaves no partial files behind.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::chain::ModelParams;
use crate::clt::{endemic_normal, expected_time_clt, q1_normal_approx};
use crate::error::Error;
use crate::output::{Cell, Format, Report, SCHEMA_VERSION};
use crate::sim::{
    conditioned_ensemble, extinction_time_samples, simulate, simulate_restarted, SeedSpec,
    Trajectory,
};
use crate::spectral::quasi_stationary_distribution;
use crate::stationary::{
    log_expected_extinction_time, log_stationary_distribution, ProbabilityVector,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    Threads(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "sis-qsd",
    version,
    about = "Quasi-stationary analysis of the stochastic SIS epidemic"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Population size
    #[arg(long)]
    pub n: Option<usize>,
    /// Infection rate
    #[arg(long, conflicts_with = "r0")]
    pub lambda: Option<f64>,
    /// Reproduction ratio lambda / gamma
    #[arg(long)]
    pub r0: Option<f64>,
    /// Recovery rate
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
}

impl ModelArgs {
    fn lambda_for(&self, n: usize) -> Result<f64, CliError> {
        match (self.lambda, self.r0) {
            (Some(l), None) => Ok(l),
            (None, Some(r0)) => Ok(r0 * self.gamma),
            // with one individual there are no infections, so lambda has no effect
            (None, None) if n == 1 => Ok(self.gamma),
            (None, None) => Err(CliError::Usage(
                "one of --lambda or --r0 is required".into(),
            )),
            (Some(_), Some(_)) => Err(CliError::Usage(
                "--lambda and --r0 are mutually exclusive".into(),
            )),
        }
    }

    fn params_for(&self, n: usize) -> Result<ModelParams, CliError> {
        Ok(ModelParams::new(n, self.lambda_for(n)?, self.gamma)?)
    }

    fn params(&self) -> Result<ModelParams, CliError> {
        let n = self
            .n
            .ok_or_else(|| CliError::Usage("--n is required".into()))?;
        self.params_for(n)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file (standard output if omitted)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Exact,
    Qsd,
    Clt,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Start {
    /// A single infective
    One,
    /// Drawn from the quasi-stationary distribution
    Qsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Plain,
    Restarted,
    Ensemble,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// First replicate stream
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    /// Worker threads for replicate ensembles
    #[arg(long)]
    pub threads: Option<usize>,
}

impl SimArgs {
    fn seed(&self) -> Result<SeedSpec, CliError> {
        let root = self
            .seed
            .ok_or_else(|| CliError::Usage("--seed is required for simulation".into()))?;
        Ok(SeedSpec::new(root, self.stream))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium distribution of the restarted chain
    Stationary {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Quasi-stationary distribution, dominant eigenvalue and E(T_Q)
    Qsd {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Mean time to extinction by one or more methods
    ExtinctionTime {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "exact")]
        method: Vec<Method>,
        /// Initial law for the simulate method
        #[arg(long, value_enum, default_value_t = Start::One)]
        init: Start,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Spectral and normal-approximation q1 across a grid of n
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated population sizes
        #[arg(long, value_delimiter = ',')]
        grid: Vec<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Gillespie trajectories or an endemic-level histogram
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = Mode::Plain)]
        mode: Mode,
        /// Horizon, or snapshot time in ensemble mode
        #[arg(long)]
        t_max: f64,
        /// Initial state for plain mode
        #[arg(long, default_value_t = 1)]
        y0: usize,
        #[command(flatten)]
        sim: SimArgs,
        /// Metadata file (defaults to the output path with a .meta.json extension)
        #[arg(long)]
        sidecar: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

/// A rendered file; `path == None` means standard output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub path: Option<PathBuf>,
    pub contents: String,
}

fn model_params(r: &mut Report, p: &ModelParams) {
    r.param("n", p.n())
        .param("lambda", p.lambda())
        .param("gamma", p.gamma())
        .param("r0", p.r0());
}

fn exp_or_empty(log_value: f64) -> Cell {
    let v = log_value.exp();
    if v.is_finite() {
        Cell::Float(v)
    } else {
        Cell::Empty
    }
}

fn cmd_stationary(model: &ModelArgs) -> Result<Report, CliError> {
    let p = model.params()?;
    let log_pi = log_stationary_distribution(&p);
    let mut r = Report::new("stationary", &["state", "pi_hat", "log_pi_hat"]);
    model_params(&mut r, &p);
    for (k, lp) in log_pi.iter().enumerate() {
        r.row(vec![(k + 1).into(), lp.exp().into(), (*lp).into()]);
    }
    Ok(r)
}

fn cmd_qsd(model: &ModelArgs) -> Result<Report, CliError> {
    let p = model.params()?;
    let s = quasi_stationary_distribution(&p)?;
    let mut r = Report::new("qsd", &["state", "q_tilde", "log_q_tilde"]);
    model_params(&mut r, &p);
    r.scalar("lambda1", s.lambda1)
        .scalar("log_decay_rate", s.log_decay_rate)
        .scalar("ET", exp_or_empty(s.log_expected_time()))
        .scalar("log_ET", s.log_expected_time());
    for (k, (q, lq)) in s.qsd.values().iter().zip(&s.log_qsd).enumerate() {
        r.row(vec![(k + 1).into(), (*q).into(), (*lq).into()]);
    }
    Ok(r)
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Threads(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn cmd_extinction_time(
    model: &ModelArgs,
    methods: &[Method],
    init: Start,
    sim: &SimArgs,
) -> Result<Report, CliError> {
    let p = model.params()?;
    let mut r = Report::new(
        "extinction-time",
        &[
            "method",
            "value",
            "log_value",
            "std_error",
            "replicates",
            "start",
        ],
    );
    model_params(&mut r, &p);
    for m in methods {
        let row = match m {
            Method::Exact => {
                let lv = log_expected_extinction_time(&p);
                vec![
                    "exact".into(),
                    exp_or_empty(lv),
                    lv.into(),
                    Cell::Empty,
                    Cell::Empty,
                    "one".into(),
                ]
            }
            Method::Qsd => {
                let lv = quasi_stationary_distribution(&p)?.log_expected_time();
                vec![
                    "qsd".into(),
                    exp_or_empty(lv),
                    lv.into(),
                    Cell::Empty,
                    Cell::Empty,
                    "qsd".into(),
                ]
            }
            Method::Clt => {
                let t = expected_time_clt(&p)?;
                vec![
                    "clt".into(),
                    Cell::opt(t.value),
                    t.log_value.into(),
                    Cell::Empty,
                    Cell::Empty,
                    "qsd".into(),
                ]
            }
            Method::Simulate => {
                let seed = sim.seed()?;
                let (start, label) = match init {
                    Start::One => (ProbabilityVector::point_mass(p.n(), 1)?, "one"),
                    Start::Qsd => (quasi_stationary_distribution(&p)?.qsd, "qsd"),
                };
                let s = with_threads(sim.threads, || {
                    extinction_time_samples(&p, sim.replicates, seed, &start)
                })??;
                r.param("seed", seed.root_seed)
                    .param("stream", seed.stream_index);
                vec![
                    "simulate".into(),
                    s.mean.into(),
                    s.mean.ln().into(),
                    s.std_error.into(),
                    sim.replicates.into(),
                    label.into(),
                ]
            }
        };
        r.row(row);
    }
    Ok(r)
}

fn cmd_compare(model: &ModelArgs, grid: &[usize]) -> Result<Report, CliError> {
    let grid: Vec<usize> = if grid.is_empty() {
        vec![model
            .n
            .ok_or_else(|| CliError::Usage("--grid or --n is required".into()))?]
    } else {
        grid.to_vec()
    };
    let mut r = Report::new("compare", &["method", "n", "r0", "q1", "log_q1", "log_ET"]);
    for &n in &grid {
        let p = model.params_for(n)?;
        if p.r0() <= 1.0 {
            return Err(Error::Subcritical { r0: p.r0() }.into());
        }
        let s = quasi_stationary_distribution(&p)?;
        let c = q1_normal_approx(&p)?;
        let lg = p.gamma().ln();
        r.row(vec![
            "qsd".into(),
            n.into(),
            p.r0().into(),
            s.qsd.get(1).into(),
            s.log_q1().into(),
            s.log_expected_time().into(),
        ]);
        r.row(vec![
            "clt".into(),
            n.into(),
            p.r0().into(),
            c.value.into(),
            c.log_value.into(),
            (-lg - c.log_value).into(),
        ]);
    }
    let p = model.params_for(grid[0])?;
    r.param("lambda", p.lambda())
        .param("gamma", p.gamma())
        .param("r0", p.r0());
    Ok(r)
}

fn trajectory_report(p: &ModelParams, tr: &Trajectory, mode: &str) -> Report {
    let mut r = Report::new("simulate", &["time", "state", "restart_flag"]);
    model_params(&mut r, p);
    r.param("mode", mode);
    for e in &tr.events {
        r.row(vec![
            e.time.into(),
            e.state.into(),
            u64::from(e.restart).into(),
        ]);
    }
    r
}

fn sidecar_path(explicit: &Option<PathBuf>, output: &Option<PathBuf>) -> Option<PathBuf> {
    explicit
        .clone()
        .or_else(|| output.as_ref().map(|o| o.with_extension("meta.json")))
}

fn pretty(v: serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(&v).expect("metadata serializes");
    s.push('\n');
    s
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    model: &ModelArgs,
    mode: Mode,
    t_max: f64,
    y0: usize,
    sim: &SimArgs,
    format: Format,
) -> Result<(Report, serde_json::Value), CliError> {
    let p = model.params()?;
    let seed = sim.seed()?;
    let base = json!({
        "schema_version": SCHEMA_VERSION,
        "n": p.n(),
        "lambda": p.lambda(),
        "gamma": p.gamma(),
        "r0": p.r0(),
        "seed": seed.root_seed,
        "stream": seed.stream_index,
        "t_max": t_max,
    });
    let mut meta = base.as_object().cloned().unwrap_or_default();
    let report = match mode {
        Mode::Plain | Mode::Restarted => {
            let (tr, label) = if mode == Mode::Plain {
                (simulate(&p, y0, t_max, seed)?, "plain")
            } else {
                (simulate_restarted(&p, t_max, seed)?, "restarted")
            };
            meta.insert("mode".into(), label.into());
            meta.insert("initial_state".into(), tr.initial_state.into());
            meta.insert("t_end".into(), tr.t_end.into());
            meta.insert("final_state".into(), tr.final_state.into());
            meta.insert("events".into(), tr.event_count.into());
            meta.insert("restarts".into(), tr.restart_count.into());
            meta.insert("truncated".into(), tr.truncated.into());
            trajectory_report(&p, &tr, label)
        }
        Mode::Ensemble => {
            let e = with_threads(sim.threads, || {
                conditioned_ensemble(&p, sim.replicates, t_max, seed)
            })??;
            let survivors = e.survivors.len();
            let mut r = Report::new("simulate", &["state", "count", "survivors"]);
            model_params(&mut r, &p);
            r.param("mode", "ensemble")
                .param("t_snap", t_max)
                .param("replicates", sim.replicates);
            for (state, &count) in e.histogram(p.n()).iter().enumerate().skip(1) {
                r.row(vec![state.into(), count.into(), survivors.into()]);
            }
            let normal = endemic_normal(&p)
                .ok()
                .map(|s| json!({"mu_n": s.mu_n, "sigma2_n": s.sigma2_n}));
            meta.insert("mode".into(), "ensemble".into());
            meta.insert("replicates".into(), sim.replicates.into());
            meta.insert("survivors".into(), survivors.into());
            meta.insert("survival_fraction".into(), e.survival_fraction.into());
            meta.insert("mean".into(), e.mean().into());
            meta.insert(
                "variance".into(),
                if survivors > 1 {
                    e.variance().into()
                } else {
                    serde_json::Value::Null
                },
            );
            meta.insert(
                "std_error".into(),
                if survivors > 1 {
                    e.std_error().into()
                } else {
                    serde_json::Value::Null
                },
            );
            meta.insert("normal".into(), normal.unwrap_or(serde_json::Value::Null));
            r
        }
    };
    meta.insert("format".into(), format!("{format:?}").to_lowercase().into());
    Ok((report, serde_json::Value::Object(meta)))
}

/// Runs a parsed command and returns the files it would write.
pub fn execute(cli: &Cli) -> Result<Vec<Output>, CliError> {
    let (report, out, extra) = match &cli.command {
        Command::Stationary { model, out } => (cmd_stationary(model)?, out, None),
        Command::Qsd { model, out } => (cmd_qsd(model)?, out, None),
        Command::ExtinctionTime {
            model,
            method,
            init,
            sim,
            out,
        } => (cmd_extinction_time(model, method, *init, sim)?, out, None),
        Command::Compare { model, grid, out } => (cmd_compare(model, grid)?, out, None),
        Command::Simulate {
            model,
            mode,
            t_max,
            y0,
            sim,
            sidecar,
            out,
        } => {
            let (r, meta) = cmd_simulate(model, *mode, *t_max, *y0, sim, out.format)?;
            let side = sidecar_path(sidecar, &out.output).map(|path| Output {
                path: Some(path),
                contents: pretty(meta),
            });
            (r, out, side)
        }
    };
    let mut files = vec![Output {
        path: out.output.clone(),
        contents: report.render(out.format),
    }];
    files.extend(extra);
    Ok(files)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Executes `cli` and writes its outputs.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    use std::io::Write;
    for f in execute(cli)? {
        match &f.path {
            Some(path) => write_file(path, &f.contents)?,
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(f.contents.as_bytes())
                    .and_then(|_| stdout.flush())
                    .map_err(|source| CliError::Io {
                        path: PathBuf::from("<stdout>"),
                        source,
                    })?;
            }
        }
    }
    Ok(())
}
