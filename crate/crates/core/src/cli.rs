//! Command-line driver: JSON config in, deterministic CSV out.
//!
//! ```text
//! enc-relay <command> --config <path> [--out <path>] [--seed N] [--strict]
//! ```
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid config (one JSON error
//! line on stderr), 3 strict mode and every requested point infeasible.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::arrivals::ArrivalModel;
use crate::model::{analyze, EncPolicy, ModelError};
use crate::optimizer::{
    energy_threshold, lossy_policy, optimal_policy, tradeoff_curve, CurvePoint, Delay,
    EnergyBudget, LossyVariant, OptimizerError,
};
use crate::simulator::{self, overflow_experiment, BufferMode, SimConfig, SimError, SimMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Analyze,
    Optimize,
    Tradeoff,
    Simulate,
    Overflow,
    ReproduceFig,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Optimize => "optimize",
            Command::Tradeoff => "tradeoff",
            Command::Simulate => "simulate",
            Command::Overflow => "overflow",
            Command::ReproduceFig => "reproduce-fig",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "enc-relay",
    version,
    about = "Delay-energy analysis and simulation of ENC two-way relaying"
)]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (a directory for reproduce-fig); overrides `output_path`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exit with status 3 when every requested point is infeasible.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("every requested point is infeasible")]
    InfeasibleOnly,
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::InfeasibleOnly => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Validation(_) => "validation",
            CliError::InfeasibleOnly => "infeasible",
        }
    }

    /// Single-line JSON rendering for stderr.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

fn invalid(msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(msg.to_string())
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        invalid(e)
    }
}

impl From<OptimizerError> for CliError {
    fn from(e: OptimizerError) -> Self {
        invalid(e)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        invalid(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn default_precision() -> usize {
    9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default = "default_precision")]
    pub csv_precision: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: Value,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        if config.csv_precision == 0 || config.csv_precision > 17 {
            return Err(invalid(format!(
                "csv_precision must lie in 1..=17, got {}",
                config.csv_precision
            )));
        }
        Ok(config)
    }

    fn params<P: for<'de> Deserialize<'de>>(&self) -> Result<P, CliError> {
        let value = if self.params.is_null() {
            Value::Object(Default::default())
        } else {
            self.params.clone()
        };
        serde_json::from_value(value).map_err(|e| invalid(format!("params: {e}")))
    }
}

/// How a policy is named in a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    Explicit {
        g: Vec<f64>,
        f: Vec<f64>,
    },
    Conventional {
        capacity: usize,
    },
    Fcfs {
        capacity: usize,
    },
    AlwaysSend {
        capacity: usize,
    },
    /// Loss-free optimum for a normalized energy budget.
    Optimal {
        e_max: f64,
        capacity: usize,
    },
    Lossy {
        xi: f64,
        capacity: usize,
        #[serde(default)]
        variant: LossyVariant,
    },
}

impl PolicySpec {
    /// `lambda` is the per-source rate the optimal policy is built for.
    pub fn resolve(&self, lambda: f64) -> Result<EncPolicy<f64>, CliError> {
        Ok(match self {
            PolicySpec::Explicit { g, f } => EncPolicy::new(g.clone(), f.clone())?,
            PolicySpec::Conventional { capacity } => EncPolicy::conventional(*capacity)?,
            PolicySpec::Fcfs { capacity } => EncPolicy::fcfs(*capacity)?,
            PolicySpec::AlwaysSend { capacity } => EncPolicy::always_send(*capacity)?,
            PolicySpec::Optimal { e_max, capacity } => {
                optimal_policy(e_max, *capacity, &lambda)?.policy
            }
            PolicySpec::Lossy {
                xi,
                capacity,
                variant,
            } => lossy_policy(xi, *capacity, *variant)?,
        })
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeParams {
    pub policy: PolicySpec,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeParams {
    pub e_max: f64,
    pub capacity: usize,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub xi_allowed: f64,
}

/// Either an explicit list or an inclusive `start..=stop` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        match self {
            Grid::Values(v) if v.is_empty() => Err(invalid("grid is empty")),
            Grid::Values(v) => Ok(v.clone()),
            Grid::Range { start, stop, step } => {
                if !(step.is_finite() && *step > 0.0 && start.is_finite() && stop >= start) {
                    return Err(invalid(format!(
                        "grid needs finite start <= stop and step > 0, got {start}..{stop} step {step}"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                if n > 1_000_000 {
                    return Err(invalid("grid has more than 10^6 points"));
                }
                Ok((0..=n).map(|i| start + i as f64 * step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffParams {
    pub capacity: usize,
    #[serde(default = "one")]
    pub lambda: f64,
    pub grid: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub policy: PolicySpec,
    /// Symmetric Poisson sources; alternative to `arrivals_a`/`arrivals_b`.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub arrivals_a: Option<ArrivalModel>,
    #[serde(default)]
    pub arrivals_b: Option<ArrivalModel>,
    pub horizon: f64,
    #[serde(default)]
    pub warmup: Option<f64>,
    #[serde(default = "one_rep")]
    pub replications: usize,
    #[serde(default)]
    pub buffer: BufferMode,
}

fn one_rep() -> usize {
    1
}

impl SimulateParams {
    pub fn to_config(&self, seed: u64) -> Result<SimConfig, CliError> {
        let (a, b) = match (self.lambda, self.arrivals_a, self.arrivals_b) {
            (Some(l), None, None) => {
                let m = ArrivalModel::poisson(l).map_err(invalid)?;
                (m, m)
            }
            (None, Some(a), Some(b)) => (a, b),
            _ => {
                return Err(invalid(
                    "give either `lambda` or both `arrivals_a` and `arrivals_b`",
                ))
            }
        };
        a.validate().map_err(invalid)?;
        b.validate().map_err(invalid)?;
        let lambda = 0.5 * (a.long_term_rate() + b.long_term_rate());
        let policy = self.policy.resolve(lambda)?;
        let config = SimConfig {
            policy,
            arrivals_a: a,
            arrivals_b: b,
            horizon: self.horizon,
            warmup: self
                .warmup
                .unwrap_or_else(|| simulator::default_warmup(lambda, self.horizon)),
            seed,
            replications: self.replications,
            buffer: self.buffer,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(u64),
    Many(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverflowParams {
    pub q_total: u64,
    pub capacity: OneOrMany,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceParams {
    pub figure: u8,
    #[serde(default)]
    pub capacity: Option<usize>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub replications: Option<usize>,
    /// Trajectory sampling period (figure 4).
    #[serde(default)]
    pub sample_period: Option<f64>,
    /// Largest buffer in the loss sweep (figure 6).
    #[serde(default)]
    pub max_capacity: Option<usize>,
    /// Number of loss levels (figure 5).
    #[serde(default)]
    pub points: Option<usize>,
    /// Budget grid step (figure 7).
    #[serde(default)]
    pub step: Option<f64>,
    /// Offset above each breakpoint for the simulated points (figure 7).
    #[serde(default)]
    pub delta: Option<f64>,
}

/// A produced CSV: file name (for bundles) and bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: Option<String>,
    pub bytes: Vec<u8>,
}

/// Fixed-point rendering at `precision` digits with trailing zeros trimmed,
/// `-0` folded to `0` and NaN rendered empty.
pub fn format_number(x: f64, precision: usize) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let mut s = format!("{:.*}", precision, x);
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

struct Table {
    precision: usize,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(precision: usize, header: &[&str]) -> Result<Self, CliError> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { precision, writer })
    }

    fn num(&self, x: f64) -> String {
        format_number(x, self.precision)
    }

    fn vec_json(&self, v: &[f64]) -> String {
        let items: Vec<String> = v.iter().map(|x| self.num(*x)).collect();
        format!("[{}]", items.join(","))
    }

    fn row(&mut self, fields: Vec<String>) -> Result<(), CliError> {
        self.writer.write_record(&fields)?;
        Ok(())
    }

    fn finish(self, name: Option<&str>) -> Result<Artifact, CliError> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| CliError::Io(e.to_string()))?;
        Ok(Artifact {
            name: name.map(str::to_owned),
            bytes,
        })
    }
}

pub const ANALYZE_HEADER: &[&str] = &[
    "K",
    "lambda",
    "epsilon",
    "delay",
    "loss",
    "energy",
    "normalized_energy",
];

pub const OPTIMIZE_HEADER: &[&str] = &[
    "e_max",
    "K",
    "lambda",
    "xi_allowed",
    "feasible",
    "delay",
    "k_star",
    "g",
    "f",
];

pub const TRADEOFF_HEADER: &[&str] = &["e_max", "delay", "k_star", "feasible", "g", "f"];

pub const SIMULATE_HEADER: &[&str] = &[
    "replication",
    "seed",
    "arrivals",
    "coded_tx",
    "uncoded_tx",
    "drops",
    "final_queue",
    "mean_delay",
    "delay_per_arrival",
    "loss",
    "normalized_energy",
    "mean_delay_se",
    "delay_per_arrival_se",
    "loss_se",
    "normalized_energy_se",
];

pub const OVERFLOW_HEADER: &[&str] =
    &["q_total", "K", "trials", "empirical", "std_error", "theory"];

pub const TRAJECTORY_HEADER: &[&str] = &["time", "backlog"];

pub const FIG5_THEORY_HEADER: &[&str] = &["xi", "g_K"];
pub const FIG5_SIM_HEADER: &[&str] = &["xi", "g_K", "loss", "loss_se", "normalized_energy"];
pub const FIG6_THEORY_HEADER: &[&str] = &["K", "loss"];
pub const FIG6_SIM_HEADER: &[&str] = &["K", "loss", "loss_se", "arrivals"];
pub const FIG7_THEORY_HEADER: &[&str] = &["e_max", "delay", "k_star", "feasible"];
pub const FIG7_SIM_HEADER: &[&str] = &[
    "e_max",
    "theory_delay",
    "mean_delay",
    "mean_delay_se",
    "normalized_energy",
    "normalized_energy_se",
];

fn strict_check(strict: bool, any_feasible: bool) -> Result<(), CliError> {
    if strict && !any_feasible {
        Err(CliError::InfeasibleOnly)
    } else {
        Ok(())
    }
}

pub fn cmd_analyze(config: &RunConfig) -> Result<Artifact, CliError> {
    let p: AnalyzeParams = config.params()?;
    let policy = p.policy.resolve(p.lambda)?;
    let m = analyze(&policy, p.lambda, p.epsilon)?;
    let mut t = Table::new(config.csv_precision, ANALYZE_HEADER)?;
    let row = vec![
        policy.capacity().to_string(),
        t.num(p.lambda),
        t.num(p.epsilon),
        t.num(m.delay),
        t.num(m.loss),
        t.num(m.energy),
        t.num(m.normalized_energy),
    ];
    t.row(row)?;
    t.finish(None)
}

pub fn cmd_optimize(config: &RunConfig, strict: bool) -> Result<Artifact, CliError> {
    let p: OptimizeParams = config.params()?;
    let budget = EnergyBudget::new(p.e_max, p.capacity, p.lambda, p.xi_allowed)?;
    let mut t = Table::new(config.csv_precision, OPTIMIZE_HEADER)?;
    let mut row = vec![
        t.num(p.e_max),
        p.capacity.to_string(),
        t.num(p.lambda),
        t.num(p.xi_allowed),
    ];
    let feasible = match budget.optimal_delay()? {
        Delay::Infeasible => {
            row.extend([
                "0".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]);
            false
        }
        Delay::Finite(d) => {
            let (k_star, policy) = if p.xi_allowed == 0.0 {
                let point = optimal_policy(&p.e_max, p.capacity, &p.lambda)?;
                (point.k_star.to_string(), point.policy)
            } else {
                (String::new(), budget.policy()?)
            };
            row.extend([
                "1".into(),
                t.num(d),
                k_star,
                t.vec_json(policy.send_probabilities()),
                t.vec_json(policy.service_rates()),
            ]);
            true
        }
    };
    t.row(row)?;
    strict_check(strict, feasible)?;
    t.finish(None)
}

pub fn cmd_tradeoff(config: &RunConfig, strict: bool) -> Result<Artifact, CliError> {
    let p: TradeoffParams = config.params()?;
    let grid = p.grid.points()?;
    let curve = tradeoff_curve(p.capacity, &p.lambda, &grid)?;
    let mut t = Table::new(config.csv_precision, TRADEOFF_HEADER)?;
    let mut any_feasible = false;
    for point in &curve {
        let row = match point {
            CurvePoint::Feasible(q) => {
                any_feasible = true;
                vec![
                    t.num(q.e_max),
                    t.num(q.delay),
                    q.k_star.to_string(),
                    "1".into(),
                    t.vec_json(q.policy.send_probabilities()),
                    t.vec_json(q.policy.service_rates()),
                ]
            }
            CurvePoint::Infeasible { e_max } => vec![
                t.num(*e_max),
                String::new(),
                String::new(),
                "0".into(),
                String::new(),
                String::new(),
            ],
        };
        t.row(row)?;
    }
    strict_check(strict, any_feasible)?;
    t.finish(None)
}

fn simulation_table(precision: usize, m: &SimMetrics) -> Result<Table, CliError> {
    let mut t = Table::new(precision, SIMULATE_HEADER)?;
    for (i, r) in m.replications.iter().enumerate() {
        let c = r.counts;
        let mut row = vec![
            i.to_string(),
            r.seed.to_string(),
            c.arrivals.to_string(),
            c.coded_tx.to_string(),
            c.uncoded_tx.to_string(),
            c.drops.to_string(),
            c.final_queue.to_string(),
            t.num(r.mean_delay),
            t.num(r.delay_per_arrival),
            t.num(r.loss_rate),
            t.num(r.normalized_energy),
        ];
        row.extend(std::iter::repeat_n(String::new(), 4));
        t.row(row)?;
    }
    let c = m.counts;
    let mut row = vec![
        "aggregate".into(),
        String::new(),
        c.arrivals.to_string(),
        c.coded_tx.to_string(),
        c.uncoded_tx.to_string(),
        c.drops.to_string(),
        c.final_queue.to_string(),
        t.num(m.mean_delay),
        t.num(m.delay_per_arrival),
        t.num(m.loss_rate),
        t.num(m.normalized_energy),
    ];
    match m.std_errors {
        Some(se) => row.extend([
            t.num(se.mean_delay),
            t.num(se.delay_per_arrival),
            t.num(se.loss_rate),
            t.num(se.normalized_energy),
        ]),
        None => row.extend(std::iter::repeat_n(String::new(), 4)),
    }
    t.row(row)?;
    Ok(t)
}

pub fn cmd_simulate(config: &RunConfig) -> Result<Artifact, CliError> {
    let p: SimulateParams = config.params()?;
    let sim = p.to_config(config.seed)?;
    let m = simulator::run(&sim)?;
    simulation_table(config.csv_precision, &m)?.finish(None)
}

pub fn cmd_overflow(config: &RunConfig) -> Result<Artifact, CliError> {
    let p: OverflowParams = config.params()?;
    let capacities = match &p.capacity {
        OneOrMany::One(k) => vec![*k],
        OneOrMany::Many(ks) if ks.is_empty() => return Err(invalid("capacity list is empty")),
        OneOrMany::Many(ks) => ks.clone(),
    };
    let mut t = Table::new(config.csv_precision, OVERFLOW_HEADER)?;
    for (i, k) in capacities.iter().enumerate() {
        let seed = crate::rng::replication_seed(config.seed, i as u64);
        let e = overflow_experiment(p.q_total, *k, p.trials, seed)?;
        let row = vec![
            e.q_total.to_string(),
            e.capacity.to_string(),
            e.trials.to_string(),
            t.num(e.empirical),
            t.num(e.std_error),
            t.num(e.theory),
        ];
        t.row(row)?;
    }
    t.finish(None)
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(invalid(format!("{name} must be positive, got {x}")))
    }
}

fn at_least_one(name: &str, n: usize) -> Result<usize, CliError> {
    if n >= 1 {
        Ok(n)
    } else {
        Err(invalid(format!("{name} must be at least 1")))
    }
}

fn simulate_policy(
    policy: EncPolicy<f64>,
    lambda: f64,
    horizon: f64,
    replications: usize,
    seed: u64,
) -> Result<SimMetrics, CliError> {
    let config = SimConfig::poisson(policy, lambda, horizon)?
        .with_seed(seed)
        .with_replications(replications);
    Ok(simulator::run(&config)?)
}

/// Builds the CSV bundle for figure 4, 5, 6 or 7.
pub fn cmd_reproduce_fig(config: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let p: ReproduceParams = config.params()?;
    let prec = config.csv_precision;
    let lambda = positive("lambda", p.lambda.unwrap_or(1.0))?;
    let seed = config.seed;
    let sub_seed = |i: u64| crate::rng::replication_seed(seed, i);
    match p.figure {
        4 => {
            let capacity = at_least_one("capacity", p.capacity.unwrap_or(20))?;
            let horizon = positive("horizon", p.horizon.unwrap_or(2_000.0))?;
            let period = positive("sample_period", p.sample_period.unwrap_or(1.0))?;
            let mut out = Vec::new();
            for (name, policy, buffer, stream) in [
                (
                    "fig4_conventional.csv",
                    EncPolicy::conventional(capacity)?,
                    BufferMode::Unbounded,
                    0,
                ),
                (
                    "fig4_enc.csv",
                    EncPolicy::fcfs(capacity)?,
                    BufferMode::Finite,
                    1,
                ),
            ] {
                let sim = SimConfig::poisson(policy, lambda, horizon)?
                    .with_seed(sub_seed(stream))
                    .with_warmup(0.0)
                    .with_buffer(buffer);
                let path = simulator::trajectory(&sim, period)?;
                let mut t = Table::new(prec, TRAJECTORY_HEADER)?;
                for (time, r) in &path.samples {
                    let row = vec![t.num(*time), r.to_string()];
                    t.row(row)?;
                }
                out.push(t.finish(Some(name))?);
            }
            Ok(out)
        }
        5 => {
            let capacity = at_least_one("capacity", p.capacity.unwrap_or(3))?;
            let points = p.points.unwrap_or(8);
            if points < 2 {
                return Err(invalid("points must be at least 2"));
            }
            let horizon = positive("horizon", p.horizon.unwrap_or(200_000.0))?;
            let reps = at_least_one("replications", p.replications.unwrap_or(4))?;
            let cap = 1.0 / (1.0 + 2.0 * capacity as f64);
            let xis: Vec<f64> = (0..points)
                .map(|i| cap * i as f64 / (points - 1) as f64)
                .collect();
            let mut theory = Table::new(prec, FIG5_THEORY_HEADER)?;
            let mut sim = Table::new(prec, FIG5_SIM_HEADER)?;
            for (i, xi) in xis.iter().enumerate() {
                let policy = lossy_policy(xi, capacity, LossyVariant::default())?;
                let g_k = policy.send_probabilities()[capacity];
                let row = vec![theory.num(*xi), theory.num(g_k)];
                theory.row(row)?;
                let m = simulate_policy(policy, lambda, horizon, reps, sub_seed(i as u64))?;
                let se = m.std_errors.map_or(f64::NAN, |s| s.loss_rate);
                let row = vec![
                    sim.num(*xi),
                    sim.num(g_k),
                    sim.num(m.loss_rate),
                    sim.num(se),
                    sim.num(m.normalized_energy),
                ];
                sim.row(row)?;
            }
            Ok(vec![
                theory.finish(Some("fig5_theory.csv"))?,
                sim.finish(Some("fig5_sim.csv"))?,
            ])
        }
        6 => {
            let max_k = at_least_one("max_capacity", p.max_capacity.unwrap_or(20))?;
            let horizon = positive("horizon", p.horizon.unwrap_or(500_000.0))?;
            let reps = at_least_one("replications", p.replications.unwrap_or(4))?;
            let mut theory = Table::new(prec, FIG6_THEORY_HEADER)?;
            let mut sim = Table::new(prec, FIG6_SIM_HEADER)?;
            for k in 1..=max_k {
                let row = vec![k.to_string(), theory.num(1.0 / (1.0 + 2.0 * k as f64))];
                theory.row(row)?;
                let m = simulate_policy(
                    EncPolicy::conventional(k)?,
                    lambda,
                    horizon,
                    reps,
                    sub_seed(k as u64),
                )?;
                let se = m.std_errors.map_or(f64::NAN, |s| s.loss_rate);
                let row = vec![
                    k.to_string(),
                    sim.num(m.loss_rate),
                    sim.num(se),
                    m.counts.arrivals.to_string(),
                ];
                sim.row(row)?;
            }
            Ok(vec![
                theory.finish(Some("fig6_theory.csv"))?,
                sim.finish(Some("fig6_sim.csv"))?,
            ])
        }
        7 => {
            let capacity = at_least_one("capacity", p.capacity.unwrap_or(3))?;
            let step = positive("step", p.step.unwrap_or(0.01))?;
            let delta = positive("delta", p.delta.unwrap_or(1e-6))?;
            let horizon = positive("horizon", p.horizon.unwrap_or(200_000.0))?;
            let reps = at_least_one("replications", p.replications.unwrap_or(10))?;
            let lo = energy_threshold::<f64>(capacity) - 0.05;
            let grid = Grid::Range {
                start: (lo / step).floor() * step,
                stop: 2.1,
                step,
            }
            .points()?;
            let mut theory = Table::new(prec, FIG7_THEORY_HEADER)?;
            for point in tradeoff_curve(capacity, &lambda, &grid)? {
                let row = match point {
                    CurvePoint::Feasible(q) => vec![
                        theory.num(q.e_max),
                        theory.num(q.delay),
                        q.k_star.to_string(),
                        "1".into(),
                    ],
                    CurvePoint::Infeasible { e_max } => {
                        vec![theory.num(e_max), String::new(), String::new(), "0".into()]
                    }
                };
                theory.row(row)?;
            }
            let mut sim = Table::new(prec, FIG7_SIM_HEADER)?;
            for m in 1..=capacity.min(3) {
                let e_max = 1.0 + 1.0 / (1.0 + 2.0 * m as f64) + delta;
                let point = optimal_policy(&e_max, capacity, &lambda)?;
                let r = simulate_policy(point.policy, lambda, horizon, reps, sub_seed(m as u64))?;
                let se = r.std_errors;
                let row = vec![
                    sim.num(e_max),
                    sim.num(point.delay),
                    sim.num(r.mean_delay),
                    sim.num(se.map_or(f64::NAN, |s| s.mean_delay)),
                    sim.num(r.normalized_energy),
                    sim.num(se.map_or(f64::NAN, |s| s.normalized_energy)),
                ];
                sim.row(row)?;
            }
            Ok(vec![
                theory.finish(Some("fig7_theory.csv"))?,
                sim.finish(Some("fig7_sim.csv"))?,
            ])
        }
        other => Err(invalid(format!("figure must be 4, 5, 6 or 7, got {other}"))),
    }
}

/// Runs `command` on an already parsed config and returns the CSV artifacts
/// without touching the file system.
pub fn execute(
    command: Command,
    config: &RunConfig,
    strict: bool,
) -> Result<Vec<Artifact>, CliError> {
    if let Some(c) = config.command {
        if c != command {
            return Err(invalid(format!(
                "config is for `{}` but `{}` was requested",
                c.name(),
                command.name()
            )));
        }
    }
    Ok(match command {
        Command::Analyze => vec![cmd_analyze(config)?],
        Command::Optimize => vec![cmd_optimize(config, strict)?],
        Command::Tradeoff => vec![cmd_tradeoff(config, strict)?],
        Command::Simulate => vec![cmd_simulate(config)?],
        Command::Overflow => vec![cmd_overflow(config)?],
        Command::ReproduceFig => cmd_reproduce_fig(config)?,
    })
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_artifacts(artifacts: &[Artifact], out: Option<&Path>) -> Result<(), CliError> {
    let bundle = artifacts.iter().any(|a| a.name.is_some());
    if bundle {
        let dir = out.unwrap_or(Path::new("."));
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        for a in artifacts {
            let path = dir.join(a.name.as_deref().unwrap_or("out.csv"));
            fs::write(&path, &a.bytes).map_err(|e| io_error(&path, e))?;
        }
        return Ok(());
    }
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
            }
            let bytes: Vec<u8> = artifacts.iter().flat_map(|a| a.bytes.clone()).collect();
            fs::write(path, bytes).map_err(|e| io_error(path, e))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            for a in artifacts {
                stdout
                    .write_all(&a.bytes)
                    .map_err(|e| CliError::Io(e.to_string()))?;
            }
            stdout.flush().map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

/// Full CLI run for parsed arguments.
pub fn run(args: &Args) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        // an unreadable config is a configuration fault, not an output failure
        invalid(format!("{}: {e}", args.config.display()))
    })?;
    let mut config = RunConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let artifacts = execute(args.command, &config, args.strict)?;
    let out = args.out.clone().or_else(|| config.output_path.clone());
    write_artifacts(&artifacts, out.as_deref())
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code())
        }
    }
}
