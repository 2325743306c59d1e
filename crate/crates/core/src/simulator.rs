//! Event-driven Monte-Carlo simulation of the two-way relay under ENC.
//!
//! Event rules:
//!
//! 1. An arrival that finds the opposite queue non-empty is XOR-ed with the
//!    oldest opposite packet and both leave in one coded transmission.
//! 2. Otherwise, at backlog `k`, with probability `g_k` the relay sends one
//!    packet uncoded (the oldest queued one, or the arrival itself at `k = 0`)
//!    and queues the arrival; with probability `1 - g_k` the arrival is queued,
//!    or tail-dropped when the buffer already holds `K` packets.
//! 3. While `k ≥ 1` an exponential timer of rate `f_k` sends the oldest packet
//!    uncoded. The timer is redrawn after every change of `k`.
//!
//! Transmissions take no time. Per arrival the stream is consumed in the
//! order: next gap of that source, then the `g_k` coin (when rule 2
//! applies), then the service timer (when `k` changed). Simultaneous events
//! are handled as arrival A, then arrival B, then the service timer.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrivals::{ArrivalError, ArrivalModel};
use crate::model::EncPolicy;
use crate::rng::{self, replication_seed, SimRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Arrival(#[from] ArrivalError),
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidConfig(msg.into())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BufferMode {
    /// Capacity `K` taken from the policy.
    #[default]
    Finite,
    /// No capacity limit; every packet waits for a coding partner and the
    /// policy's `g`/`f` are ignored.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub policy: EncPolicy<f64>,
    pub arrivals_a: ArrivalModel,
    pub arrivals_b: ArrivalModel,
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
    pub replications: usize,
    pub buffer: BufferMode,
}

impl SimConfig {
    /// Symmetric Poisson sources of rate `lambda`, default warmup, one
    /// replication, seed 0.
    pub fn poisson(policy: EncPolicy<f64>, lambda: f64, horizon: f64) -> Result<Self, SimError> {
        let arrivals = ArrivalModel::poisson(lambda)?;
        Ok(Self {
            policy,
            arrivals_a: arrivals,
            arrivals_b: arrivals,
            horizon,
            warmup: default_warmup(lambda, horizon),
            seed: 0,
            replications: 1,
            buffer: BufferMode::Finite,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_warmup(mut self, warmup: f64) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn with_buffer(mut self, buffer: BufferMode) -> Self {
        self.buffer = buffer;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.arrivals_a.validate()?;
        self.arrivals_b.validate()?;
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.warmup.is_finite() && self.warmup >= 0.0 && self.warmup < self.horizon) {
            return Err(invalid(format!(
                "warmup must lie in [0, horizon), got {} with horizon {}",
                self.warmup, self.horizon
            )));
        }
        if self.replications == 0 {
            return Err(invalid("at least one replication is required"));
        }
        Ok(())
    }

    /// Mean of the two sources' long-term rates, the `λ'` used to normalize
    /// energy.
    pub fn per_source_rate(&self) -> f64 {
        0.5 * (self.arrivals_a.long_term_rate() + self.arrivals_b.long_term_rate())
    }
}

/// `max(100/λ, horizon/100)`.
pub fn default_warmup(lambda: f64, horizon: f64) -> f64 {
    (100.0 / lambda).max(0.01 * horizon)
}

/// Whole-run event counts, from an empty relay at time zero.
///
/// `2·coded_tx + uncoded_tx + drops + final_queue == arrivals` always.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub arrivals: u64,
    pub coded_tx: u64,
    pub uncoded_tx: u64,
    pub drops: u64,
    pub final_queue: u64,
}

impl Counts {
    pub fn is_conserved(&self) -> bool {
        2 * self.coded_tx + self.uncoded_tx + self.drops + self.final_queue == self.arrivals
    }

    fn add(&mut self, other: &Counts) {
        self.arrivals += other.arrivals;
        self.coded_tx += other.coded_tx;
        self.uncoded_tx += other.uncoded_tx;
        self.drops += other.drops;
        self.final_queue += other.final_queue;
    }
}

/// Estimates from one replication. Everything except `counts` and
/// `final_backlog` is measured on `[warmup, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationMetrics {
    pub seed: u64,
    pub counts: Counts,
    /// Signed backlog `R(horizon)`; positive when packets from A wait.
    pub final_backlog: i64,
    /// Mean sojourn of packets delivered in the window.
    pub mean_delay: f64,
    /// Total sojourn of delivered packets per arriving packet.
    pub delay_per_arrival: f64,
    pub loss_rate: f64,
    /// Transmissions per `λ'` per unit time.
    pub normalized_energy: f64,
    pub state_occupancy: Vec<f64>,
    pub time_avg_backlog: f64,
    pub window_arrivals: u64,
    pub window_arrivals_a: u64,
    pub window_arrivals_b: u64,
    pub window_delivered: u64,
    pub window_drops: u64,
    pub window_transmissions: u64,
    pub window_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdErrors {
    pub mean_delay: f64,
    pub delay_per_arrival: f64,
    pub loss_rate: f64,
    pub normalized_energy: f64,
}

/// Replication averages with their standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub mean_delay: f64,
    pub delay_per_arrival: f64,
    pub loss_rate: f64,
    pub normalized_energy: f64,
    pub time_avg_backlog: f64,
    /// Summed over replications.
    pub counts: Counts,
    pub state_occupancy: Vec<f64>,
    /// Standard errors of the replication means; `None` with a single
    /// replication.
    pub std_errors: Option<StdErrors>,
    pub replications: Vec<ReplicationMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Arrival(Source),
    Service,
}

struct Relay<'a> {
    config: &'a SimConfig,
    capacity: Option<usize>,
    rng: SimRng,
    now: f64,
    queue_a: VecDeque<f64>,
    queue_b: VecDeque<f64>,
    next_a: f64,
    next_b: f64,
    next_service: f64,
    counts: Counts,
    // window accumulators
    w_arrivals_a: u64,
    w_arrivals_b: u64,
    w_delivered: u64,
    w_drops: u64,
    w_transmissions: u64,
    w_sojourn: f64,
    w_backlog_area: f64,
    w_occupancy: Vec<f64>,
    sampler: Option<Sampler>,
}

struct Sampler {
    period: f64,
    next: f64,
    samples: Vec<(f64, i64)>,
}

impl<'a> Relay<'a> {
    fn new(config: &'a SimConfig, seed: u64, sampler: Option<Sampler>) -> Self {
        let capacity = match config.buffer {
            BufferMode::Finite => Some(config.policy.capacity()),
            BufferMode::Unbounded => None,
        };
        let mut rng = rng::seeded(seed);
        let next_a = config.arrivals_a.sample_gap(&mut rng);
        let next_b = config.arrivals_b.sample_gap(&mut rng);
        Self {
            config,
            capacity,
            rng,
            now: 0.0,
            queue_a: VecDeque::new(),
            queue_b: VecDeque::new(),
            next_a,
            next_b,
            next_service: f64::INFINITY,
            counts: Counts::default(),
            w_arrivals_a: 0,
            w_arrivals_b: 0,
            w_delivered: 0,
            w_drops: 0,
            w_transmissions: 0,
            w_sojourn: 0.0,
            w_backlog_area: 0.0,
            w_occupancy: vec![0.0; capacity.map_or(1, |k| k + 1)],
            sampler,
        }
    }

    fn backlog(&self) -> usize {
        self.queue_a.len() + self.queue_b.len()
    }

    fn signed_backlog(&self) -> i64 {
        self.queue_a.len() as i64 - self.queue_b.len() as i64
    }

    fn in_window(&self) -> bool {
        self.now >= self.config.warmup
    }

    fn advance(&mut self, t: f64) {
        let start = self.now.max(self.config.warmup);
        if t > start {
            let dt = t - start;
            let k = self.backlog();
            if k >= self.w_occupancy.len() {
                self.w_occupancy.resize(k + 1, 0.0);
            }
            self.w_occupancy[k] += dt;
            self.w_backlog_area += k as f64 * dt;
        }
        if let Some(s) = self.sampler.as_mut() {
            let r = self.queue_a.len() as i64 - self.queue_b.len() as i64;
            while s.next < t {
                s.samples.push((s.next, r));
                s.next += s.period;
            }
        }
        self.now = t;
    }

    fn deliver(&mut self, arrived_at: f64) {
        if self.in_window() {
            self.w_delivered += 1;
            self.w_sojourn += self.now - arrived_at;
        }
    }

    fn transmit(&mut self, coded: bool) {
        if coded {
            self.counts.coded_tx += 1;
        } else {
            self.counts.uncoded_tx += 1;
        }
        if self.in_window() {
            self.w_transmissions += 1;
        }
    }

    fn arrival(&mut self, source: Source) -> bool {
        let now = self.now;
        let gap = match source {
            Source::A => self.config.arrivals_a.sample_gap(&mut self.rng),
            Source::B => self.config.arrivals_b.sample_gap(&mut self.rng),
        };
        match source {
            Source::A => self.next_a = now + gap,
            Source::B => self.next_b = now + gap,
        }
        self.counts.arrivals += 1;
        if self.in_window() {
            match source {
                Source::A => self.w_arrivals_a += 1,
                Source::B => self.w_arrivals_b += 1,
            }
        }

        let (own, opposite) = match source {
            Source::A => (&mut self.queue_a, &mut self.queue_b),
            Source::B => (&mut self.queue_b, &mut self.queue_a),
        };
        if let Some(partner) = opposite.pop_front() {
            self.transmit(true);
            self.deliver(partner);
            self.deliver(now);
            return true;
        }

        let k = own.len();
        let Some(capacity) = self.capacity else {
            own.push_back(now);
            return true;
        };
        let g = self.config.policy.send_probabilities()[k];
        let send = rng::uniform(&mut self.rng) < g;
        if send {
            let sent = if k == 0 {
                now
            } else {
                let oldest = own.pop_front().expect("k >= 1");
                own.push_back(now);
                oldest
            };
            self.transmit(false);
            self.deliver(sent);
            false
        } else if k < capacity {
            own.push_back(now);
            true
        } else {
            self.counts.drops += 1;
            if self.in_window() {
                self.w_drops += 1;
            }
            false
        }
    }

    fn service(&mut self) {
        let oldest = if self.queue_a.is_empty() {
            self.queue_b.pop_front()
        } else {
            self.queue_a.pop_front()
        }
        .expect("service timer only runs with a non-empty buffer");
        self.transmit(false);
        self.deliver(oldest);
    }

    fn reschedule_service(&mut self) {
        let k = self.backlog();
        self.next_service = if self.capacity.is_some() && k >= 1 {
            let rate = self.config.policy.service_rates()[k];
            if rate > 0.0 {
                self.now + rng::exponential(&mut self.rng, rate)
            } else {
                f64::INFINITY
            }
        } else {
            f64::INFINITY
        };
    }

    fn next_event(&self) -> (f64, Event) {
        if self.next_a <= self.next_b && self.next_a <= self.next_service {
            (self.next_a, Event::Arrival(Source::A))
        } else if self.next_b <= self.next_service {
            (self.next_b, Event::Arrival(Source::B))
        } else {
            (self.next_service, Event::Service)
        }
    }

    fn run(mut self) -> (ReplicationMetrics, Option<Vec<(f64, i64)>>, u64) {
        let horizon = self.config.horizon;
        loop {
            let (t, event) = self.next_event();
            if t > horizon {
                self.advance(horizon);
                break;
            }
            self.advance(t);
            let changed = match event {
                Event::Arrival(source) => self.arrival(source),
                Event::Service => {
                    self.service();
                    true
                }
            };
            if changed {
                self.reschedule_service();
            }
            debug_assert!(
                self.queue_a.is_empty() || self.queue_b.is_empty(),
                "both directions queued at t = {}",
                self.now
            );
        }
        if let Some(s) = self.sampler.as_mut() {
            if s.next <= horizon {
                let r = self.queue_a.len() as i64 - self.queue_b.len() as i64;
                while s.next <= horizon {
                    s.samples.push((s.next, r));
                    s.next += s.period;
                }
            }
        }
        self.counts.final_queue = self.backlog() as u64;
        let window = horizon - self.config.warmup;
        let w_arrivals = self.w_arrivals_a + self.w_arrivals_b;
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        let metrics = ReplicationMetrics {
            seed: 0,
            counts: self.counts,
            final_backlog: self.signed_backlog(),
            mean_delay: ratio(self.w_sojourn, self.w_delivered as f64),
            delay_per_arrival: ratio(self.w_sojourn, w_arrivals as f64),
            loss_rate: ratio(self.w_drops as f64, w_arrivals as f64),
            normalized_energy: self.w_transmissions as f64
                / (self.config.per_source_rate() * window),
            state_occupancy: self.w_occupancy.iter().map(|t| t / window).collect(),
            time_avg_backlog: self.w_backlog_area / window,
            window_arrivals: w_arrivals,
            window_arrivals_a: self.w_arrivals_a,
            window_arrivals_b: self.w_arrivals_b,
            window_delivered: self.w_delivered,
            window_drops: self.w_drops,
            window_transmissions: self.w_transmissions,
            window_length: window,
        };
        let w_delivered = self.w_delivered;
        (metrics, self.sampler.map(|s| s.samples), w_delivered)
    }
}

/// Runs one replication with an explicit stream seed.
pub fn run_replication(config: &SimConfig, seed: u64) -> Result<ReplicationMetrics, SimError> {
    config.validate()?;
    let (mut m, _, _) = Relay::new(config, seed, None).run();
    m.seed = seed;
    Ok(m)
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, f64::NAN);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `config.replications` independent replications (in parallel) and
/// aggregates them in replication order. Replication `i` uses the stream
/// seed `replication_seed(config.seed, i)`.
pub fn run(config: &SimConfig) -> Result<SimMetrics, SimError> {
    config.validate()?;
    let reps: Vec<ReplicationMetrics> = (0..config.replications)
        .into_par_iter()
        .map(|i| {
            let seed = replication_seed(config.seed, i as u64);
            let (mut m, _, _) = Relay::new(config, seed, None).run();
            m.seed = seed;
            m
        })
        .collect();
    Ok(aggregate(reps))
}

fn aggregate(reps: Vec<ReplicationMetrics>) -> SimMetrics {
    let (mean_delay, se_delay) = mean_and_se(reps.iter().map(|r| r.mean_delay));
    let (per_arrival, se_per_arrival) = mean_and_se(reps.iter().map(|r| r.delay_per_arrival));
    let (loss, se_loss) = mean_and_se(reps.iter().map(|r| r.loss_rate));
    let (energy, se_energy) = mean_and_se(reps.iter().map(|r| r.normalized_energy));
    let (backlog, _) = mean_and_se(reps.iter().map(|r| r.time_avg_backlog));
    let mut counts = Counts::default();
    let states = reps
        .iter()
        .map(|r| r.state_occupancy.len())
        .max()
        .unwrap_or(0);
    let mut occupancy = vec![0.0; states];
    for r in &reps {
        counts.add(&r.counts);
        for (o, x) in occupancy.iter_mut().zip(&r.state_occupancy) {
            *o += x / reps.len() as f64;
        }
    }
    let std_errors = (reps.len() >= 2).then_some(StdErrors {
        mean_delay: se_delay,
        delay_per_arrival: se_per_arrival,
        loss_rate: se_loss,
        normalized_energy: se_energy,
    });
    SimMetrics {
        mean_delay,
        delay_per_arrival: per_arrival,
        loss_rate: loss,
        normalized_energy: energy,
        time_avg_backlog: backlog,
        counts,
        state_occupancy: occupancy,
        std_errors,
        replications: reps,
    }
}

/// Signed backlog `R(t)` sampled every `period` from `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<(f64, i64)>,
}

impl Trajectory {
    pub fn max_abs_backlog(&self) -> i64 {
        self.samples.iter().map(|(_, r)| r.abs()).max().unwrap_or(0)
    }
}

/// Backlog path of replication 0 over the whole horizon (warmup included).
pub fn trajectory(config: &SimConfig, sample_period: f64) -> Result<Trajectory, SimError> {
    config.validate()?;
    if !(sample_period.is_finite() && sample_period > 0.0) {
        return Err(invalid(format!(
            "sample period must be positive, got {sample_period}"
        )));
    }
    let sampler = Sampler {
        period: sample_period,
        next: 0.0,
        samples: Vec::new(),
    };
    let seed = replication_seed(config.seed, 0);
    let (_, samples, _) = Relay::new(config, seed, Some(sampler)).run();
    Ok(Trajectory {
        samples: samples.unwrap_or_default(),
    })
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Central-limit approximation `2Φ(-K/√Q)` of `Pr(|R| > K)` after `Q`
/// equiprobable ±1 steps.
pub fn overflow_probability_clt(q_total: u64, capacity: u64) -> f64 {
    2.0 * normal_cdf(-(capacity as f64) / (q_total as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverflowEstimate {
    pub q_total: u64,
    pub capacity: u64,
    pub trials: u64,
    pub empirical: f64,
    pub std_error: f64,
    pub theory: f64,
}

/// Fraction of `trials` unbounded ±1 random walks of `q_total` steps that end
/// with `|R| > K`. Steps are the bits of successive 64-bit stream words.
pub fn overflow_experiment(
    q_total: u64,
    capacity: u64,
    trials: u64,
    seed: u64,
) -> Result<OverflowEstimate, SimError> {
    if q_total < 100 {
        return Err(invalid(format!(
            "q_total must be at least 100, got {q_total}"
        )));
    }
    if trials < 1000 {
        return Err(invalid(format!(
            "trials must be at least 1000, got {trials}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let full_words = q_total / 64;
    let tail_bits = q_total % 64;
    let mut over = 0u64;
    for _ in 0..trials {
        let mut ups = 0u64;
        for _ in 0..full_words {
            ups += u64::from(rand::RngCore::next_u64(&mut rng).count_ones());
        }
        if tail_bits > 0 {
            let mask = (1u64 << tail_bits) - 1;
            ups += u64::from((rand::RngCore::next_u64(&mut rng) & mask).count_ones());
        }
        let r = 2 * ups as i64 - q_total as i64;
        if r.unsigned_abs() > capacity {
            over += 1;
        }
    }
    let p = over as f64 / trials as f64;
    Ok(OverflowEstimate {
        q_total,
        capacity,
        trials,
        empirical: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        theory: overflow_probability_clt(q_total, capacity),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::analyze;
    use crate::optimizer::optimal_policy;

    fn poisson(policy: EncPolicy<f64>, horizon: f64) -> SimConfig {
        SimConfig::poisson(policy, 1.0, horizon).unwrap()
    }

    #[test]
    fn config_validation() {
        let base = poisson(EncPolicy::conventional(2).unwrap(), 100.0);
        assert!(base.clone().with_warmup(100.0).validate().is_err());
        assert!(base.clone().with_replications(0).validate().is_err());
        let mut bad = base.clone();
        bad.horizon = -1.0;
        assert!(bad.validate().is_err());
        let mut bad = base;
        bad.arrivals_a = ArrivalModel::Exponential { rate: 0.0 };
        assert!(matches!(bad.validate(), Err(SimError::Arrival(_))));
        assert_eq!(default_warmup(1.0, 1e6), 1e4);
        assert_eq!(default_warmup(0.5, 1e3), 200.0);
    }

    #[test]
    fn conservation_holds_for_assorted_policies() {
        let policies = vec![
            EncPolicy::conventional(2).unwrap(),
            EncPolicy::fcfs(3).unwrap(),
            EncPolicy::always_send(2).unwrap(),
            EncPolicy::new(vec![0.3, 0.5, 0.2, 0.9], vec![0.0, 0.4, 1.3, 2.0]).unwrap(),
        ];
        for (i, p) in policies.into_iter().enumerate() {
            for seed in 0..5 {
                let m = run_replication(&poisson(p.clone(), 500.0), seed + 10 * i as u64).unwrap();
                assert!(m.counts.is_conserved(), "{:?}", m.counts);
            }
        }
    }

    #[test]
    fn always_send_forwards_immediately() {
        let m = run(&poisson(EncPolicy::always_send(3).unwrap(), 20_000.0).with_seed(5)).unwrap();
        assert_eq!(m.mean_delay, 0.0);
        assert_eq!(m.loss_rate, 0.0);
        assert_eq!(m.counts.coded_tx, 0);
        assert!((m.normalized_energy - 2.0).abs() < 0.03);
        assert_eq!(m.state_occupancy[0], 1.0);
    }

    #[test]
    fn fcfs_never_drops_and_respects_capacity() {
        let cfg = poisson(EncPolicy::fcfs(4).unwrap(), 5_000.0);
        let m = run_replication(&cfg, 9).unwrap();
        assert_eq!(m.counts.drops, 0);
        assert_eq!(m.state_occupancy.len(), 5);
        let t = trajectory(&cfg, 0.5).unwrap();
        assert!(t.max_abs_backlog() <= 4);
    }

    #[test]
    fn determinism() {
        let cfg = poisson(EncPolicy::conventional(3).unwrap(), 2_000.0)
            .with_seed(77)
            .with_replications(4);
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    }

    #[test]
    fn occupancy_is_a_distribution() {
        let m = run_replication(&poisson(EncPolicy::conventional(5).unwrap(), 3_000.0), 1).unwrap();
        let total: f64 = m.state_occupancy.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn conventional_coding_matches_analysis() {
        let policy = EncPolicy::conventional(2).unwrap();
        let theory = analyze(&policy, 1.0, 1.0).unwrap();
        let m = run(&poisson(policy, 100_000.0)
            .with_seed(11)
            .with_replications(10))
        .unwrap();
        let se = m.std_errors.unwrap();
        assert!(
            (m.loss_rate - theory.loss).abs() < 3.0 * se.loss_rate + 1e-4,
            "{m:?}"
        );
        assert!((m.loss_rate - 0.2).abs() < 0.005);
        assert!((m.normalized_energy - 0.8).abs() < 0.01);
        // Delay per arrival is the closed-form quantity; delivered packets
        // alone wait D / (1 - ξ).
        assert!((m.delay_per_arrival - theory.delay).abs() < 3.0 * se.delay_per_arrival + 1e-4);
        assert!((m.delay_per_arrival - 0.6).abs() < 0.01);
        let delivered = theory.delay / (1.0 - theory.loss);
        assert!((m.mean_delay - delivered).abs() < 3.0 * se.mean_delay + 1e-4);
    }

    #[test]
    fn optimal_policy_matches_curve() {
        let p = optimal_policy(&1.5, 3, &1.0).unwrap();
        let m = run(&poisson(p.policy, 100_000.0)
            .with_seed(3)
            .with_replications(10))
        .unwrap();
        assert!((m.mean_delay - 0.25).abs() < 0.01);
        assert!((m.normalized_energy - 1.5).abs() < 0.01);
        assert_eq!(m.loss_rate, 0.0);
    }

    #[test]
    fn unbounded_mode_is_a_random_walk() {
        let cfg = poisson(EncPolicy::conventional(1).unwrap(), 200.0)
            .with_buffer(BufferMode::Unbounded)
            .with_warmup(0.0);
        let t = trajectory(&cfg, 1.0).unwrap();
        assert_eq!(t.samples[0], (0.0, 0));
        assert_eq!(t.samples.len(), 201);
        for w in t.samples.windows(2) {
            assert!(w[1].0 > w[0].0);
        }
        let m = run_replication(&cfg, 4).unwrap();
        assert_eq!(m.counts.uncoded_tx, 0);
        assert_eq!(m.counts.drops, 0);
        assert!(m.counts.is_conserved());
    }

    #[test]
    fn overflow_validation_and_edge() {
        assert!(overflow_experiment(10, 1, 1000, 0).is_err());
        assert!(overflow_experiment(1000, 1, 10, 0).is_err());
        // K = 0: overflow unless the walk is back at the origin
        let e = overflow_experiment(100, 0, 20_000, 1).unwrap();
        // Pr(R = 0) = C(100, 50) / 2^100 ≈ 0.0796
        assert!((e.empirical - (1.0 - 0.079_589_237_4)).abs() < 4.0 * e.std_error);
        assert_eq!(e.theory, 1.0);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((2.0 * normal_cdf(-2.0) - 0.045_500_263_896_358).abs() < 1e-12);
        assert!((2.0 * normal_cdf(-4.0) - 6.334_248_366_623_996e-5).abs() < 1e-15);
    }
}
