//! ENC policy parameterization and the buffer-state birth-death chain.
//!
//! The relay backlog `S(t) = |R(t)|` is a birth-death chain on `0..=K`.
//! A policy is the pair of per-state vectors `g` (probability of sending the
//! oldest packet uncoded when a same-direction packet arrives) and `f`
//! (rate of spontaneous uncoded sends). Everything here is a pure function
//! of its inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{snap_into, two, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("arrival rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("energy per transmission must be positive, got {0}")]
    NonPositiveEnergy(f64),
    #[error("buffer capacity must be at least 1")]
    ZeroCapacity,
    #[error("{name} has length {got}, expected {expected}")]
    LengthMismatch {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{name}[{index}] = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        index: usize,
        value: f64,
        range: &'static str,
    },
    #[error("downward rate into state {state} is zero")]
    ZeroDownRate { state: usize },
    #[error("probabilities do not form a distribution (sum {0})")]
    NotADistribution(f64),
}

/// Per-state ENC parameters for a buffer of `K` packets.
///
/// Both vectors have length `K + 1`. `f[0]` is kept for uniform indexing and
/// never used: in state 0 there is nothing to serve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncPolicy<T> {
    g: Vec<T>,
    f: Vec<T>,
}

impl<T: Scalar> EncPolicy<T> {
    /// Validates `g ∈ [0,1]` and `f ≥ 0`. Entries within the input tolerance
    /// of the box are snapped onto it.
    pub fn new(g: Vec<T>, f: Vec<T>) -> Result<Self, ModelError> {
        if g.len() < 2 {
            return Err(ModelError::ZeroCapacity);
        }
        if f.len() != g.len() {
            return Err(ModelError::LengthMismatch {
                name: "f",
                expected: g.len(),
                got: f.len(),
            });
        }
        let g = g
            .iter()
            .enumerate()
            .map(|(index, x)| {
                snap_into(x, &T::zero(), Some(&T::one())).ok_or(ModelError::OutOfRange {
                    name: "g",
                    index,
                    value: x.as_f64(),
                    range: "[0, 1]",
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let f = f
            .iter()
            .enumerate()
            .map(|(index, x)| {
                snap_into(x, &T::zero(), None).ok_or(ModelError::OutOfRange {
                    name: "f",
                    index,
                    value: x.as_f64(),
                    range: "[0, inf)",
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { g, f })
    }

    fn uniform(capacity: usize, g_fill: T, g_last: T) -> Result<Self, ModelError> {
        if capacity == 0 {
            return Err(ModelError::ZeroCapacity);
        }
        let mut g = vec![g_fill; capacity + 1];
        g[capacity] = g_last;
        Self::new(g, vec![T::zero(); capacity + 1])
    }

    /// Conventional network coding: never send uncoded (`g ≡ 0`, `f ≡ 0`).
    pub fn conventional(capacity: usize) -> Result<Self, ModelError> {
        Self::uniform(capacity, T::zero(), T::zero())
    }

    /// First-come-first-serve: send uncoded only when the buffer is full.
    pub fn fcfs(capacity: usize) -> Result<Self, ModelError> {
        Self::uniform(capacity, T::zero(), T::one())
    }

    /// Forward every packet uncoded on arrival (`g ≡ 1`).
    pub fn always_send(capacity: usize) -> Result<Self, ModelError> {
        Self::uniform(capacity, T::one(), T::one())
    }

    pub fn capacity(&self) -> usize {
        self.g.len() - 1
    }

    /// `g_0..g_K`.
    pub fn send_probabilities(&self) -> &[T] {
        &self.g
    }

    /// `f_0..f_K`.
    pub fn service_rates(&self) -> &[T] {
        &self.f
    }

    /// A policy never drops when it always sends at a full buffer.
    pub fn is_loss_free(&self) -> bool {
        self.g[self.capacity()] == T::one()
    }
}

/// Birth-death rates of the buffer-state chain.
///
/// `up[k]` is the rate `k → k+1` for `k = 0..=K` (the entry at `K` is the
/// overflow rate, i.e. the drop intensity). `down[k-1]` is the rate `k → k-1`
/// for `k = 1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateParams<T> {
    lambda: T,
    up: Vec<T>,
    down: Vec<T>,
}

impl<T: Scalar> RateParams<T> {
    /// Checks `0 ≤ up[0] ≤ 2λ`, `0 ≤ up[k] ≤ λ` and `down[k] ≥ λ`.
    pub fn new(lambda: T, up: Vec<T>, down: Vec<T>) -> Result<Self, ModelError> {
        check_lambda(&lambda)?;
        if up.len() < 2 {
            return Err(ModelError::ZeroCapacity);
        }
        let capacity = up.len() - 1;
        if down.len() != capacity {
            return Err(ModelError::LengthMismatch {
                name: "down",
                expected: capacity,
                got: down.len(),
            });
        }
        let up = up
            .iter()
            .enumerate()
            .map(|(index, x)| {
                let cap = if index == 0 {
                    two::<T>() * lambda.clone()
                } else {
                    lambda.clone()
                };
                snap_into(x, &T::zero(), Some(&cap)).ok_or(ModelError::OutOfRange {
                    name: "up",
                    index,
                    value: x.as_f64(),
                    range: "[0, 2λ] at k=0, [0, λ] above",
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let down = down
            .iter()
            .enumerate()
            .map(|(i, x)| {
                snap_into(x, &lambda, None).ok_or(ModelError::OutOfRange {
                    name: "down",
                    index: i + 1,
                    value: x.as_f64(),
                    range: "[λ, inf)",
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { lambda, up, down })
    }

    pub fn capacity(&self) -> usize {
        self.down.len()
    }

    pub fn lambda(&self) -> &T {
        &self.lambda
    }

    /// `λ_0..λ_K`.
    pub fn up(&self) -> &[T] {
        &self.up
    }

    /// `μ_1..μ_K`.
    pub fn down(&self) -> &[T] {
        &self.down
    }

    /// `μ_k` for `1 ≤ k ≤ K`.
    pub fn mu(&self, k: usize) -> &T {
        &self.down[k - 1]
    }
}

fn check_lambda<T: Scalar>(lambda: &T) -> Result<(), ModelError> {
    if *lambda <= T::zero() {
        return Err(ModelError::NonPositiveRate(lambda.as_f64()));
    }
    Ok(())
}

/// Maps a policy onto chain rates: `λ_0 = 2λ(1-g_0)`, `λ_k = λ(1-g_k)`,
/// `μ_k = λ + f_k`.
pub fn policy_to_rates<T: Scalar>(
    policy: &EncPolicy<T>,
    lambda: T,
) -> Result<RateParams<T>, ModelError> {
    check_lambda(&lambda)?;
    let up = policy
        .g
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let scale = if k == 0 {
                two::<T>() * lambda.clone()
            } else {
                lambda.clone()
            };
            scale * (T::one() - g.clone())
        })
        .collect();
    let down = policy.f[1..]
        .iter()
        .map(|f| lambda.clone() + f.clone())
        .collect();
    RateParams::new(lambda, up, down)
}

/// Inverse of [`policy_to_rates`]. `f_0` is returned as zero.
pub fn rates_to_policy<T: Scalar>(rates: &RateParams<T>) -> Result<EncPolicy<T>, ModelError> {
    let lambda = &rates.lambda;
    let g = rates
        .up
        .iter()
        .enumerate()
        .map(|(k, up)| {
            let scale = if k == 0 {
                two::<T>() * lambda.clone()
            } else {
                lambda.clone()
            };
            T::one() - up.clone() / scale
        })
        .collect();
    let f = std::iter::once(T::zero())
        .chain(rates.down.iter().map(|mu| mu.clone() - lambda.clone()))
        .collect();
    EncPolicy::new(g, f)
}

/// Stationary probabilities `π_0..π_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDist<T> {
    pi: Vec<T>,
}

impl<T: Scalar> StationaryDist<T> {
    /// Accepts a probability vector that sums to one within the analytic
    /// tolerance (scaled by the number of states).
    pub fn new(pi: Vec<T>) -> Result<Self, ModelError> {
        if pi.len() < 2 {
            return Err(ModelError::ZeroCapacity);
        }
        let mut sum = T::zero();
        for (index, p) in pi.iter().enumerate() {
            if *p < T::zero() {
                return Err(ModelError::OutOfRange {
                    name: "pi",
                    index,
                    value: p.as_f64(),
                    range: "[0, 1]",
                });
            }
            sum = sum + p.clone();
        }
        let slack = T::analytic_tol() * T::from_usize_lossless(pi.len());
        if (sum.clone() - T::one()).abs() > slack {
            return Err(ModelError::NotADistribution(sum.as_f64()));
        }
        Ok(Self { pi })
    }

    pub fn probabilities(&self) -> &[T] {
        &self.pi
    }

    pub fn capacity(&self) -> usize {
        self.pi.len() - 1
    }

    /// Mean backlog `Σ k π_k`.
    pub fn mean_backlog(&self) -> T {
        self.pi.iter().enumerate().fold(T::zero(), |acc, (k, p)| {
            acc + T::from_usize_lossless(k) * p.clone()
        })
    }
}

/// Product-form solution of a birth-death chain with upward rates `up`
/// (length `K+1`, last entry ignored) and downward rates `down` (length `K`).
///
/// Once an upward rate is zero every higher state is unreachable and gets an
/// exact zero, whatever the downstream rates are.
pub fn product_form<T: Scalar>(up: &[T], down: &[T]) -> Result<Vec<T>, ModelError> {
    if let Some(state) = down.iter().position(|mu| *mu == T::zero()) {
        return Err(ModelError::ZeroDownRate { state: state + 1 });
    }
    if up.len() != down.len() + 1 {
        return Err(ModelError::LengthMismatch {
            name: "up",
            expected: down.len() + 1,
            got: up.len(),
        });
    }
    let mut weights = Vec::with_capacity(up.len());
    weights.push(T::one());
    let mut reachable = true;
    for (lambda_m, mu_next) in up.iter().zip(down) {
        if *lambda_m == T::zero() {
            reachable = false;
        }
        let w = if reachable {
            weights.last().cloned().unwrap() * lambda_m.clone() / mu_next.clone()
        } else {
            T::zero()
        };
        weights.push(w);
    }
    let total = weights.iter().fold(T::zero(), |acc, w| acc + w.clone());
    Ok(weights.into_iter().map(|w| w / total.clone()).collect())
}

/// Stationary distribution `π_k = π_0 Π_{m<k} λ_m / μ_{m+1}`.
pub fn stationary<T: Scalar>(rates: &RateParams<T>) -> Result<StationaryDist<T>, ModelError> {
    let pi = product_form(&rates.up, &rates.down)?;
    Ok(StationaryDist { pi })
}

/// Mean packet delay `D = Σ k π_k / (2λ)`.
///
/// By Little's law this is the total queueing time per arriving packet,
/// counting dropped packets as zero; for loss-free policies it is the mean
/// sojourn of a delivered packet.
///
/// Panics if `lambda` is not positive.
pub fn mean_delay<T: Scalar>(dist: &StationaryDist<T>, lambda: T) -> T {
    assert!(lambda > T::zero(), "arrival rate must be positive");
    dist.mean_backlog() / (two::<T>() * lambda)
}

/// Normalized loss `ξ = π_K λ_K / (2λ)`. Exactly zero when `λ_K = 0`.
pub fn loss_rate<T: Scalar>(dist: &StationaryDist<T>, rates: &RateParams<T>) -> T {
    let k = rates.capacity();
    let overflow = &rates.up[k];
    if *overflow == T::zero() {
        return T::zero();
    }
    dist.pi[k].clone() * overflow.clone() / (two::<T>() * rates.lambda.clone())
}

/// Relay transmit energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Energy<T> {
    /// `E^ave`, energy per second.
    pub average: T,
    /// `Ē = E^ave / (ελ)`.
    pub normalized: T,
}

/// `E^ave = ε(λπ_0 + λ - λ_K π_K)` and its normalization by `ελ`.
pub fn energy<T: Scalar>(
    dist: &StationaryDist<T>,
    rates: &RateParams<T>,
    epsilon: T,
) -> Result<Energy<T>, ModelError> {
    if epsilon <= T::zero() {
        return Err(ModelError::NonPositiveEnergy(epsilon.as_f64()));
    }
    let k = rates.capacity();
    let lambda = rates.lambda.clone();
    let per_packet = lambda.clone() * dist.pi[0].clone() + lambda.clone()
        - rates.up[k].clone() * dist.pi[k].clone();
    let average = epsilon.clone() * per_packet.clone();
    let normalized = per_packet / lambda;
    Ok(Energy {
        average,
        normalized,
    })
}

/// Network-layer performance of one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics<T> {
    pub delay: T,
    pub loss: T,
    pub energy: T,
    pub normalized_energy: T,
}

/// Full analysis of a policy at per-source rate `lambda`.
pub fn analyze<T: Scalar>(
    policy: &EncPolicy<T>,
    lambda: T,
    epsilon: T,
) -> Result<Metrics<T>, ModelError> {
    let rates = policy_to_rates(policy, lambda.clone())?;
    let dist = stationary(&rates)?;
    let e = energy(&dist, &rates, epsilon)?;
    Ok(Metrics {
        delay: mean_delay(&dist, lambda),
        loss: loss_rate(&dist, &rates),
        energy: e.average,
        normalized_energy: e.normalized,
    })
}
