//! Analysis, optimization and simulation of Enhanced Network Coding (ENC)
//! at a two-way relay with a finite buffer.
//!
//! The analytic core ([`model`], [`optimizer`], [`lp`]) is generic over a
//! [`Scalar`], so the same code runs in `f64`, `f32` or exact rationals.
//! The aliases below fix the common choices.

pub mod arrivals;
pub mod cli;
pub mod lp;
pub mod model;
pub mod optimizer;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod simulator;

pub use arrivals::{ArrivalError, ArrivalModel};
pub use model::{analyze, EncPolicy, Metrics, ModelError, RateParams, StationaryDist};
pub use optimizer::{
    lossy_optimal_delay, lossy_policy, optimal_delay, optimal_policy, tradeoff_curve, CurvePoint,
    Delay, EnergyBudget, LossyVariant, OptimizerError, TradeoffPoint,
};
pub use scalar::Scalar;
pub use simulator::{BufferMode, Counts, SimConfig, SimError, SimMetrics, Trajectory};

/// Arbitrary-precision rational used for exact checks.
pub type Exact = num_rational::BigRational;

pub type Policy = EncPolicy<f64>;
pub type ExactPolicy = EncPolicy<Exact>;
pub type Rates = RateParams<f64>;
pub type ExactRates = RateParams<Exact>;
pub type Distribution = StationaryDist<f64>;
pub type ExactDistribution = StationaryDist<Exact>;
pub type Metrics64 = Metrics<f64>;
pub type ExactMetrics = Metrics<Exact>;
pub type Tradeoff = TradeoffPoint<f64>;
pub type ExactTradeoff = TradeoffPoint<Exact>;
