//! Inter-arrival gap distributions of one source and their renewal rates.
//!
//! `ψ(s)` is the Laplace transform of the gap density. The long-term renewal
//! rate `λ' = 1 / E[gap]` is available in closed form and, independently, as
//! the limit `s ψ(s) / (1 - ψ(s))` as `s → 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{integrate, QuadratureError};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArrivalError {
    #[error("invalid arrival model: {0}")]
    InvalidModel(String),
    #[error("Laplace argument must be positive, got {0}")]
    NonPositiveArgument(f64),
    #[error("s grid must be non-empty, positive and strictly decreasing")]
    BadGrid,
    #[error("1 - psi(s) lost all precision at s = {0:e}")]
    NumericalBreakdown(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Gap distribution of a renewal arrival process.
///
/// Serialized as e.g. `{"kind": "exponential", "rate": 1.0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ArrivalModel {
    /// Poisson arrivals, gaps `Exp(rate)`.
    Exponential { rate: f64 },
    /// Periodic arrivals.
    Deterministic { period: f64 },
    /// Gaps uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Sum of `shape` exponential stages each with rate `rate`.
    Erlang { shape: u32, rate: f64 },
}

const PSI_ABS_TOL: f64 = 1e-10;
const COMPLEMENT_REL_TOL: f64 = 1e-13;

fn positive(name: &str, x: f64) -> Result<(), ArrivalError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(ArrivalError::InvalidModel(format!(
            "{name} must be positive and finite, got {x}"
        )))
    }
}

impl ArrivalModel {
    pub fn poisson(rate: f64) -> Result<Self, ArrivalError> {
        let m = Self::Exponential { rate };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ArrivalError> {
        match *self {
            Self::Exponential { rate } => positive("rate", rate),
            Self::Deterministic { period } => positive("period", period),
            Self::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
                    return Err(ArrivalError::InvalidModel(format!(
                        "uniform gaps need 0 <= lo < hi, got [{lo}, {hi}]"
                    )));
                }
                Ok(())
            }
            Self::Erlang { shape, rate } => {
                if shape == 0 {
                    return Err(ArrivalError::InvalidModel(
                        "erlang shape must be >= 1".into(),
                    ));
                }
                positive("rate", rate)
            }
        }
    }

    /// `E[gap]`.
    pub fn mean_gap(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Deterministic { period } => period,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Erlang { shape, rate } => f64::from(shape) / rate,
        }
    }

    /// `Var[gap]`.
    pub fn gap_variance(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / (rate * rate),
            Self::Deterministic { .. } => 0.0,
            Self::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            Self::Erlang { shape, rate } => f64::from(shape) / (rate * rate),
        }
    }

    /// Long-term renewal rate `λ' = 1 / E[gap]`.
    pub fn long_term_rate(&self) -> f64 {
        1.0 / self.mean_gap()
    }

    /// Draws one gap.
    pub fn sample_gap(&self, rng: &mut SimRng) -> f64 {
        match *self {
            Self::Exponential { rate } => rng::exponential(rng, rate),
            Self::Deterministic { period } => period,
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng::uniform(rng),
            Self::Erlang { shape, rate } => (0..shape).map(|_| rng::exponential(rng, rate)).sum(),
        }
    }

    /// `ψ(s) = E[e^{-s·gap}]`.
    pub fn laplace_psi(&self, s: f64) -> Result<f64, ArrivalError> {
        check_argument(s)?;
        Ok(match *self {
            Self::Exponential { rate } => rate / (rate + s),
            Self::Deterministic { period } => (-s * period).exp(),
            Self::Erlang { shape, rate } => (rate / (rate + s)).powi(shape as i32),
            Self::Uniform { lo, hi } => {
                let density = 1.0 / (hi - lo);
                integrate(|t| density * (-s * t).exp(), lo, hi, PSI_ABS_TOL, 0.0)?
            }
        })
    }

    /// `1 - ψ(s)`, evaluated without cancellation so it stays accurate as
    /// `s → 0`.
    pub fn laplace_complement(&self, s: f64) -> Result<f64, ArrivalError> {
        check_argument(s)?;
        Ok(match *self {
            Self::Exponential { rate } => s / (rate + s),
            Self::Deterministic { period } => -(-s * period).exp_m1(),
            Self::Erlang { shape, rate } => -(-f64::from(shape) * (s / rate).ln_1p()).exp_m1(),
            Self::Uniform { lo, hi } => {
                let density = 1.0 / (hi - lo);
                integrate(
                    |t| -density * (-s * t).exp_m1(),
                    lo,
                    hi,
                    f64::MIN_POSITIVE,
                    COMPLEMENT_REL_TOL,
                )?
            }
        })
    }

    /// `s Λ(s) = s ψ(s) / (1 - ψ(s))`.
    pub fn scaled_renewal_transform(&self, s: f64) -> Result<f64, ArrivalError> {
        let complement = self.laplace_complement(s)?;
        // a subnormal complement has already shed significant digits
        if !(complement.is_finite() && complement >= f64::MIN_POSITIVE) {
            return Err(ArrivalError::NumericalBreakdown(s));
        }
        let psi = 1.0 - complement;
        Ok(s * psi / complement)
    }

    /// Estimates `lim_{s→0} s ψ(s)/(1-ψ(s))` from its values on a strictly
    /// decreasing grid, by polynomial (Neville) extrapolation to `s = 0`.
    pub fn rate_limit_check(&self, s_grid: &[f64]) -> Result<f64, ArrivalError> {
        if s_grid.is_empty()
            || s_grid.iter().any(|s| !(s.is_finite() && *s > 0.0))
            || s_grid.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(ArrivalError::BadGrid);
        }
        let values = s_grid
            .iter()
            .map(|&s| self.scaled_renewal_transform(s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(extrapolate_to_zero(s_grid, &values))
    }
}

fn check_argument(s: f64) -> Result<(), ArrivalError> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(ArrivalError::NonPositiveArgument(s))
    }
}

/// Value at `x = 0` of the interpolating polynomial through `(xs[i], ys[i])`.
fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (xi * p[i + 1] - xj * p[i]) / (xi - xj);
        }
    }
    p[0]
}

/// Counts arrivals of a renewal process on `[0, horizon]`, starting with a
/// fresh gap at time zero.
pub fn count_arrivals(model: &ArrivalModel, horizon: f64, rng: &mut SimRng) -> u64 {
    let mut t = model.sample_gap(rng);
    let mut n = 0;
    while t <= horizon {
        n += 1;
        t += model.sample_gap(rng);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn models() -> Vec<ArrivalModel> {
        vec![
            ArrivalModel::Exponential { rate: 2.0 },
            ArrivalModel::Deterministic { period: 0.5 },
            ArrivalModel::Uniform { lo: 0.0, hi: 2.0 },
            ArrivalModel::Uniform { lo: 0.3, hi: 0.9 },
            ArrivalModel::Erlang {
                shape: 2,
                rate: 4.0,
            },
            ArrivalModel::Erlang {
                shape: 5,
                rate: 1.5,
            },
        ]
    }

    // Truncation point leaving tail mass below 1e-12 for the densities used
    // in the quadrature cross-checks.
    fn density(model: &ArrivalModel) -> (Box<dyn Fn(f64) -> f64>, f64, f64) {
        match *model {
            ArrivalModel::Exponential { rate } => (
                Box::new(move |t: f64| rate * (-rate * t).exp()),
                0.0,
                (1e12f64).ln() / rate,
            ),
            ArrivalModel::Uniform { lo, hi } => (Box::new(move |_| 1.0 / (hi - lo)), lo, hi),
            ArrivalModel::Erlang { shape, rate } => {
                let n = shape as i32;
                let fact: f64 = (1..shape).map(f64::from).product();
                (
                    Box::new(move |t: f64| rate.powi(n) * t.powi(n - 1) * (-rate * t).exp() / fact),
                    0.0,
                    80.0 / rate,
                )
            }
            ArrivalModel::Deterministic { .. } => unreachable!(),
        }
    }

    #[test]
    fn validation() {
        assert!(ArrivalModel::poisson(0.0).is_err());
        assert!(ArrivalModel::Uniform { lo: 1.0, hi: 1.0 }
            .validate()
            .is_err());
        assert!(ArrivalModel::Uniform { lo: -1.0, hi: 1.0 }
            .validate()
            .is_err());
        assert!(ArrivalModel::Erlang {
            shape: 0,
            rate: 1.0
        }
        .validate()
        .is_err());
        assert!(ArrivalModel::Deterministic {
            period: f64::INFINITY
        }
        .validate()
        .is_err());
        for m in models() {
            m.validate().unwrap();
        }
    }

    #[test]
    fn long_term_rates() {
        assert_eq!(
            ArrivalModel::Exponential { rate: 2.0 }.long_term_rate(),
            2.0
        );
        assert_eq!(
            ArrivalModel::Deterministic { period: 0.25 }.long_term_rate(),
            4.0
        );
        assert_eq!(
            ArrivalModel::Erlang {
                shape: 2,
                rate: 4.0
            }
            .long_term_rate(),
            2.0
        );
    }

    #[test]
    fn mean_gap_matches_numeric_integration() {
        for m in models() {
            if matches!(m, ArrivalModel::Deterministic { .. }) {
                continue;
            }
            let (f, a, b) = density(&m);
            let mean = integrate(|t| t * f(t), a, b, 1e-12, 0.0).unwrap();
            assert!((mean - m.mean_gap()).abs() < 1e-10, "{m:?}: {mean}");
        }
    }

    #[test]
    fn psi_matches_quadrature() {
        let psi = ArrivalModel::Exponential { rate: 1.0 }
            .laplace_psi(1.0)
            .unwrap();
        assert!((psi - 0.5).abs() < 1e-15);
        let psi = ArrivalModel::Deterministic { period: 1.0 }
            .laplace_psi(0.001)
            .unwrap();
        assert!((psi - 0.999_000_499_833_375).abs() < 1e-15);
        for m in models() {
            if matches!(m, ArrivalModel::Deterministic { .. }) {
                continue;
            }
            for s in [1e-3, 0.1, 1.0, 7.0] {
                let (f, a, b) = density(&m);
                let q = integrate(|t| f(t) * (-s * t).exp(), a, b, 1e-12, 0.0).unwrap();
                let psi = m.laplace_psi(s).unwrap();
                assert!((psi - q).abs() < 1e-10, "{m:?} s={s}: {psi} vs {q}");
                let c = m.laplace_complement(s).unwrap();
                assert!((1.0 - psi - c).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn uniform_psi_matches_closed_form() {
        let (lo, hi) = (0.3, 0.9);
        let m = ArrivalModel::Uniform { lo, hi };
        let moment = |n: i32| (hi.powi(n + 1) - lo.powi(n + 1)) / (f64::from(n + 1) * (hi - lo));
        for s in [1e-6f64, 1e-3, 0.5, 3.0] {
            let exact_c = if s <= 1e-3 {
                // alternating series of moments, converged to far below 1e-15 here
                (1..8)
                    .map(|n| {
                        let fact: f64 = (1..=n).map(f64::from).product();
                        -(-s).powi(n) * moment(n) / fact
                    })
                    .sum::<f64>()
            } else {
                1.0 - ((-s * lo).exp() - (-s * hi).exp()) / (s * (hi - lo))
            };
            let psi = m.laplace_psi(s).unwrap();
            assert!((psi - (1.0 - exact_c)).abs() < 1e-12, "s={s}: {psi}");
            let c = m.laplace_complement(s).unwrap();
            assert!(
                ((c - exact_c) / exact_c).abs() < 1e-12,
                "s={s}: {c} vs {exact_c}"
            );
        }
    }

    #[test]
    fn psi_decreases_and_tends_to_one() {
        for m in models() {
            let mut prev = 1.0;
            for s in [1e-8, 1e-4, 1e-2, 0.1, 1.0, 10.0] {
                let psi = m.laplace_psi(s).unwrap();
                assert!(psi > 0.0 && psi < prev, "{m:?} s={s}");
                prev = psi;
            }
            assert!(m.laplace_psi(1e-9).unwrap() > 1.0 - 1e-8);
        }
        assert!(matches!(
            ArrivalModel::poisson(1.0).unwrap().laplace_psi(0.0),
            Err(ArrivalError::NonPositiveArgument(_))
        ));
    }

    #[test]
    fn renewal_limit_examples() {
        let grid = [1e-2, 1e-3, 1e-4, 1e-5];
        let exp = ArrivalModel::Exponential { rate: 1.0 };
        for s in grid {
            assert!((exp.scaled_renewal_transform(s).unwrap() - 1.0).abs() < 1e-15);
        }
        let det = ArrivalModel::Deterministic { period: 0.5 };
        assert!((det.rate_limit_check(&grid).unwrap() - 2.0).abs() < 2e-6);
        let uni = ArrivalModel::Uniform { lo: 0.0, hi: 2.0 };
        assert!((uni.rate_limit_check(&grid).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn renewal_limit_rejects_bad_grids() {
        let m = ArrivalModel::poisson(1.0).unwrap();
        assert_eq!(m.rate_limit_check(&[]), Err(ArrivalError::BadGrid));
        assert_eq!(
            m.rate_limit_check(&[1e-3, 1e-2]),
            Err(ArrivalError::BadGrid)
        );
        assert_eq!(
            m.rate_limit_check(&[1e-2, -1e-3]),
            Err(ArrivalError::BadGrid)
        );
    }

    #[test]
    fn breakdown_is_flagged() {
        let det = ArrivalModel::Deterministic { period: 1.0 };
        assert!(matches!(
            det.rate_limit_check(&[1e-2, 1e-330]),
            Err(ArrivalError::NumericalBreakdown(_)) | Err(ArrivalError::BadGrid)
        ));
        assert_eq!(
            det.scaled_renewal_transform(1e-320),
            Err(ArrivalError::NumericalBreakdown(1e-320))
        );
    }

    #[test]
    fn deterministic_gaps() {
        let mut rng = rng::seeded(1);
        let m = ArrivalModel::Deterministic { period: 0.25 };
        assert!((0..100).all(|_| m.sample_gap(&mut rng) == 0.25));
    }

    #[test]
    fn empirical_mean_gaps() {
        // 10^6 gaps, 3σ bands
        let n = 1_000_000;
        for (m, want, sd) in [
            (ArrivalModel::Exponential { rate: 2.0 }, 0.5, 0.5),
            (
                ArrivalModel::Uniform { lo: 0.0, hi: 2.0 },
                1.0,
                (1.0f64 / 3.0).sqrt(),
            ),
            (
                ArrivalModel::Erlang {
                    shape: 3,
                    rate: 6.0,
                },
                0.5,
                (3.0f64).sqrt() / 6.0,
            ),
        ] {
            let mut rng = rng::seeded(2024);
            let mean = (0..n).map(|_| m.sample_gap(&mut rng)).sum::<f64>() / n as f64;
            let band = 3.0 * sd / (n as f64).sqrt();
            assert!((mean - want).abs() < band, "{m:?}: {mean}");
            assert!((mean - want).abs() < 0.002);
        }
    }
}
