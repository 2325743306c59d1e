//! Optimal delay-energy trade-off of ENC.
//!
//! With `ρ_k = Π_{m<k} λ_m/μ_{m+1}` the delay minimization under a normalized
//! energy budget `Ē^max` becomes the linear program
//!
//! ```text
//! minimize Σ k ρ_k   s.t.  Σ ρ_k = 1/π_0* - 1,  ρ_1 ≤ 2,  ρ_{k+1} ≤ ρ_k,  ρ ≥ 0
//! ```
//!
//! whose optimum fills the low states first: `ρ_k = 2` up to `k*`, the
//! remainder at `k* + 1`, zero above. The closed form is cross-checked by
//! [`lp_oracle`], which solves the same program with the generic simplex.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::model::{rates_to_policy, EncPolicy, ModelError, RateParams};
use crate::scalar::{two, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    #[error("energy budget {e_max} is below the loss-free threshold {threshold}")]
    Infeasible { e_max: f64, threshold: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn invalid(msg: impl Into<String>) -> OptimizerError {
    OptimizerError::InvalidInput(msg.into())
}

fn check_common<T: Scalar>(capacity: usize, lambda: &T) -> Result<(), OptimizerError> {
    if capacity == 0 {
        return Err(invalid("buffer capacity must be at least 1"));
    }
    if *lambda <= T::zero() {
        return Err(invalid(format!(
            "lambda must be positive, got {}",
            lambda.as_f64()
        )));
    }
    Ok(())
}

/// Smallest loss-free energy budget for a `K`-packet buffer, `1 + 1/(1+2K)`.
pub fn energy_threshold<T: Scalar>(capacity: usize) -> T {
    T::one() + T::one() / (T::one() + two::<T>() * T::from_usize_lossless(capacity))
}

/// Budgets at which the optimal curve changes slope: `1 + 1/(1+2m)` for
/// `m = K..1`, then `2`. Ascending.
pub fn breakpoints<T: Scalar>(capacity: usize) -> Vec<T> {
    (1..=capacity)
        .rev()
        .map(energy_threshold::<T>)
        .chain(std::iter::once(two::<T>()))
        .collect()
}

/// Idle-probability target `π_0*` implied by the budget:
/// `0` below 1, `Ē^max - 1` on `[1, 2]`, `1` above 2.
pub fn pi0_star<T: Scalar>(e_max: &T) -> T {
    if *e_max < T::one() {
        T::zero()
    } else if *e_max <= two::<T>() {
        e_max.clone() - T::one()
    } else {
        T::one()
    }
}

/// `k* = ⌊(1/π_0 - 1)/2⌋`, unclamped.
pub fn k_star<T: Scalar>(pi0: &T) -> Result<usize, OptimizerError> {
    if *pi0 <= T::zero() || *pi0 > T::one() {
        return Err(invalid(format!(
            "pi0 must lie in (0, 1], got {}",
            pi0.as_f64()
        )));
    }
    let half_mass = (T::one() / pi0.clone() - T::one()) / two::<T>();
    Scalar::floor(&half_mass)
        .to_usize()
        .ok_or_else(|| invalid("k* does not fit in usize"))
}

fn k_star_clamped<T: Scalar>(pi0: &T, capacity: usize) -> Result<usize, OptimizerError> {
    Ok(k_star(pi0)?.min(capacity - 1))
}

fn check_feasible_pi0<T: Scalar>(pi0: &T, capacity: usize) -> Result<(), OptimizerError> {
    if capacity == 0 {
        return Err(invalid("buffer capacity must be at least 1"));
    }
    let floor = T::one() / (T::one() + two::<T>() * T::from_usize_lossless(capacity));
    if *pi0 < floor.clone() - T::analytic_tol() {
        return Err(OptimizerError::Infeasible {
            e_max: (T::one() + pi0.clone()).as_f64(),
            threshold: (T::one() + floor).as_f64(),
        });
    }
    if *pi0 > T::one() {
        return Err(invalid(format!(
            "pi0 must not exceed 1, got {}",
            pi0.as_f64()
        )));
    }
    Ok(())
}

/// Closed-form optimum `ρ_1..ρ_K` of the delay LP for idle probability `pi0`.
pub fn rho_star<T: Scalar>(pi0: &T, capacity: usize) -> Result<Vec<T>, OptimizerError> {
    check_feasible_pi0(pi0, capacity)?;
    let k = k_star_clamped(pi0, capacity)?;
    let mass = T::one() / pi0.clone() - T::one();
    let mut rho = vec![T::zero(); capacity];
    for r in rho.iter_mut().take(k) {
        *r = two::<T>();
    }
    let rest = mass - two::<T>() * T::from_usize_lossless(k);
    rho[k] = if rest < T::zero() { T::zero() } else { rest };
    Ok(rho)
}

/// `Σ k ρ_k`, the LP objective without the `π_0/(2λ)` factor.
pub fn weighted_mass<T: Scalar>(rho: &[T]) -> T {
    rho.iter().enumerate().fold(T::zero(), |acc, (i, r)| {
        acc + T::from_usize_lossless(i + 1) * r.clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub rho: Vec<T>,
    /// `Σ k ρ_k`.
    pub objective: T,
}

/// Solves the delay LP with the in-repo simplex, independently of
/// [`rho_star`].
pub fn lp_oracle<T: Scalar>(pi0: &T, capacity: usize) -> Result<LpSolution<T>, OptimizerError> {
    if capacity == 0 {
        return Err(invalid("buffer capacity must be at least 1"));
    }
    if *pi0 <= T::zero() || *pi0 > T::one() {
        return Err(invalid(format!(
            "pi0 must lie in (0, 1], got {}",
            pi0.as_f64()
        )));
    }
    let unit = |i: usize| {
        let mut row = vec![T::zero(); capacity];
        row[i] = T::one();
        row
    };
    let weights = (1..=capacity).map(T::from_usize_lossless).collect();
    let mut lp = LinearProgram::new(weights);
    lp.constrain(
        vec![T::one(); capacity],
        Relation::Eq,
        T::one() / pi0.clone() - T::one(),
    );
    lp.constrain(unit(0), Relation::Le, two::<T>());
    for k in 0..capacity - 1 {
        let mut row = unit(k + 1);
        row[k] = -T::one();
        lp.constrain(row, Relation::Le, T::zero());
    }
    match lp.solve() {
        LpOutcome::Optimal { x, objective } => Ok(LpSolution { rho: x, objective }),
        LpOutcome::Infeasible => {
            let floor = T::one() / (T::one() + two::<T>() * T::from_usize_lossless(capacity));
            Err(OptimizerError::Infeasible {
                e_max: (T::one() + pi0.clone()).as_f64(),
                threshold: (T::one() + floor).as_f64(),
            })
        }
        LpOutcome::Unbounded => unreachable!("objective is bounded below by zero"),
    }
}

/// Optimal mean delay, or the distinguished infeasible regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Delay<T> {
    Finite(T),
    Infeasible,
}

impl<T: Scalar> Delay<T> {
    pub fn finite(&self) -> Option<&T> {
        match self {
            Delay::Finite(d) => Some(d),
            Delay::Infeasible => None,
        }
    }
}

fn below_threshold<T: Scalar>(e_max: &T, capacity: usize) -> bool {
    *e_max < energy_threshold::<T>(capacity) - T::analytic_tol()
}

/// Minimal loss-free mean delay under normalized energy budget `e_max`:
/// `(k*+1)/(2λ) · [1 - (Ē^max - 1)(k*+1)]` on `[1 + 1/(1+2K), 2]`, zero
/// above 2, infeasible below the threshold.
pub fn optimal_delay<T: Scalar>(
    e_max: &T,
    capacity: usize,
    lambda: &T,
) -> Result<Delay<T>, OptimizerError> {
    check_common(capacity, lambda)?;
    if below_threshold(e_max, capacity) {
        return Ok(Delay::Infeasible);
    }
    if *e_max > two::<T>() {
        return Ok(Delay::Finite(T::zero()));
    }
    let pi0 = pi0_star(e_max);
    let steps = T::from_usize_lossless(k_star_clamped(&pi0, capacity)? + 1);
    let d = steps.clone() / (two::<T>() * lambda.clone())
        * (T::one() - (e_max.clone() - T::one()) * steps);
    Ok(Delay::Finite(if d < T::zero() { T::zero() } else { d }))
}

/// One point of the optimal trade-off together with a policy achieving it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint<T> {
    pub e_max: T,
    pub delay: T,
    pub k_star: usize,
    /// `ρ_1..ρ_K`.
    pub rho: Vec<T>,
    pub policy: EncPolicy<T>,
}

/// Optimal ENC parameters for budget `e_max`.
///
/// Rates follow the lowest-states-first solution: `λ_0 = 2λ`, `λ_k = λ` up
/// to `k*`, zero above, `μ_{k*+1} = 2λ/ρ_{k*+1}` and `μ_k = λ` elsewhere.
/// When `ρ_{k*+1}` vanishes (budget exactly on a breakpoint) the chain is cut
/// one state earlier with `λ_{k*} = 0` and `μ_{k*+1} = λ`, which gives the same
/// stationary distribution with finite rates.
pub fn optimal_policy<T: Scalar>(
    e_max: &T,
    capacity: usize,
    lambda: &T,
) -> Result<TradeoffPoint<T>, OptimizerError> {
    check_common(capacity, lambda)?;
    if below_threshold(e_max, capacity) {
        return Err(OptimizerError::Infeasible {
            e_max: e_max.as_f64(),
            threshold: energy_threshold::<T>(capacity).as_f64(),
        });
    }
    let pi0 = pi0_star(e_max);
    let k = k_star_clamped(&pi0, capacity)?;
    let mut rho = rho_star(&pi0, capacity)?;
    let lambda = lambda.clone();

    let mut up = vec![T::zero(); capacity + 1];
    up[0] = two::<T>() * lambda.clone();
    for u in up.iter_mut().take(k + 1).skip(1) {
        *u = lambda.clone();
    }
    let mut down = vec![lambda.clone(); capacity];
    if rho[k] <= T::analytic_tol() {
        rho[k] = T::zero();
        up[k] = T::zero();
    } else {
        down[k] = two::<T>() * lambda.clone() / rho[k].clone();
    }
    let rates = RateParams::new(lambda.clone(), up, down)?;
    let policy = rates_to_policy(&rates)?;
    let delay = match optimal_delay(e_max, capacity, &lambda)? {
        Delay::Finite(d) => d,
        Delay::Infeasible => unreachable!("feasibility checked above"),
    };
    Ok(TradeoffPoint {
        e_max: e_max.clone(),
        delay,
        k_star: k,
        rho,
        policy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CurvePoint<T> {
    Feasible(TradeoffPoint<T>),
    Infeasible { e_max: T },
}

impl<T: Scalar> CurvePoint<T> {
    pub fn e_max(&self) -> &T {
        match self {
            CurvePoint::Feasible(p) => &p.e_max,
            CurvePoint::Infeasible { e_max } => e_max,
        }
    }

    pub fn delay(&self) -> Delay<T> {
        match self {
            CurvePoint::Feasible(p) => Delay::Finite(p.delay.clone()),
            CurvePoint::Infeasible { .. } => Delay::Infeasible,
        }
    }
}

/// Evaluates the optimal trade-off at each budget of `grid`, in grid order.
pub fn tradeoff_curve<T: Scalar>(
    capacity: usize,
    lambda: &T,
    grid: &[T],
) -> Result<Vec<CurvePoint<T>>, OptimizerError> {
    check_common(capacity, lambda)?;
    grid.iter()
        .map(|e| {
            if *e <= T::zero() {
                return Err(invalid(format!(
                    "energy budget must be positive, got {}",
                    e.as_f64()
                )));
            }
            match optimal_policy(e, capacity, lambda) {
                Ok(p) => Ok(CurvePoint::Feasible(p)),
                Err(OptimizerError::Infeasible { .. }) => {
                    Ok(CurvePoint::Infeasible { e_max: e.clone() })
                }
                Err(other) => Err(other),
            }
        })
        .collect()
}

fn check_xi<T: Scalar>(xi: &T, capacity: usize) -> Result<(), OptimizerError> {
    let cap = T::one() / (T::one() + two::<T>() * T::from_usize_lossless(capacity));
    if *xi < -T::input_tol() || *xi > cap.clone() + T::input_tol() {
        return Err(invalid(format!(
            "allowed loss {} outside [0, {}]: loss beyond 1/(1+2K) cannot buy energy",
            xi.as_f64(),
            cap.as_f64()
        )));
    }
    Ok(())
}

/// Minimal delay when a normalized loss `xi` is tolerated and the budget lies
/// in `[1 + 1/(1+2K) - 2ξ, 1 + 1/(1+2K)]`: `K/(2λ) · [1 - (Ē^max - 1 + 2ξ) K]`.
pub fn lossy_optimal_delay<T: Scalar>(
    e_max: &T,
    xi: &T,
    capacity: usize,
    lambda: &T,
) -> Result<T, OptimizerError> {
    check_common(capacity, lambda)?;
    check_xi(xi, capacity)?;
    let hi = energy_threshold::<T>(capacity);
    let lo = hi.clone() - two::<T>() * xi.clone();
    let tol = T::input_tol();
    if *e_max < lo.clone() - tol.clone() || *e_max > hi.clone() + tol {
        return Err(invalid(format!(
            "energy budget {} outside the lossy window [{}, {}]",
            e_max.as_f64(),
            lo.as_f64(),
            hi.as_f64()
        )));
    }
    let k = T::from_usize_lossless(capacity);
    Ok(k.clone() / (two::<T>() * lambda.clone())
        * (T::one() - (e_max.clone() - T::one() + two::<T>() * xi.clone()) * k))
}

/// Which `g` vector [`lossy_policy`] builds below the full state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossyVariant {
    /// `g_k = 0` for `k < K`: conventional coding with a partial send at the
    /// full state. Realizes `π_0 = 1/(1+2K)` and loss exactly `ξ`.
    #[default]
    Conventional,
    /// `g_k = 1` for `k < K`, read literally from the printed parameter
    /// table. The chain then never leaves state 0 and loses nothing.
    Literal,
}

/// Policy with `f ≡ 0` and `g_K = 1 - (1+2K)ξ` achieving normalized loss `ξ`.
pub fn lossy_policy<T: Scalar>(
    xi: &T,
    capacity: usize,
    variant: LossyVariant,
) -> Result<EncPolicy<T>, OptimizerError> {
    if capacity == 0 {
        return Err(invalid("buffer capacity must be at least 1"));
    }
    check_xi(xi, capacity)?;
    let below = match variant {
        LossyVariant::Conventional => T::zero(),
        LossyVariant::Literal => T::one(),
    };
    let mut g = vec![below; capacity + 1];
    g[capacity] =
        T::one() - (T::one() + two::<T>() * T::from_usize_lossless(capacity)) * xi.clone();
    Ok(EncPolicy::new(g, vec![T::zero(); capacity + 1])?)
}

/// Normalized energy budget with an optional loss allowance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget<T> {
    pub e_max: T,
    pub capacity: usize,
    pub lambda: T,
    pub xi_allowed: T,
}

impl<T: Scalar> EnergyBudget<T> {
    pub fn new(
        e_max: T,
        capacity: usize,
        lambda: T,
        xi_allowed: T,
    ) -> Result<Self, OptimizerError> {
        check_common(capacity, &lambda)?;
        if e_max <= T::zero() {
            return Err(invalid(format!(
                "energy budget must be positive, got {}",
                e_max.as_f64()
            )));
        }
        check_xi(&xi_allowed, capacity)?;
        Ok(Self {
            e_max,
            capacity,
            lambda,
            xi_allowed,
        })
    }

    /// Loss-free curve when no loss is allowed, the lossy formula otherwise.
    pub fn optimal_delay(&self) -> Result<Delay<T>, OptimizerError> {
        if self.xi_allowed == T::zero() {
            optimal_delay(&self.e_max, self.capacity, &self.lambda)
        } else {
            lossy_optimal_delay(&self.e_max, &self.xi_allowed, self.capacity, &self.lambda)
                .map(Delay::Finite)
        }
    }

    /// A policy for the budget. With a loss allowance this is
    /// [`lossy_policy`], which sits at the lower edge of the lossy window.
    pub fn policy(&self) -> Result<EncPolicy<T>, OptimizerError> {
        if self.xi_allowed == T::zero() {
            Ok(optimal_policy(&self.e_max, self.capacity, &self.lambda)?.policy)
        } else {
            lossy_policy(&self.xi_allowed, self.capacity, LossyVariant::default())
        }
    }
}
