//! Small dense two-phase simplex.
//!
//! Minimizes `c·x` subject to linear rows and `x ≥ 0`. Pivoting follows
//! Bland's rule so the method terminates on degenerate problems, and the
//! whole solver is generic over [`Scalar`], which makes it exact on
//! rationals.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub coefficients: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Optimal { x: Vec<T>, objective: T },
    Infeasible,
    Unbounded,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(objective: Vec<T>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn constrain(&mut self, coefficients: Vec<T>, relation: Relation, rhs: T) -> &mut Self {
        assert_eq!(coefficients.len(), self.objective.len(), "row width");
        self.constraints.push(Constraint {
            coefficients,
            relation,
            rhs,
        });
        self
    }

    pub fn solve(&self) -> LpOutcome<T> {
        Tableau::build(self).run(&self.objective)
    }
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    n_original: usize,
    first_artificial: usize,
    pivot_tol: T,
    feasibility_tol: T,
}

impl<T: Scalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>) -> Self {
        let n = lp.objective.len();
        let m = lp.constraints.len();
        // flip rows so every right-hand side is non-negative
        let normalized: Vec<(Vec<T>, Relation, T)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < T::zero() {
                    let flipped = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (
                        c.coefficients.iter().map(|a| -a.clone()).collect(),
                        flipped,
                        -c.rhs.clone(),
                    )
                } else {
                    (c.coefficients.clone(), c.relation, c.rhs.clone())
                }
            })
            .collect();
        let n_slack = normalized
            .iter()
            .filter(|(_, r, _)| *r != Relation::Eq)
            .count();
        let n_artificial = normalized
            .iter()
            .filter(|(_, r, _)| *r != Relation::Le)
            .count();
        let width = n + n_slack + n_artificial;
        let first_artificial = n + n_slack;

        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let (mut next_slack, mut next_artificial) = (n, first_artificial);
        for (coefficients, relation, b) in normalized {
            let mut row = coefficients;
            row.resize(width, T::zero());
            match relation {
                Relation::Le => {
                    row[next_slack] = T::one();
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -T::one();
                    next_slack += 1;
                    row[next_artificial] = T::one();
                    basis.push(next_artificial);
                    next_artificial += 1;
                }
                Relation::Eq => {
                    row[next_artificial] = T::one();
                    basis.push(next_artificial);
                    next_artificial += 1;
                }
            }
            rows.push(row);
            rhs.push(b);
        }
        let pivot_tol = if T::is_exact() {
            T::zero()
        } else {
            T::analytic_tol()
        };
        Self {
            rows,
            rhs,
            basis,
            n_original: n,
            first_artificial,
            pivot_tol,
            feasibility_tol: T::input_tol(),
        }
    }

    fn width(&self) -> usize {
        self.rows.first().map_or(self.n_original, Vec::len)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for x in self.rows[r].iter_mut() {
            *x = x.clone() / p.clone();
        }
        self.rhs[r] = self.rhs[r].clone() / p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let factor = self.rows[i][c].clone();
            if factor == T::zero() {
                continue;
            }
            for (x, p) in self.rows[i].iter_mut().zip(&pivot_row) {
                *x = x.clone() - factor.clone() * p.clone();
            }
            self.rhs[i] = self.rhs[i].clone() - factor * pivot_rhs.clone();
        }
        self.basis[r] = c;
    }

    fn reduced_cost(&self, cost: &[T], j: usize) -> T {
        self.rows
            .iter()
            .zip(&self.basis)
            .fold(cost[j].clone(), |acc, (row, &b)| {
                acc - cost[b].clone() * row[j].clone()
            })
    }

    fn objective(&self, cost: &[T]) -> T {
        self.rhs
            .iter()
            .zip(&self.basis)
            .fold(T::zero(), |acc, (b, &j)| acc + cost[j].clone() * b.clone())
    }

    /// Runs simplex iterations over the columns below `limit`. Returns
    /// `false` when the objective is unbounded below.
    fn optimize(&mut self, cost: &[T], limit: usize) -> bool {
        loop {
            let entering = (0..limit).find(|&j| {
                !self.basis.contains(&j) && self.reduced_cost(cost, j) < -self.pivot_tol.clone()
            });
            let Some(c) = entering else {
                return true;
            };
            let mut leaving: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[c] <= self.pivot_tol {
                    continue;
                }
                let ratio = self.rhs[i].clone() / row[c].clone();
                let better = match &leaving {
                    None => true,
                    Some((best_i, best)) => {
                        ratio < *best || (ratio == *best && self.basis[i] < self.basis[*best_i])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
            let Some((r, _)) = leaving else {
                return false;
            };
            self.pivot(r, c);
        }
    }

    fn run(mut self, objective: &[T]) -> LpOutcome<T> {
        let width = self.width();
        if self.first_artificial < width {
            let phase_one: Vec<T> = (0..width)
                .map(|j| {
                    if j >= self.first_artificial {
                        T::one()
                    } else {
                        T::zero()
                    }
                })
                .collect();
            self.optimize(&phase_one, width);
            if self.objective(&phase_one) > self.feasibility_tol {
                return LpOutcome::Infeasible;
            }
            // drive zero-valued artificials out of the basis where possible
            for r in 0..self.rows.len() {
                if self.basis[r] < self.first_artificial {
                    continue;
                }
                let replacement = (0..self.first_artificial).find(|&j| {
                    (self.rows[r][j]).abs() > self.pivot_tol && !self.basis.contains(&j)
                });
                if let Some(c) = replacement {
                    self.pivot(r, c);
                }
            }
        }
        let mut cost = objective.to_vec();
        cost.resize(width, T::zero());
        if !self.optimize(&cost, self.first_artificial) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![T::zero(); self.n_original];
        for (b, &j) in self.rhs.iter().zip(&self.basis) {
            if j < self.n_original {
                x[j] = b.clone();
            }
        }
        let objective = x
            .iter()
            .zip(objective)
            .fold(T::zero(), |acc, (x, c)| acc + x.clone() * c.clone());
        LpOutcome::Optimal { x, objective }
    }
}
