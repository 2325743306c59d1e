//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

/// Stationary law of the birth-death chain on `0..=K` from the dense global
/// balance equations `πQ = 0`, `Σπ = 1`, solved by Gaussian elimination with
/// partial pivoting. `up` has `K + 1` entries, `down[k - 1]` is the rate out
/// of state `k` towards `k - 1`.
pub fn global_balance(up: &[f64], down: &[f64]) -> Vec<f64> {
    let n = up.len();
    assert_eq!(down.len() + 1, n);
    // generator Q, row i = transitions out of state i
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        if i + 1 < n {
            q[i][i + 1] = up[i];
        }
        if i > 0 {
            q[i][i - 1] = down[i - 1];
        }
        q[i][i] = -(0..n).filter(|&j| j != i).map(|j| q[i][j]).sum::<f64>();
    }
    // A = Qᵀ with the last equation replaced by normalization
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| q[j][i]).collect()).collect();
    let mut b = vec![0.0; n];
    a[n - 1] = vec![1.0; n];
    b[n - 1] = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            let (upper, lower) = a.split_at_mut(row);
            for (x, p) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= factor * p;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|j| a[row][j] * x[j]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Up and down rates of an ENC policy, written out from the policy rules.
pub fn policy_rates(g: &[f64], f: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let k = g.len() - 1;
    let up = (0..=k)
        .map(|i| {
            let base = if i == 0 { 2.0 * lambda } else { lambda };
            if i == k {
                0.0
            } else {
                base * (1.0 - g[i])
            }
        })
        .collect();
    let down = (1..=k).map(|i| lambda + f[i]).collect();
    (up, down)
}

/// Delay, loss and normalized energy of a policy computed from the
/// global-balance solution by counting event rates per state.
pub fn policy_metrics(g: &[f64], f: &[f64], lambda: f64) -> (f64, f64, f64) {
    let k = g.len() - 1;
    let (up, down) = policy_rates(g, f, lambda);
    let pi = global_balance(&up, &down);
    let backlog: f64 = pi.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
    // Little's law over both sources
    let delay = backlog / (2.0 * lambda);
    let loss = pi[k] * lambda * (1.0 - g[k]) / (2.0 * lambda);
    let transmissions: f64 = pi
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let rate = if i == 0 {
                2.0 * lambda * g[0]
            } else {
                // coded on every opposite arrival, plus sends and timer
                lambda + lambda * g[i] + f[i]
            };
            p * rate
        })
        .sum();
    (delay, loss, transmissions / lambda)
}

/// Renewal-theory standard deviation of `N(t)/t` for gaps with the given
/// mean and variance.
pub fn renewal_rate_sd(mean_gap: f64, var_gap: f64, t: f64) -> f64 {
    (var_gap / mean_gap.powi(3) / t).sqrt()
}
