//! Oracles shared by integration tests. Nothing here calls into the
//! library's analysis or solver code paths; only the parameter type and
//! the transition list are reused.

#![allow(dead_code)]

use qinv::model::{transitions, ModelParams, State};
use qinv::solver::TruncationSpec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Drift of `L = n1 + n2 + (b - k) eta / (2 mu)` at a state with a
/// non-empty queue, by inventory regime.
pub fn drift_case_form(params: &ModelParams, k: u32) -> f64 {
    let (l1, l2, mu, nu, p) = (params.lambda1(), params.lambda2(), params.mu(), params.nu(), params.p());
    let eta = mu - l1 - l2;
    let half = eta / 2.0;
    if k == 0 {
        -half * nu / mu
    } else if k <= params.s() {
        l1 + p * l2 - mu + half - half * nu / mu
    } else if k < params.b() {
        -half - half * nu / mu
    } else {
        -half
    }
}

pub fn epsilon(params: &ModelParams) -> f64 {
    let eta = params.mu() - params.lambda1() - params.lambda2();
    eta / 2.0 * (params.nu() / params.mu()).min(1.0)
}

/// Random parameters with `lambda1 + lambda2 < mu`. `priority_ratio`
/// bounds `lambda1 / mu`.
pub fn random_stable(rng: &mut ChaCha8Rng, max_b: u32, priority_ratio: (f64, f64)) -> ModelParams {
    let mu = rng.random_range(0.5..5.0);
    let l1 = mu * rng.random_range(priority_ratio.0..priority_ratio.1);
    let l2 = (mu - l1) * rng.random_range(0.05..0.95);
    let nu = mu * rng.random_range(0.2..3.0);
    let p = match rng.random_range(0..4) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random_range(0.0..1.0),
    };
    let b = rng.random_range(2..=max_b);
    let s = rng.random_range(1..b);
    ModelParams::new(l1, l2, mu, nu, p, s, b).unwrap()
}

/// Stationary vector of the generator given by off-diagonal `(i, j, rate)`
/// entries, by Gaussian elimination with partial pivoting on
/// `pi Q = 0, sum pi = 1`.
pub fn dense_stationary(n: usize, entries: &[(usize, usize, f64)]) -> Vec<f64> {
    let mut q = vec![vec![0.0; n]; n];
    for &(i, j, r) in entries {
        q[i][j] += r;
        q[i][i] -= r;
    }
    let mut m: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| q[i][j]).collect()).collect();
    let mut rhs = vec![0.0; n];
    m[n - 1] = vec![1.0; n];
    rhs[n - 1] = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, piv);
        rhs.swap(c, piv);
        let pivot_row = m[c].clone();
        for r in 0..n {
            if r != c && m[r][c] != 0.0 {
                let f = m[r][c] / pivot_row[c];
                for (x, p) in m[r][c..].iter_mut().zip(&pivot_row[c..]) {
                    *x -= f * p;
                }
                rhs[r] -= f * rhs[c];
            }
        }
    }
    (0..n).map(|i| rhs[i] / m[i][i]).collect()
}

/// Inventory chain under zero service time, solved densely.
pub fn instant_dense(params: &ModelParams) -> Vec<f64> {
    let b = params.b() as usize;
    let mut e = Vec::new();
    for k in 0..=b {
        if k < b {
            e.push((k, k + 1, params.nu()));
        }
        if k > 0 {
            let down = if k as u32 <= params.s() {
                params.lambda1() + params.p() * params.lambda2()
            } else {
                params.lambda1() + params.lambda2()
            };
            if down > 0.0 {
                e.push((k, k - 1, down));
            }
        }
    }
    dense_stationary(b + 1, &e)
}

/// `|flow up - flow down|` across every level cut of `level`, summing
/// `pi(z) * rate` edge by edge over the truncated box. `cuts` levels
/// `0..cuts` are reported.
pub fn cut_residuals(
    params: &ModelParams,
    trunc: TruncationSpec,
    prob: impl Fn(State) -> f64,
    level: impl Fn(State) -> u32,
    cuts: u32,
) -> Vec<f64> {
    let mut up = vec![0.0; cuts as usize];
    let mut down = vec![0.0; cuts as usize];
    for n1 in 0..=trunc.cap1 {
        for n2 in 0..=trunc.cap2 {
            for k in 0..=params.b() {
                let z = State::new(n1, n2, k);
                let pz = prob(z);
                if pz == 0.0 {
                    continue;
                }
                for t in transitions(params, z).unwrap() {
                    if !trunc.contains(t.target) {
                        continue;
                    }
                    let (a, b) = (level(z), level(t.target));
                    if b == a + 1 && a < cuts {
                        up[a as usize] += pz * t.rate;
                    } else if a == b + 1 && b < cuts {
                        down[b as usize] += pz * t.rate;
                    }
                }
            }
        }
    }
    up.iter().zip(&down).map(|(u, d)| (u - d).abs()).collect()
}

/// `P(X1 = n, Y > 0)` for `n = 0..=cap1`.
pub fn priority_levels_with_stock(trunc: TruncationSpec, b: u32, prob: impl Fn(State) -> f64) -> Vec<f64> {
    (0..=trunc.cap1)
        .map(|n1| {
            let mut s = 0.0;
            for n2 in 0..=trunc.cap2 {
                for k in 1..=b {
                    s += prob(State::new(n1, n2, k));
                }
            }
            s
        })
        .collect()
}

/// `P(Y = k)` for `k = 0..=b`.
pub fn inventory_marginal(trunc: TruncationSpec, b: u32, prob: impl Fn(State) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; b as usize + 1];
    for n1 in 0..=trunc.cap1 {
        for n2 in 0..=trunc.cap2 {
            for (k, slot) in out.iter_mut().enumerate() {
                *slot += prob(State::new(n1, n2, k as u32));
            }
        }
    }
    out
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
