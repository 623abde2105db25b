//! Power iteration on the uniformized chain `P = I + Q / L`.

use crate::error::{Error, Result};

/// Uniformization constant as a multiple of the largest exit rate; the slack
/// above 1 gives every state a self-loop, which makes `P` aperiodic.
pub const UNIFORMIZATION_FACTOR: f64 = 1.01;

/// Runs power iteration on the sub-generator given by off-diagonal entries
/// and exit rates, starting from the uniform vector. Stops once
/// `||x Q||_inf <= tol`.
pub fn solve(
    n: usize,
    entries: &[(usize, usize, f64)],
    exit_rates: &[f64],
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    let max_rate = exit_rates.iter().fold(0.0f64, |m, &r| m.max(r));
    if !(max_rate > 0.0) {
        // A single state with no exits is trivially stationary.
        return Ok((vec![1.0 / n as f64; n], 0, 0.0));
    }
    let lambda = UNIFORMIZATION_FACTOR * max_rate;
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 0..max_iterations {
        y.iter_mut().zip(&x).zip(exit_rates).for_each(|((yi, xi), r)| *yi = -xi * r);
        for &(i, j, r) in entries {
            y[j] += x[i] * r;
        }
        residual = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if residual <= tol {
            return Ok((x, it, residual));
        }
        let mut total = 0.0;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi += yi / lambda;
            total += *xi;
        }
        for xi in &mut x {
            *xi /= total;
        }
    }
    Err(Error::Convergence {
        iterations: max_iterations,
        residual,
        tolerance: tol,
    })
}
