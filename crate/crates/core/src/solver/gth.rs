//! Grassmann-Taksar-Heyman elimination on a banded generator.
//!
//! GTH never subtracts: pivots are recomputed as sums of the remaining
//! off-diagonal rates, so the stationary vector keeps componentwise relative
//! accuracy even for probabilities many orders of magnitude apart. With the
//! lexicographic state order every transition stays within a fixed band, and
//! elimination from the last state downward only creates fill inside that
//! band, so the cost is `O(n w^2)`.

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Dense band storage: row `i` holds columns `i - w ..= i + w`.
struct Band {
    w: usize,
    data: Vec<f64>,
}

impl Band {
    fn new(n: usize, w: usize) -> Self {
        Band {
            w,
            data: vec![0.0; n * (2 * w + 1)],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.w);
        i * (2 * self.w + 1) + (j + self.w - i)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.at(i, j)]
    }
}

/// Half bandwidth of a set of off-diagonal entries.
pub fn bandwidth(entries: &[(usize, usize, f64)]) -> usize {
    entries.iter().map(|&(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
}

/// Estimated multiply-add count of [`solve_banded`].
pub fn work_estimate(n: usize, w: usize) -> f64 {
    n as f64 * (w as f64) * (w as f64)
}

/// Stationary vector of an irreducible generator given by its off-diagonal
/// entries `(row, column, rate)` on states `0..n`.
pub fn solve_banded(n: usize, entries: &[(usize, usize, f64)]) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Structural("empty state set".into()));
    }
    let w = bandwidth(entries);
    let mut a = Band::new(n, w);
    for &(i, j, r) in entries {
        if i != j {
            let idx = a.at(i, j);
            a.data[idx] += r;
        }
    }

    let mut pivots = vec![0.0; n];
    let mut pivot_row = vec![0.0; w];
    for k in (1..n).rev() {
        let lo = k.saturating_sub(w);
        let width = k - lo;
        let start = a.at(k, lo);
        pivot_row[..width].copy_from_slice(&a.data[start..start + width]);
        let s: f64 = pivot_row[..width].iter().sum();
        if !(s > 0.0) {
            return Err(Error::Structural(format!(
                "state {k} has no path to lower-indexed states during elimination"
            )));
        }
        pivots[k] = s;
        for i in lo..k {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            let f = aik / s;
            let row_start = a.at(i, lo);
            let row = &mut a.data[row_start..row_start + width];
            for (x, &p) in row.iter_mut().zip(&pivot_row[..width]) {
                *x += f * p;
            }
        }
    }

    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        let lo = k.saturating_sub(w);
        let mut acc = 0.0;
        for (i, &p) in pi.iter().enumerate().take(k).skip(lo) {
            acc += p * a.get(i, k);
        }
        pi[k] = acc / pivots[k];
    }
    let total = compensated_sum(pi.iter().copied());
    for p in &mut pi {
        *p /= total;
    }
    Ok(pi)
}
