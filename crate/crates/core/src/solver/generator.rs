use crate::error::Result;
use crate::model::{transitions, ModelParams, State};

use super::space::{StateSpace, TruncationSpec};

/// Sparse generator of the truncated chain in compressed-row form.
///
/// Arrivals that would push a queue past its cap are dropped; every other
/// transition of the infinite chain is kept. Diagonal entries make each row
/// sum to zero.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    space: StateSpace,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    rates: Vec<f64>,
    diag: Vec<f64>,
}

pub fn build_generator(params: &ModelParams, trunc: TruncationSpec) -> Result<GeneratorMatrix> {
    let space = StateSpace::new(trunc, params.b())?;
    let n = space.len();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(4 * n);
    let mut rates = Vec::with_capacity(4 * n);
    let mut diag = Vec::with_capacity(n);
    row_ptr.push(0);
    for z in space.iter() {
        let mut out = 0.0;
        for t in transitions(params, z)? {
            let Some(j) = space.index_of(t.target) else {
                debug_assert!(t.kind.is_arrival());
                continue;
            };
            cols.push(j);
            rates.push(t.rate);
            out += t.rate;
        }
        diag.push(-out);
        row_ptr.push(cols.len());
    }
    Ok(GeneratorMatrix {
        space,
        row_ptr,
        cols,
        rates,
        diag,
    })
}

impl GeneratorMatrix {
    pub fn dimension(&self) -> usize {
        self.space.len()
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// Off-diagonal `(column, rate)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.rates[r].iter().copied())
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, r)| r)
    }

    /// `q(from; to)`, zero when either state is outside the box.
    pub fn rate_between(&self, from: State, to: State) -> f64 {
        match (self.space.index_of(from), self.space.index_of(to)) {
            (Some(i), Some(j)) => self.entry(i, j),
            _ => 0.0,
        }
    }

    /// Sum of row `i`, off-diagonals first in stored order, then the diagonal.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, r)| r).sum::<f64>() + self.diag[i]
    }

    pub fn nonzeros(&self) -> usize {
        self.cols.len()
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0, |m, d| m.max(-d))
    }

    /// `x Q` for a row vector `x`.
    pub fn left_multiply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dimension());
        let mut y = vec![0.0; x.len()];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            y[i] += xi * self.diag[i];
            for (j, r) in self.row(i) {
                y[j] += xi * r;
            }
        }
        y
    }
}
