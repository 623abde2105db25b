//! Truncation of the state space, generator assembly and stationary solves.
//!
//! The truncated chain drops arrivals that would exceed a queue cap and keeps
//! every service and replenishment transition. Cuts that separate queue
//! levels below the caps, or inventory levels, therefore carry the same flows
//! as in the infinite chain, and the partial-balance identities checked in
//! [`crate::analysis`] hold to machine precision on the truncated solution.

mod generator;
pub mod gth;
mod marginal;
pub mod power;
mod space;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::State;

pub use generator::{build_generator, GeneratorMatrix};
pub use marginal::{marginal, Marginal, MarginalQuery};
pub use space::{enumerate_states, StateSpace, TruncationSpec, DEFAULT_MAX_STATES};

pub const DEFAULT_GTH_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_POWER_TOLERANCE: f64 = 1e-10;
/// Largest `n * w^2` for which `Auto` still picks banded GTH.
pub const DEFAULT_GTH_WORK_LIMIT: f64 = 4e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Auto,
    Gth,
    Power,
    /// Read from a file rather than solved here.
    Imported,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Residual bound; `None` picks the method default.
    pub tolerance: Option<f64>,
    pub max_iterations: usize,
    pub gth_work_limit: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: SolveMethod::Auto,
            tolerance: None,
            max_iterations: 500_000,
            gth_work_limit: DEFAULT_GTH_WORK_LIMIT,
        }
    }
}

/// Stationary probabilities over every state of a truncated box, in the
/// box's lexicographic order. States outside the class reachable from
/// `(0, 0, b)` carry probability zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub probabilities: Vec<f64>,
    pub space: StateSpace,
    /// Achieved `||pi Q||_inf`.
    pub residual: f64,
    pub tolerance: f64,
    pub method: SolveMethod,
    pub iterations: usize,
}

impl StationaryDistribution {
    pub fn trunc(&self) -> TruncationSpec {
        self.space.trunc()
    }

    pub fn b(&self) -> u32 {
        self.space.b()
    }

    pub fn prob(&self, z: State) -> f64 {
        self.space.index_of(z).map_or(0.0, |i| self.probabilities[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (State, f64)> + '_ {
        self.space.iter().zip(self.probabilities.iter().copied())
    }

    /// Wraps probabilities produced elsewhere over the full box of `gen`,
    /// recording their balance residual. No convergence check is applied.
    pub fn from_probabilities(gen: &GeneratorMatrix, probabilities: Vec<f64>, tolerance: f64) -> Result<Self> {
        if probabilities.len() != gen.dimension() {
            return Err(Error::DimensionMismatch {
                expected: gen.dimension(),
                actual: probabilities.len(),
            });
        }
        let residual = max_abs(&gen.left_multiply(&probabilities));
        Ok(StationaryDistribution {
            probabilities,
            space: *gen.space(),
            residual,
            tolerance,
            method: SolveMethod::Imported,
            iterations: 0,
        })
    }

    /// `P(X1 = cap1) + P(X2 = cap2)`.
    pub fn boundary_mass(&self) -> f64 {
        let t = self.trunc();
        crate::numeric::compensated_sum(
            self.iter()
                .map(|(z, p)| p * ((z.n1 == t.cap1) as u8 as f64 + (z.n2 == t.cap2) as u8 as f64)),
        )
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Solves with default options and the given residual bound.
pub fn solve_stationary(gen: &GeneratorMatrix, tol: f64) -> Result<StationaryDistribution> {
    solve_with(
        gen,
        &SolveOptions {
            tolerance: Some(tol),
            ..SolveOptions::default()
        },
    )
}

/// Indices reachable from `start`, in increasing order.
fn reachable_from(gen: &GeneratorMatrix, start: usize) -> Vec<usize> {
    let n = gen.dimension();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        for (j, _) in gen.row(i) {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    (0..n).filter(|&i| seen[i]).collect()
}

fn all_reach_back(gen: &GeneratorMatrix, members: &[usize], local: &[usize], target: usize) -> bool {
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); members.len()];
    for (li, &gi) in members.iter().enumerate() {
        for (gj, _) in gen.row(gi) {
            reverse[local[gj]].push(li);
        }
    }
    let mut seen = vec![false; members.len()];
    let t = local[target];
    seen[t] = true;
    let mut queue = VecDeque::from([t]);
    while let Some(i) = queue.pop_front() {
        for &j in &reverse[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub fn solve_with(gen: &GeneratorMatrix, opts: &SolveOptions) -> Result<StationaryDistribution> {
    let space = *gen.space();
    let start = space
        .index_of(State::full_stock(space.b()))
        .expect("full-stock state is always in the box");
    let members = reachable_from(gen, start);
    let mut local = vec![usize::MAX; gen.dimension()];
    for (li, &gi) in members.iter().enumerate() {
        local[gi] = li;
    }
    if !all_reach_back(gen, &members, &local, start) {
        return Err(Error::Structural(
            "some reachable state cannot return to (0,0,b)".into(),
        ));
    }

    let mut entries = Vec::with_capacity(gen.nonzeros());
    let mut exits = Vec::with_capacity(members.len());
    for (li, &gi) in members.iter().enumerate() {
        for (gj, r) in gen.row(gi) {
            entries.push((li, local[gj], r));
        }
        exits.push(-gen.diagonal(gi));
    }

    let m = members.len();
    let method = match opts.method {
        SolveMethod::Auto => {
            if gth::work_estimate(m, gth::bandwidth(&entries)) <= opts.gth_work_limit {
                SolveMethod::Gth
            } else {
                SolveMethod::Power
            }
        }
        SolveMethod::Imported => {
            return Err(Error::InvalidParameter {
                name: "method",
                reason: "`imported` is not a solver".into(),
            })
        }
        other => other,
    };
    let tolerance = opts.tolerance.unwrap_or(match method {
        SolveMethod::Power => DEFAULT_POWER_TOLERANCE,
        _ => DEFAULT_GTH_TOLERANCE,
    });

    let (local_pi, iterations) = match method {
        SolveMethod::Power => {
            let (x, it, _) = power::solve(m, &entries, &exits, tolerance, opts.max_iterations)?;
            (x, it)
        }
        _ => (gth::solve_banded(m, &entries)?, 0),
    };

    let mut probabilities = vec![0.0; gen.dimension()];
    for (li, &gi) in members.iter().enumerate() {
        probabilities[gi] = local_pi[li];
    }
    let residual = max_abs(&gen.left_multiply(&probabilities));
    if !(residual <= tolerance) {
        return Err(Error::Convergence {
            iterations,
            residual,
            tolerance,
        });
    }
    Ok(StationaryDistribution {
        probabilities,
        space,
        residual,
        tolerance,
        method,
        iterations,
    })
}
