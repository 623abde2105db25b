use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::State;

/// Default ceiling on the number of enumerated states.
pub const DEFAULT_MAX_STATES: usize = 20_000_000;

/// Queue-length caps of the finite box `[0, cap1] x [0, cap2] x [0, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub cap1: u32,
    pub cap2: u32,
}

impl TruncationSpec {
    pub const fn new(cap1: u32, cap2: u32) -> Self {
        TruncationSpec { cap1, cap2 }
    }

    pub fn contains(&self, z: State) -> bool {
        z.n1 <= self.cap1 && z.n2 <= self.cap2
    }
}

/// Lexicographic `(n1, n2, k)` enumeration of a truncated box and its
/// inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    trunc: TruncationSpec,
    b: u32,
    len: usize,
}

impl StateSpace {
    pub fn new(trunc: TruncationSpec, b: u32) -> Result<Self> {
        Self::with_limit(trunc, b, DEFAULT_MAX_STATES)
    }

    pub fn with_limit(trunc: TruncationSpec, b: u32, limit: usize) -> Result<Self> {
        let requested = (trunc.cap1 as u128 + 1) * (trunc.cap2 as u128 + 1) * (b as u128 + 1);
        if requested > limit as u128 {
            return Err(Error::Capacity { requested, limit });
        }
        Ok(StateSpace {
            trunc,
            b,
            len: requested as usize,
        })
    }

    pub fn trunc(&self) -> TruncationSpec {
        self.trunc
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn index_of(&self, z: State) -> Option<usize> {
        if !self.trunc.contains(z) || z.k > self.b {
            return None;
        }
        let stride_k = self.b as usize + 1;
        let stride_n2 = self.trunc.cap2 as usize + 1;
        Some((z.n1 as usize * stride_n2 + z.n2 as usize) * stride_k + z.k as usize)
    }

    pub fn state_at(&self, index: usize) -> Option<State> {
        if index >= self.len {
            return None;
        }
        let stride_k = self.b as usize + 1;
        let stride_n2 = self.trunc.cap2 as usize + 1;
        let k = index % stride_k;
        let rest = index / stride_k;
        Some(State::new((rest / stride_n2) as u32, (rest % stride_n2) as u32, k as u32))
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = State> + '_ {
        (0..self.len).map(move |i| self.state_at(i).expect("index within range"))
    }
}

/// Enumerates the truncated box in lexicographic order.
pub fn enumerate_states(trunc: TruncationSpec, b: u32) -> Result<StateSpace> {
    StateSpace::new(trunc, b)
}
