use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

use super::StationaryDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalQuery {
    /// `P(Y = k)`, `k = 0..=b`.
    Inventory,
    /// `P(X1 = n)`, `n = 0..=cap1`.
    Priority,
    /// `P(X2 = n)`, `n = 0..=cap2`.
    Ordinary,
    /// `P(X1 = n | Y > 0)`.
    PriorityGivenStock,
    /// `P(X1 + X2 = n)`, `n = 0..=cap1 + cap2`.
    TotalQueue,
    /// `P(X1 + X2 = n, Y = k)`, row-major in `(n, k)`.
    TotalQueueAndInventory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub values: Vec<f64>,
    /// 1 for vectors, `b + 1` for the joint query.
    pub columns: usize,
    /// Mass of the conditioning event for conditional queries.
    pub conditioning_mass: Option<f64>,
}

pub fn marginal(dist: &StationaryDistribution, query: MarginalQuery) -> Result<Marginal> {
    let t = dist.trunc();
    let b = dist.b() as usize;
    let (len, columns) = match query {
        MarginalQuery::Inventory => (b + 1, 1),
        MarginalQuery::Priority | MarginalQuery::PriorityGivenStock => (t.cap1 as usize + 1, 1),
        MarginalQuery::Ordinary => (t.cap2 as usize + 1, 1),
        MarginalQuery::TotalQueue => (t.cap1 as usize + t.cap2 as usize + 1, 1),
        MarginalQuery::TotalQueueAndInventory => ((t.cap1 as usize + t.cap2 as usize + 1) * (b + 1), b + 1),
    };
    let mut acc = vec![CompensatedSum::new(); len];
    let mut condition = CompensatedSum::new();
    for (z, p) in dist.iter() {
        let total = z.n1 as usize + z.n2 as usize;
        let slot = match query {
            MarginalQuery::Inventory => Some(z.k as usize),
            MarginalQuery::Priority => Some(z.n1 as usize),
            MarginalQuery::Ordinary => Some(z.n2 as usize),
            MarginalQuery::PriorityGivenStock => (z.k > 0).then_some(z.n1 as usize),
            MarginalQuery::TotalQueue => Some(total),
            MarginalQuery::TotalQueueAndInventory => Some(total * (b + 1) + z.k as usize),
        };
        if let Some(i) = slot {
            acc[i] += p;
            condition += p;
        }
    }
    let mut values: Vec<f64> = acc.iter().map(CompensatedSum::value).collect();
    let conditioning_mass = match query {
        MarginalQuery::PriorityGivenStock => {
            let mass = condition.value();
            if !(mass > 0.0) {
                return Err(Error::ZeroConditioningMass("Y > 0"));
            }
            values.iter_mut().for_each(|v| *v /= mass);
            Some(mass)
        }
        _ => None,
    };
    Ok(Marginal {
        values,
        columns,
        conditioning_mass,
    })
}
