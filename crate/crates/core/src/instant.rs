//! Inventory distribution when service takes no time.
//!
//! With instant service no queue forms and the on-hand inventory is a finite
//! birth-death process on `0..=b`: up-rate `nu` below `b`, down-rate
//! `lambda1 + p lambda2` at levels `1..=s` and `lambda1 + lambda2` above `s`.
//! `mu` plays no role here and is ignored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Below this distance from 1 a geometric ratio is summed term by term
/// instead of through `(1 - r^n) / (1 - r)`.
pub const RATIO_ONE_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryDistribution {
    pub theta: Vec<f64>,
    pub params: ModelParams,
}

fn demand_rate(params: &ModelParams, k: u32) -> f64 {
    if k <= params.s() {
        params.lambda1() + params.p() * params.lambda2()
    } else {
        params.lambda1() + params.lambda2()
    }
}

/// `sum_{j=from}^{to} r^j`.
fn geometric_sum(r: f64, from: u32, to: u32) -> f64 {
    if from > to {
        return 0.0;
    }
    if (r - 1.0).abs() < RATIO_ONE_THRESHOLD {
        (from..=to).map(|j| r.powi(j as i32)).sum()
    } else {
        (r.powi(from as i32) - r.powi(to as i32 + 1)) / (1.0 - r)
    }
}

pub fn instant_stationary(params: &ModelParams) -> InventoryDistribution {
    let (s, b) = (params.s(), params.b());
    let low = params.nu() / (params.lambda1() + params.p() * params.lambda2());
    let high = params.nu() / (params.lambda1() + params.lambda2());
    let log_weight = |k: u32| {
        if k <= s {
            k as f64 * low.ln()
        } else {
            s as f64 * low.ln() + (k - s) as f64 * high.ln()
        }
    };
    let peak = (0..=b).map(log_weight).fold(f64::NEG_INFINITY, f64::max);

    let theta = if peak < 600.0 {
        let theta0 = 1.0 / (geometric_sum(low, 0, s) + low.powi(s as i32) * geometric_sum(high, 1, b - s));
        (0..=b)
            .map(|k| {
                if k <= s {
                    low.powi(k as i32) * theta0
                } else {
                    low.powi(s as i32) * high.powi((k - s) as i32) * theta0
                }
            })
            .collect()
    } else {
        // The weights overflow; normalize in log space relative to the peak.
        let w: Vec<f64> = (0..=b).map(|k| (log_weight(k) - peak).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    };
    InventoryDistribution { theta, params: *params }
}

/// Largest absolute residual of the `b + 1` balance equations.
pub fn instant_balance_residual(params: &ModelParams, dist: &InventoryDistribution) -> Result<f64> {
    let b = params.b() as usize;
    let theta = &dist.theta;
    if theta.len() != b + 1 {
        return Err(Error::DimensionMismatch {
            expected: b + 1,
            actual: theta.len(),
        });
    }
    let nu = params.nu();
    let mut worst = 0.0f64;
    for k in 0..=b {
        let down_here = if k > 0 { demand_rate(params, k as u32) } else { 0.0 };
        let up_here = if k < b { nu } else { 0.0 };
        let from_above = if k < b { theta[k + 1] * demand_rate(params, k as u32 + 1) } else { 0.0 };
        let from_below = if k > 0 { theta[k - 1] * nu } else { 0.0 };
        worst = worst.max((theta[k] * (down_here + up_here) - from_above - from_below).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let p = ModelParams::new(1.0, 1.0, 3.0, 1.0, 0.5, 1, 2).unwrap();
        let d = instant_stationary(&p);
        let want = [0.5, 1.0 / 3.0, 1.0 / 6.0];
        for (g, w) in d.theta.iter().zip(want) {
            assert!((g - w).abs() < 1e-15, "{g} vs {w}");
        }
    }

    #[test]
    fn uniform_when_all_ratios_are_one() {
        let p = ModelParams::new(1.0, 2.0, 3.0, 3.0, 1.0, 2, 5).unwrap();
        let d = instant_stationary(&p);
        for t in &d.theta {
            assert!((t - 1.0 / 6.0).abs() < 1e-15);
        }
        assert!(instant_balance_residual(&p, &d).unwrap() < 1e-15);
    }

    #[test]
    fn last_ratio() {
        let p = ModelParams::new(0.7, 1.3, 3.0, 1.1, 0.2, 2, 6).unwrap();
        let d = instant_stationary(&p);
        assert!((d.theta[6] / d.theta[5] - 1.1 / 2.0).abs() < 1e-14);
    }

    #[test]
    fn near_one_ratio_matches_term_by_term() {
        let p = ModelParams::new(1.0, 1.0, 3.0, 1.0 + 1e-11, 0.0, 3, 6).unwrap();
        let d = instant_stationary(&p);
        assert!(instant_balance_residual(&p, &d).unwrap() < 1e-12);
        assert!((d.theta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_vector_is_not_balanced() {
        let p = ModelParams::new(1.0, 1.0, 3.0, 1.0, 0.5, 1, 2).unwrap();
        let d = InventoryDistribution { theta: vec![1.0 / 3.0; 3], params: p };
        assert!(instant_balance_residual(&p, &d).unwrap() > 0.0);
        let short = InventoryDistribution { theta: vec![1.0], params: p };
        assert!(instant_balance_residual(&p, &short).is_err());
    }

    #[test]
    fn extreme_ratios_do_not_overflow() {
        let p = ModelParams::new(1e-3, 1e-3, 1.0, 1e3, 0.5, 100, 400).unwrap();
        let d = instant_stationary(&p);
        assert!(d.theta.iter().all(|t| t.is_finite()));
        assert!((d.theta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.theta[400] > 0.99);
    }

    #[test]
    fn raising_p_lowers_every_ratio() {
        let base = ModelParams::new(0.8, 1.7, 3.0, 1.4, 0.1, 3, 6).unwrap();
        let mut prev = instant_stationary(&base);
        for p in [0.3, 0.6, 1.0] {
            let next = instant_stationary(&base.with(crate::model::ParamAxis::P, p).unwrap());
            for k in 1..=6 {
                assert!(next.theta[k] / next.theta[0] <= prev.theta[k] / prev.theta[0]);
            }
            prev = next;
        }
    }

    #[test]
    fn p_one_is_single_class_truncated_geometric() {
        let p = ModelParams::new(0.6, 0.9, 3.0, 2.0, 1.0, 2, 5).unwrap();
        let d = instant_stationary(&p);
        let r: f64 = 2.0 / 1.5;
        let norm: f64 = (0..=5).map(|k| r.powi(k)).sum();
        for k in 0..=5 {
            assert!((d.theta[k] - r.powi(k as i32) / norm).abs() < 1e-14);
        }
    }
}
