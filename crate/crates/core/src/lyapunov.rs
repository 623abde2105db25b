//! Foster-Lyapunov certificate for positive recurrence.
//!
//! The test function is `L(n1, n2, k) = n1 + n2 + alpha(k)` with
//! `alpha(k) = (b - k) * eta / (2 mu)` and `eta = mu - lambda1 - lambda2`.
//! Outside the finite set `F = {n1 + n2 = 0}` the generator drift of `L` is
//! bounded by `-eps`, `eps = (eta / 2) * min(1, nu / mu)`, whenever `eta > 0`.
//! Drift is always evaluated as the generic sum over [`crate::model::transitions`]
//! so the rates have one source of truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{transitions, ModelParams, State};
use crate::solver::TruncationSpec;

/// Whether the stability condition is known to be necessary as well.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sharpness {
    /// `p = 1`: the process is ergodic if and only if `lambda1 + lambda2 < mu`.
    Sharp,
    /// `p < 1`: the condition is only known to be sufficient.
    SufficientOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityVerdict {
    pub stable: bool,
    pub eta: f64,
    /// Certified drift bound; present only when `stable`.
    pub epsilon: Option<f64>,
    pub sharpness: Sharpness,
}

/// `mu - lambda1 - lambda2` with the sign of the exact real difference:
/// the rounding error of `lambda1 + lambda2` is carried separately
/// (two-sum), so parameters one ulp either side of the boundary classify
/// correctly.
pub fn stability_margin(params: &ModelParams) -> f64 {
    let (a, b) = (params.lambda1(), params.lambda2());
    let sum = a + b;
    let bb = sum - a;
    let err = (a - (sum - bb)) + (b - bb);
    (params.mu() - sum) - err
}

pub fn check_ergodicity(params: &ModelParams) -> ErgodicityVerdict {
    let eta = stability_margin(params);
    let stable = eta > 0.0;
    ErgodicityVerdict {
        stable,
        eta,
        epsilon: stable.then(|| epsilon_for(params, eta)),
        sharpness: if params.p() == 1.0 {
            Sharpness::Sharp
        } else {
            Sharpness::SufficientOnly
        },
    }
}

fn epsilon_for(params: &ModelParams, eta: f64) -> f64 {
    eta / 2.0 * (params.nu() / params.mu()).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCertificate {
    /// `alpha(k)` for `k = 0..=b`.
    pub alpha: Vec<f64>,
    pub eta: f64,
    pub epsilon: f64,
}

impl LyapunovCertificate {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let eta = stability_margin(params);
        if !(eta > 0.0) {
            return Err(Error::CertificateInapplicable { eta });
        }
        let b = params.b();
        let step = eta / (2.0 * params.mu());
        Ok(LyapunovCertificate {
            alpha: (0..=b).map(|k| (b - k) as f64 * step).collect(),
            eta,
            epsilon: epsilon_for(params, eta),
        })
    }

    /// Membership in the exception set `n1 + n2 = 0`.
    pub fn in_exception_set(z: State) -> bool {
        z.n1 == 0 && z.n2 == 0
    }

    pub fn value(&self, z: State) -> f64 {
        z.total_queue() as f64 + self.alpha[z.k as usize]
    }
}

pub fn lyapunov_value(cert: &LyapunovCertificate, z: State) -> f64 {
    cert.value(z)
}

/// `sum_{z' != z} q(z, z') (L(z') - L(z))`.
pub fn drift(params: &ModelParams, cert: &LyapunovCertificate, z: State) -> Result<f64> {
    let here = z.total_queue() as i64;
    let mut acc = 0.0;
    for t in transitions(params, z)? {
        // Queue and inventory parts are differenced separately so large
        // queue lengths do not swamp alpha in floating point.
        let dq = (t.target.total_queue() as i64 - here) as f64;
        let da = cert.alpha[t.target.k as usize] - cert.alpha[z.k as usize];
        acc += t.rate * (dq + da);
    }
    Ok(acc)
}

/// Floating-point slack allowed above `-eps` before a state counts as a
/// violation; the bound is attained with equality in some cases (e.g.
/// `k = b` when `nu >= mu`).
pub fn drift_slack(params: &ModelParams) -> f64 {
    1e-12 * (params.lambda1() + params.lambda2() + params.mu() + params.nu())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEntry {
    pub state: State,
    pub drift: f64,
    pub in_f: bool,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    /// False when `eta <= 0`; nothing is evaluated in that case.
    pub applicable: bool,
    pub bounds: TruncationSpec,
    pub b: u32,
    pub eta: f64,
    pub epsilon: f64,
    /// `None` when the box has no state outside `F`.
    pub max_drift_outside_f: Option<f64>,
    pub violations: Vec<DriftEntry>,
    pub drift_on_f: Vec<DriftEntry>,
    /// Every evaluated state in lexicographic order.
    #[serde(skip)]
    pub entries: Vec<DriftEntry>,
}

impl DriftReport {
    pub fn passed(&self) -> bool {
        self.applicable && self.violations.is_empty()
    }
}

/// Evaluates the drift at every state of `[0, cap1] x [0, cap2] x [0, b]`.
pub fn verify_drift_bound(params: &ModelParams, bounds: TruncationSpec) -> DriftReport {
    let eta = stability_margin(params);
    let cert = match LyapunovCertificate::new(params) {
        Ok(c) => c,
        Err(_) => {
            return DriftReport {
                applicable: false,
                bounds,
                b: params.b(),
                eta,
                epsilon: epsilon_for(params, eta),
                max_drift_outside_f: None,
                violations: Vec::new(),
                drift_on_f: Vec::new(),
                entries: Vec::new(),
            }
        }
    };
    let threshold = -cert.epsilon + drift_slack(params);
    let entries: Vec<DriftEntry> = (0..=bounds.cap1)
        .into_par_iter()
        .flat_map_iter(|n1| {
            let cert = &cert;
            (0..=bounds.cap2).flat_map(move |n2| {
                (0..=params.b()).map(move |k| {
                    let state = State::new(n1, n2, k);
                    let d = drift(params, cert, state).expect("box states are valid");
                    let in_f = LyapunovCertificate::in_exception_set(state);
                    DriftEntry {
                        state,
                        drift: d,
                        in_f,
                        violation: !in_f && d > threshold,
                    }
                })
            })
        })
        .collect();
    let max_drift_outside_f = entries
        .iter()
        .filter(|e| !e.in_f)
        .map(|e| e.drift)
        .reduce(f64::max);
    DriftReport {
        applicable: true,
        bounds,
        b: params.b(),
        eta: cert.eta,
        epsilon: cert.epsilon,
        max_drift_outside_f,
        violations: entries.iter().filter(|e| e.violation).copied().collect(),
        drift_on_f: entries.iter().filter(|e| e.in_f).copied().collect(),
        entries,
    }
}
