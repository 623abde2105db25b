//! Parameters, states and transition rates of the two-class
//! queueing-inventory process.
//!
//! A state `(n1, n2, k)` records the number of priority customers, the number
//! of ordinary customers (both counting the one in service) and the on-hand
//! inventory. The state space is countably infinite and is never materialized
//! here; see [`crate::solver`] for truncated enumeration.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv;

/// The seven scalar parameters of the system.
///
/// Fields are private so that every value in circulation has passed
/// validation: positive rates, `0 <= p <= 1`, `b >= 2` and `0 < s < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    lambda1: f64,
    lambda2: f64,
    mu: f64,
    nu: f64,
    p: f64,
    s: u32,
    b: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    lambda1: f64,
    lambda2: f64,
    mu: f64,
    nu: f64,
    p: f64,
    s: u32,
    b: u32,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        ModelParams::new(r.lambda1, r.lambda2, r.mu, r.nu, r.p, r.s, r.b)
    }
}

impl From<ModelParams> for RawParams {
    fn from(m: ModelParams) -> Self {
        RawParams {
            lambda1: m.lambda1,
            lambda2: m.lambda2,
            mu: m.mu,
            nu: m.nu,
            p: m.p,
            s: m.s,
            b: m.b,
        }
    }
}

fn positive_rate(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be a finite positive rate, got {v}"),
        })
    }
}

impl ModelParams {
    pub fn new(lambda1: f64, lambda2: f64, mu: f64, nu: f64, p: f64, s: u32, b: u32) -> Result<Self> {
        positive_rate("lambda1", lambda1)?;
        positive_rate("lambda2", lambda2)?;
        positive_rate("mu", mu)?;
        positive_rate("nu", nu)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: format!("admission probability must lie in [0, 1], got {p}"),
            });
        }
        if b < 2 {
            return Err(Error::InvalidParameter {
                name: "b",
                reason: format!("base stock level must be at least 2, got {b}"),
            });
        }
        if s == 0 || s >= b {
            return Err(Error::InvalidParameter {
                name: "s",
                reason: format!("threshold must satisfy 0 < s < b = {b}, got {s}"),
            });
        }
        Ok(ModelParams {
            lambda1,
            lambda2,
            mu,
            nu,
            p,
            s,
            b,
        })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn s(&self) -> u32 {
        self.s
    }
    pub fn b(&self) -> u32 {
        self.b
    }

    /// Rate at which ordinary customers are admitted at inventory level `k`.
    pub fn ordinary_admission_rate(&self, k: u32) -> f64 {
        if k == 0 {
            0.0
        } else if k <= self.s {
            self.p * self.lambda2
        } else {
            self.lambda2
        }
    }

    /// Returns a copy with one parameter replaced, re-validated.
    pub fn with(&self, axis: ParamAxis, value: f64) -> Result<Self> {
        let mut r = RawParams::from(*self);
        match axis {
            ParamAxis::Lambda1 => r.lambda1 = value,
            ParamAxis::Lambda2 => r.lambda2 = value,
            ParamAxis::Mu => r.mu = value,
            ParamAxis::Nu => r.nu = value,
            ParamAxis::P => r.p = value,
            ParamAxis::S => r.s = integral(axis, value)?,
            ParamAxis::B => r.b = integral(axis, value)?,
        }
        ModelParams::try_from(r)
    }

    pub fn get(&self, axis: ParamAxis) -> f64 {
        match axis {
            ParamAxis::Lambda1 => self.lambda1,
            ParamAxis::Lambda2 => self.lambda2,
            ParamAxis::Mu => self.mu,
            ParamAxis::Nu => self.nu,
            ParamAxis::P => self.p,
            ParamAxis::S => self.s as f64,
            ParamAxis::B => self.b as f64,
        }
    }

    /// Builds parameters from `key = value` lines (keys `lambda1`, `lambda2`,
    /// `mu`, `nu`, `p`, `s`, `b`). Unknown keys are an error.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let map = kv::parse(text)?;
        if let Some(extra) = map.keys().find(|k| ParamAxis::from_str(k).is_err()) {
            return Err(Error::Parse(format!("unknown key `{extra}`")));
        }
        Self::from_kv_map(&map)
    }

    /// Reads the seven parameter keys from an already parsed map, ignoring
    /// any other keys.
    pub fn from_kv_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let f = |key: &'static str| -> Result<f64> { kv::require(map, key)?.parse_f64(key) };
        let u = |key: &'static str| -> Result<u32> { kv::require(map, key)?.parse_u32(key) };
        ModelParams::new(f("lambda1")?, f("lambda2")?, f("mu")?, f("nu")?, f("p")?, u("s")?, u("b")?)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "lambda1 = {}\nlambda2 = {}\nmu = {}\nnu = {}\np = {}\ns = {}\nb = {}\n",
            self.lambda1, self.lambda2, self.mu, self.nu, self.p, self.s, self.b
        )
    }
}

fn integral(axis: ParamAxis, value: f64) -> Result<u32> {
    if value.fract() == 0.0 && value >= 0.0 && value <= u32::MAX as f64 {
        Ok(value as u32)
    } else {
        Err(Error::InvalidParameter {
            name: axis.name(),
            reason: format!("must be a non-negative integer, got {value}"),
        })
    }
}

/// Names one of the seven model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamAxis {
    Lambda1,
    Lambda2,
    Mu,
    Nu,
    P,
    S,
    B,
}

impl ParamAxis {
    pub const ALL: [ParamAxis; 7] = [
        ParamAxis::Lambda1,
        ParamAxis::Lambda2,
        ParamAxis::Mu,
        ParamAxis::Nu,
        ParamAxis::P,
        ParamAxis::S,
        ParamAxis::B,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamAxis::Lambda1 => "lambda1",
            ParamAxis::Lambda2 => "lambda2",
            ParamAxis::Mu => "mu",
            ParamAxis::Nu => "nu",
            ParamAxis::P => "p",
            ParamAxis::S => "s",
            ParamAxis::B => "b",
        }
    }
}

impl FromStr for ParamAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParamAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown parameter `{s}`")))
    }
}

impl fmt::Display for ParamAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `(n1, n2, k)`: priority queue length, ordinary queue length, on-hand inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    pub n1: u32,
    pub n2: u32,
    pub k: u32,
}

impl State {
    pub const fn new(n1: u32, n2: u32, k: u32) -> Self {
        State { n1, n2, k }
    }

    /// The full-stock empty state `(0, 0, b)`.
    pub const fn full_stock(b: u32) -> Self {
        State { n1: 0, n2: 0, k: b }
    }

    pub fn total_queue(&self) -> u64 {
        self.n1 as u64 + self.n2 as u64
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if self.k > params.b {
            return Err(Error::InvalidState { state: *self, b: params.b });
        }
        Ok(())
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.n1, self.n2, self.k)
    }
}

/// Which of the five rate families a transition belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionKind {
    PriorityArrival,
    OrdinaryArrival,
    PriorityService,
    OrdinaryService,
    Replenishment,
}

impl TransitionKind {
    pub fn is_arrival(self) -> bool {
        matches!(self, TransitionKind::PriorityArrival | TransitionKind::OrdinaryArrival)
    }
}

/// One positive-rate off-diagonal entry of a generator row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub target: State,
    pub rate: f64,
    pub kind: TransitionKind,
}

/// All positive-rate transitions out of `z`, in the order priority arrival,
/// ordinary arrival, priority service, ordinary service, replenishment.
pub fn transitions(params: &ModelParams, z: State) -> Result<Vec<Transition>> {
    z.validate(params)?;
    let mut out = Vec::with_capacity(4);
    let State { n1, n2, k } = z;
    if k > 0 {
        out.push(Transition {
            target: State::new(n1 + 1, n2, k),
            rate: params.lambda1,
            kind: TransitionKind::PriorityArrival,
        });
    }
    let ordinary = params.ordinary_admission_rate(k);
    if ordinary > 0.0 {
        out.push(Transition {
            target: State::new(n1, n2 + 1, k),
            rate: ordinary,
            kind: TransitionKind::OrdinaryArrival,
        });
    }
    if k > 0 {
        if n1 > 0 {
            out.push(Transition {
                target: State::new(n1 - 1, n2, k - 1),
                rate: params.mu,
                kind: TransitionKind::PriorityService,
            });
        } else if n2 > 0 {
            out.push(Transition {
                target: State::new(n1, n2 - 1, k - 1),
                rate: params.mu,
                kind: TransitionKind::OrdinaryService,
            });
        }
    }
    if k < params.b {
        out.push(Transition {
            target: State::new(n1, n2, k + 1),
            rate: params.nu,
            kind: TransitionKind::Replenishment,
        });
    }
    Ok(out)
}

/// `-q(z; z)`: the total outflow rate of `z`.
pub fn total_rate(params: &ModelParams, z: State) -> Result<f64> {
    Ok(transitions(params, z)?.iter().map(|t| t.rate).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> ModelParams {
        ModelParams::new(1.0, 2.0, 3.0, 4.0, 0.5, 1, 2).unwrap()
    }

    fn pairs(ts: &[Transition]) -> Vec<((u32, u32, u32), f64)> {
        ts.iter().map(|t| ((t.target.n1, t.target.n2, t.target.k), t.rate)).collect()
    }

    #[test]
    fn empty_stock_only_replenishes() {
        let ts = transitions(&example(), State::new(0, 0, 0)).unwrap();
        assert_eq!(pairs(&ts), vec![((0, 0, 1), 4.0)]);
        assert_eq!(total_rate(&example(), State::new(0, 0, 0)).unwrap(), 4.0);
    }

    #[test]
    fn full_stock_empty_queues_only_arrivals() {
        let ts = transitions(&example(), State::new(0, 0, 2)).unwrap();
        assert_eq!(pairs(&ts), vec![((1, 0, 2), 1.0), ((0, 1, 2), 2.0)]);
        assert_eq!(total_rate(&example(), State::new(0, 0, 2)).unwrap(), 3.0);
    }

    #[test]
    fn threshold_gates_ordinary_arrivals() {
        let ts = transitions(&example(), State::new(2, 1, 1)).unwrap();
        assert_eq!(
            pairs(&ts),
            vec![((3, 1, 1), 1.0), ((2, 2, 1), 1.0), ((1, 1, 0), 3.0), ((2, 1, 2), 4.0)]
        );
        assert_eq!(total_rate(&example(), State::new(2, 1, 1)).unwrap(), 9.0);
    }

    #[test]
    fn ordinary_service_only_without_priority_customers() {
        let ts = transitions(&example(), State::new(0, 3, 2)).unwrap();
        let kinds: Vec<_> = ts.iter().map(|t| t.kind).collect();
        assert!(kinds.contains(&TransitionKind::OrdinaryService));
        assert!(!kinds.contains(&TransitionKind::PriorityService));
        let ts = transitions(&example(), State::new(1, 3, 2)).unwrap();
        assert!(!ts.iter().any(|t| t.kind == TransitionKind::OrdinaryService));
    }

    #[test]
    fn invalid_state_rejected() {
        assert!(matches!(
            transitions(&example(), State::new(0, 0, 3)),
            Err(Error::InvalidState { .. })
        ));
    }

    #[test]
    fn parameter_validation() {
        assert!(ModelParams::new(0.0, 1.0, 1.0, 1.0, 0.5, 1, 2).is_err());
        assert!(ModelParams::new(1.0, -1.0, 1.0, 1.0, 0.5, 1, 2).is_err());
        assert!(ModelParams::new(1.0, 1.0, f64::NAN, 1.0, 0.5, 1, 2).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 0.0, 0.5, 1, 2).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 1.0, 1.5, 1, 2).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 1.0, 0.5, 1, 1).is_err());
        // s must be strictly between 0 and b.
        assert!(ModelParams::new(1.0, 1.0, 1.0, 1.0, 0.5, 0, 3).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 1.0, 0.5, 3, 3).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1, 2).is_ok());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1, 2).is_ok());
    }

    #[test]
    fn json_and_kv_share_key_names() {
        let p = example();
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"lambda1":1.0,"lambda2":2.0,"mu":3.0,"nu":4.0,"p":0.5,"s":1,"b":2}"#);
        assert_eq!(serde_json::from_str::<ModelParams>(&json).unwrap(), p);
        assert_eq!(ModelParams::from_kv_str(&p.to_kv_string()).unwrap(), p);
    }

    #[test]
    fn json_validation_and_missing_keys() {
        let bad = r#"{"lambda1":1,"lambda2":2,"mu":3,"nu":4,"p":0.5,"s":2,"b":2}"#;
        assert!(serde_json::from_str::<ModelParams>(bad).is_err());
        let missing = r#"{"lambda1":1,"lambda2":2,"nu":4,"p":0.5,"s":1,"b":2}"#;
        let msg = serde_json::from_str::<ModelParams>(missing).unwrap_err().to_string();
        assert!(msg.contains("mu"), "{msg}");
        let msg = ModelParams::from_kv_str("lambda1=1\nlambda2=2\nnu=4\np=0.5\ns=1\nb=2").unwrap_err();
        assert!(msg.to_string().contains("`mu`"), "{msg}");
    }

    #[test]
    fn with_axis_revalidates() {
        let p = example();
        assert_eq!(p.with(ParamAxis::P, 1.0).unwrap().p(), 1.0);
        assert!(p.with(ParamAxis::S, 2.0).is_err());
        assert!(p.with(ParamAxis::B, 2.5).is_err());
        assert_eq!(p.with(ParamAxis::B, 5.0).unwrap().b(), 5);
        for a in ParamAxis::ALL {
            assert_eq!(a.name().parse::<ParamAxis>().unwrap(), a);
        }
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        (0.01f64..5.0, 0.01f64..5.0, 0.01f64..5.0, 0.01f64..5.0, 0.0f64..=1.0, 2u32..8)
            .prop_flat_map(|(l1, l2, mu, nu, p, b)| {
                (1..b).prop_map(move |s| ModelParams::new(l1, l2, mu, nu, p, s, b).unwrap())
            })
    }

    proptest! {
        #[test]
        fn moves_follow_the_five_families(params in arb_params(), n1 in 0u32..4, n2 in 0u32..4, kk in 0u32..8) {
            let k = kk % (params.b() + 1);
            let z = State::new(n1, n2, k);
            let ts = transitions(&params, z).unwrap();
            let mut sum = 0.0;
            for t in &ts {
                prop_assert!(t.rate > 0.0);
                sum += t.rate;
                let d = (
                    t.target.n1 as i64 - n1 as i64,
                    t.target.n2 as i64 - n2 as i64,
                    t.target.k as i64 - k as i64,
                );
                let expected = match t.kind {
                    TransitionKind::PriorityArrival => (1, 0, 0),
                    TransitionKind::OrdinaryArrival => (0, 1, 0),
                    TransitionKind::PriorityService => (-1, 0, -1),
                    TransitionKind::OrdinaryService => (0, -1, -1),
                    TransitionKind::Replenishment => (0, 0, 1),
                };
                prop_assert_eq!(d, expected);
                prop_assert!(t.target.k <= params.b());
            }
            prop_assert_eq!(sum, total_rate(&params, z).unwrap());
        }

        #[test]
        fn ordinary_gate_is_monotone_step(params in arb_params()) {
            let rates: Vec<f64> = (0..=params.b()).map(|k| params.ordinary_admission_rate(k)).collect();
            prop_assert_eq!(rates[0], 0.0);
            for k in 1..=params.b() {
                let expected = if k <= params.s() { params.p() * params.lambda2() } else { params.lambda2() };
                prop_assert_eq!(rates[k as usize], expected);
                prop_assert!(rates[k as usize] >= rates[k as usize - 1]);
            }
            let full = params.with(ParamAxis::P, 1.0).unwrap();
            for k in 1..=params.b() {
                prop_assert_eq!(full.ordinary_admission_rate(k), params.lambda2());
            }
        }
    }
}
