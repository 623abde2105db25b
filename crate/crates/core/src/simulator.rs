//! Event-driven simulation of the untruncated process.
//!
//! Arrival clocks tick at the full rates `lambda1` and `lambda2` in every
//! state; an arrival that finds no stock, or an ordinary arrival that loses
//! the admission coin at `0 < k <= s`, is recorded as a lost sale. Holding
//! times are exponential with the sum of the active clock rates and the
//! next event is picked in proportion to its rate.
//!
//! Randomness comes from ChaCha8 seeded with `seed`; `stream` selects one of
//! 2^64 independent streams for the same seed so that replications and sweep
//! points can run in parallel without sharing state.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::{ModelParams, State};

pub const DEFAULT_BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
    pub max_events: u64,
    pub warmup_events: u64,
    pub batches: usize,
    /// Defaults to `(0, 0, b)`.
    #[serde(default)]
    pub initial_state: Option<State>,
}

impl SimConfig {
    /// `max_events` events, 10% warmup, 20 batches, start at full stock.
    pub fn new(seed: u64, max_events: u64) -> Self {
        SimConfig {
            seed,
            stream: 0,
            max_events,
            warmup_events: max_events / 10,
            batches: DEFAULT_BATCHES,
            initial_state: None,
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if self.batches < 2 {
            return Err(Error::InvalidSimConfig(format!("need at least 2 batches, got {}", self.batches)));
        }
        if self.warmup_events >= self.max_events {
            return Err(Error::InvalidSimConfig(format!(
                "warmup ({}) must be shorter than the run ({})",
                self.warmup_events, self.max_events
            )));
        }
        if self.max_events - self.warmup_events < self.batches as u64 {
            return Err(Error::InvalidSimConfig(format!(
                "{} post-warmup events cannot fill {} batches",
                self.max_events - self.warmup_events,
                self.batches
            )));
        }
        if let Some(z) = self.initial_state {
            z.validate(params)?;
        }
        Ok(())
    }
}

/// Trajectory log event codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimEvent {
    A1,
    A2,
    S1,
    S2,
    R,
    L1,
    L2,
}

impl SimEvent {
    pub fn code(self) -> &'static str {
        match self {
            SimEvent::A1 => "A1",
            SimEvent::A2 => "A2",
            SimEvent::S1 => "S1",
            SimEvent::S2 => "S2",
            SimEvent::R => "R",
            SimEvent::L1 => "L1",
            SimEvent::L2 => "L2",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub admitted1: u64,
    pub lost1: u64,
    pub admitted2: u64,
    pub lost2: u64,
    pub services1: u64,
    pub services2: u64,
    pub replenishments: u64,
}

impl EventCounts {
    fn record(&mut self, e: SimEvent) {
        match e {
            SimEvent::A1 => self.admitted1 += 1,
            SimEvent::A2 => self.admitted2 += 1,
            SimEvent::S1 => self.services1 += 1,
            SimEvent::S2 => self.services2 += 1,
            SimEvent::R => self.replenishments += 1,
            SimEvent::L1 => self.lost1 += 1,
            SimEvent::L2 => self.lost2 += 1,
        }
    }

    pub fn arrivals1(&self) -> u64 {
        self.admitted1 + self.lost1
    }

    pub fn arrivals2(&self) -> u64 {
        self.admitted2 + self.lost2
    }
}

/// Batch-means estimate with a 95% Student-t half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimates {
    pub params: ModelParams,
    pub config: SimConfig,
    pub initial_state: State,
    pub final_state: State,
    pub events: u64,
    pub post_warmup_events: u64,
    pub simulated_time: f64,
    pub post_warmup_time: f64,
    /// Whole-run event counts, warmup included.
    pub counts: EventCounts,
    pub time_avg: BTreeMap<String, Estimate>,
}

impl SimEstimates {
    pub fn metric(&self, name: &str) -> Option<&Estimate> {
        self.time_avg.get(name)
    }
}

pub fn inventory_metric(k: u32) -> String {
    format!("p_y_eq_{k}")
}

/// One step of the competing-clock dynamics.
struct Stepper<'a> {
    params: &'a ModelParams,
    rng: ChaCha8Rng,
    state: State,
}

impl<'a> Stepper<'a> {
    fn new(params: &'a ModelParams, seed: u64, stream: u64, state: State) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Stepper { params, rng, state }
    }

    /// Draws the holding time in the current state and the event ending it,
    /// and applies the event.
    fn step(&mut self) -> (f64, SimEvent) {
        let p = self.params;
        let State { n1, n2, k } = self.state;
        let serving = if k > 0 && (n1 > 0 || n2 > 0) { p.mu() } else { 0.0 };
        let replenishing = if k < p.b() { p.nu() } else { 0.0 };
        let total = p.lambda1() + p.lambda2() + serving + replenishing;
        let e1: f64 = self.rng.sample(Exp1);
        let holding = e1 / total;
        let u = self.rng.random::<f64>() * total;

        let event = if u < p.lambda1() {
            if k > 0 {
                self.state.n1 += 1;
                SimEvent::A1
            } else {
                SimEvent::L1
            }
        } else if u < p.lambda1() + p.lambda2() {
            let admitted = k > p.s() || (k > 0 && self.rng.random_bool(p.p()));
            if admitted {
                self.state.n2 += 1;
                SimEvent::A2
            } else {
                SimEvent::L2
            }
        } else if serving > 0.0 && u < p.lambda1() + p.lambda2() + serving {
            self.state.k -= 1;
            if n1 > 0 {
                self.state.n1 -= 1;
                SimEvent::S1
            } else {
                self.state.n2 -= 1;
                SimEvent::S2
            }
        } else if replenishing > 0.0 {
            self.state.k += 1;
            SimEvent::R
        } else {
            // u landed on the upper edge through rounding; treat as service.
            self.state.k -= 1;
            if n1 > 0 {
                self.state.n1 -= 1;
                SimEvent::S1
            } else {
                self.state.n2 -= 1;
                SimEvent::S2
            }
        };
        (holding, event)
    }
}

#[derive(Clone)]
struct Batch {
    time: f64,
    inventory: Vec<f64>,
    x1: f64,
    x2: f64,
    counts: EventCounts,
}

impl Batch {
    fn new(b: u32) -> Self {
        Batch {
            time: 0.0,
            inventory: vec![0.0; b as usize + 1],
            x1: 0.0,
            x2: 0.0,
            counts: EventCounts::default(),
        }
    }
}

pub fn simulate(params: &ModelParams, cfg: &SimConfig) -> Result<SimEstimates> {
    run(params, cfg, None)
}

/// As [`simulate`], additionally writing `t,n1,n2,k,event` per event (state
/// after the event).
pub fn simulate_with_log<W: Write>(params: &ModelParams, cfg: &SimConfig, log: &mut W) -> Result<SimEstimates> {
    run(params, cfg, Some(log))
}

fn run(params: &ModelParams, cfg: &SimConfig, mut log: Option<&mut dyn Write>) -> Result<SimEstimates> {
    cfg.validate(params)?;
    let initial = cfg.initial_state.unwrap_or(State::full_stock(params.b()));
    let mut stepper = Stepper::new(params, cfg.seed, cfg.stream, initial);
    let post = cfg.max_events - cfg.warmup_events;
    let batch_len = post / cfg.batches as u64;
    let mut batches = vec![Batch::new(params.b()); cfg.batches];
    let mut counts = EventCounts::default();
    let mut clock = 0.0;
    let mut post_time = 0.0;

    if let Some(w) = log.as_deref_mut() {
        writeln!(w, "t,n1,n2,k,event")?;
    }
    for e in 0..cfg.max_events {
        let before = stepper.state;
        let (holding, event) = stepper.step();
        clock += holding;
        counts.record(event);
        if e >= cfg.warmup_events {
            let idx = (((e - cfg.warmup_events) / batch_len) as usize).min(cfg.batches - 1);
            let bt = &mut batches[idx];
            bt.time += holding;
            bt.inventory[before.k as usize] += holding;
            bt.x1 += holding * before.n1 as f64;
            bt.x2 += holding * before.n2 as f64;
            bt.counts.record(event);
            post_time += holding;
        }
        if let Some(w) = log.as_deref_mut() {
            let z = stepper.state;
            writeln!(w, "{:.16e},{},{},{},{}", clock, z.n1, z.n2, z.k, event.code())?;
        }
    }

    let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let s = params.s() as usize;
    for bt in &batches {
        let t = bt.time;
        let mut push = |name: String, v: f64| series.entry(name).or_default().push(v);
        for (k, occ) in bt.inventory.iter().enumerate() {
            push(inventory_metric(k as u32), occ / t);
        }
        push("p_y_pos".into(), bt.inventory[1..].iter().sum::<f64>() / t);
        push("p_y_low".into(), bt.inventory[1..=s].iter().sum::<f64>() / t);
        push("mean_x1".into(), bt.x1 / t);
        push("mean_x2".into(), bt.x2 / t);
        let c = &bt.counts;
        let (a1, a2) = (c.admitted1 as f64 / t, c.admitted2 as f64 / t);
        let (d1, d2) = (c.services1 as f64 / t, c.services2 as f64 / t);
        push("arrival_rate_1".into(), a1);
        push("arrival_rate_2".into(), a2);
        push("departure_rate_1".into(), d1);
        push("departure_rate_2".into(), d2);
        push("loss_rate_1".into(), c.lost1 as f64 / t);
        push("loss_rate_2".into(), c.lost2 as f64 / t);
        push("flow_gap_1".into(), a1 - d1);
        push("flow_gap_2".into(), a2 - d2);
        push("flow_gap_total".into(), a1 + a2 - d1 - d2);
    }
    let t_quantile = StudentsT::new(0.0, 1.0, (cfg.batches - 1) as f64)
        .expect("batches >= 2")
        .inverse_cdf(0.975);
    let time_avg = series
        .into_iter()
        .map(|(name, xs)| (name, batch_means(&xs, t_quantile)))
        .collect();

    Ok(SimEstimates {
        params: *params,
        config: *cfg,
        initial_state: initial,
        final_state: stepper.state,
        events: cfg.max_events,
        post_warmup_events: post,
        simulated_time: clock,
        post_warmup_time: post_time,
        counts,
        time_avg,
    })
}

fn batch_means(xs: &[f64], t_quantile: f64) -> Estimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let std_error = (var / n).sqrt();
    Estimate {
        mean,
        half_width: t_quantile * std_error,
        std_error,
    }
}

/// Time-weighted mean of `X1 + X2` over `windows` consecutive windows of
/// `window_events` events each, from `cfg.initial_state` (no warmup).
pub fn windowed_total_queue(
    params: &ModelParams,
    seed: u64,
    stream: u64,
    window_events: u64,
    windows: usize,
) -> Result<Vec<f64>> {
    if window_events == 0 || windows == 0 {
        return Err(Error::InvalidSimConfig("windows must be non-empty".into()));
    }
    let mut stepper = Stepper::new(params, seed, stream, State::full_stock(params.b()));
    let mut out = Vec::with_capacity(windows);
    for _ in 0..windows {
        let (mut area, mut time) = (0.0, 0.0);
        for _ in 0..window_events {
            let before = stepper.state;
            let (h, _) = stepper.step();
            area += h * before.total_queue() as f64;
            time += h;
        }
        out.push(area / time);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResidual {
    pub name: String,
    /// `|effective arrival rate - effective departure rate|`.
    pub residual: f64,
    pub std_error: f64,
    pub within_3_sigma: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub residuals: Vec<FlowResidual>,
    /// `None` when the parameters are known to be non-ergodic (`p = 1`,
    /// `lambda1 + lambda2 >= mu`); no equilibrium claim applies there.
    pub pass: Option<bool>,
}

/// Compares admitted-arrival and departure rates per class and in total.
pub fn throughput_check(est: &SimEstimates) -> Result<ThroughputReport> {
    if est.post_warmup_events == 0 {
        return Err(Error::InsufficientData("no post-warmup events".into()));
    }
    let mut residuals = Vec::with_capacity(3);
    for name in ["flow_gap_1", "flow_gap_2", "flow_gap_total"] {
        let e = est
            .metric(name)
            .ok_or_else(|| Error::InsufficientData(format!("metric `{name}` missing")))?;
        let residual = e.mean.abs();
        residuals.push(FlowResidual {
            name: name.to_string(),
            residual,
            std_error: e.std_error,
            within_3_sigma: residual <= 3.0 * e.std_error,
        });
    }
    let p = &est.params;
    let known_unstable = p.p() == 1.0 && p.lambda1() + p.lambda2() >= p.mu();
    let pass = (!known_unstable).then(|| residuals.iter().all(|r| r.within_3_sigma));
    Ok(ThroughputReport { residuals, pass })
}
