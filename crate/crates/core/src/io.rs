//! CSV and JSON export, and readers for externally produced tables.
//!
//! CSV floats are written with 17 significant digits so that every value
//! round-trips; JSON uses serde_json's shortest round-trip form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::BalanceReport;
use crate::error::{Error, Result};
use crate::instant::InventoryDistribution;
use crate::lyapunov::DriftReport;
use crate::model::{ModelParams, State};
use crate::simulator::SimEstimates;
use crate::solver::{SolveMethod, StationaryDistribution, TruncationSpec};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbRecord {
    pub n1: u32,
    pub n2: u32,
    pub k: u32,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionDoc {
    pub params: ModelParams,
    pub trunc: TruncationSpec,
    pub method: SolveMethod,
    pub residual: f64,
    pub tolerance: f64,
    pub states: Vec<ProbRecord>,
}

impl DistributionDoc {
    pub fn new(dist: &StationaryDistribution, params: &ModelParams) -> Self {
        DistributionDoc {
            params: *params,
            trunc: dist.trunc(),
            method: dist.method,
            residual: dist.residual,
            tolerance: dist.tolerance,
            states: dist
                .iter()
                .map(|(z, prob)| ProbRecord {
                    n1: z.n1,
                    n2: z.n2,
                    k: z.k,
                    prob,
                })
                .collect(),
        }
    }
}

pub fn write_distribution_csv<W: Write>(dist: &StationaryDistribution, mut w: W) -> Result<()> {
    writeln!(w, "n1,n2,k,prob")?;
    for (z, p) in dist.iter() {
        writeln!(w, "{},{},{},{}", z.n1, z.n2, z.k, fmt_f64(p))?;
    }
    Ok(())
}

pub fn write_distribution_json<W: Write>(dist: &StationaryDistribution, params: &ModelParams, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, &DistributionDoc::new(dist, params))?;
    Ok(())
}

/// A complete box read from `n1,n2,k,prob` rows, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportedDistribution {
    pub trunc: TruncationSpec,
    pub b: u32,
    pub probabilities: Vec<f64>,
}

/// Reads a distribution CSV. Rows may come in any order but must cover the
/// box `[0, max n1] x [0, max n2] x [0, max k]` exactly once.
pub fn read_distribution_csv<R: Read>(r: R) -> Result<ImportedDistribution> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["n1", "n2", "k", "prob"] {
        return Err(Error::Parse(format!("expected header n1,n2,k,prob, got {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for rec in reader.deserialize() {
        let rec: ProbRecord = rec?;
        if !rec.prob.is_finite() {
            return Err(Error::Parse(format!("non-finite probability at ({},{},{})", rec.n1, rec.n2, rec.k)));
        }
        rows.push(rec);
    }
    if rows.is_empty() {
        return Err(Error::Parse("no rows".into()));
    }
    let cap1 = rows.iter().map(|r| r.n1).max().unwrap_or(0);
    let cap2 = rows.iter().map(|r| r.n2).max().unwrap_or(0);
    let b = rows.iter().map(|r| r.k).max().unwrap_or(0);
    let len = (cap1 as u128 + 1) * (cap2 as u128 + 1) * (b as u128 + 1);
    if len != rows.len() as u128 {
        return Err(Error::Parse(format!(
            "{} rows do not fill the {}x{}x{} box",
            rows.len(),
            cap1 as u64 + 1,
            cap2 as u64 + 1,
            b as u64 + 1
        )));
    }
    let trunc = TruncationSpec::new(cap1, cap2);
    let space = crate::solver::StateSpace::new(trunc, b)?;
    let mut probabilities = vec![f64::NAN; space.len()];
    for r in rows {
        let z = State::new(r.n1, r.n2, r.k);
        let i = space.index_of(z).expect("inside the inferred box");
        if !probabilities[i].is_nan() {
            return Err(Error::Parse(format!("duplicate row for {z}")));
        }
        probabilities[i] = r.prob;
    }
    Ok(ImportedDistribution { trunc, b, probabilities })
}

pub fn write_drift_csv<W: Write>(report: &DriftReport, mut w: W) -> Result<()> {
    writeln!(w, "n1,n2,k,drift,in_F,violation")?;
    for e in &report.entries {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            e.state.n1,
            e.state.n2,
            e.state.k,
            fmt_f64(e.drift),
            e.in_f,
            e.violation
        )?;
    }
    Ok(())
}

pub fn write_drift_json<W: Write>(report: &DriftReport, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, report)?;
    Ok(())
}

pub fn write_balance_csv<W: Write>(reports: &[BalanceReport], mut w: W) -> Result<()> {
    writeln!(w, "identity,index,residual,excluded")?;
    for r in reports {
        for (i, x) in r.residuals.iter().enumerate() {
            writeln!(w, "{},{},{},{}", r.identity, i, fmt_f64(*x), r.excluded.contains(&i))?;
        }
    }
    Ok(())
}

pub fn write_balance_json<W: Write>(reports: &[BalanceReport], w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, reports)?;
    Ok(())
}

pub fn write_theta_csv<W: Write>(dist: &InventoryDistribution, mut w: W) -> Result<()> {
    writeln!(w, "k,theta")?;
    for (k, t) in dist.theta.iter().enumerate() {
        writeln!(w, "{},{}", k, fmt_f64(*t))?;
    }
    Ok(())
}

pub fn write_theta_json<W: Write>(dist: &InventoryDistribution, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, dist)?;
    Ok(())
}

#[derive(Deserialize)]
struct ThetaRecord {
    k: u32,
    theta: f64,
}

/// Reads `k,theta` rows covering `0..=b` exactly once, in any order.
pub fn read_theta_csv<R: Read>(r: R) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut rows: Vec<ThetaRecord> = Vec::new();
    for rec in reader.deserialize() {
        rows.push(rec?);
    }
    if rows.is_empty() {
        return Err(Error::Parse("no rows".into()));
    }
    let mut theta = vec![f64::NAN; rows.len()];
    for row in rows {
        let slot = theta
            .get_mut(row.k as usize)
            .ok_or_else(|| Error::Parse(format!("k = {} leaves a gap below it", row.k)))?;
        if !slot.is_nan() {
            return Err(Error::Parse(format!("duplicate row for k = {}", row.k)));
        }
        if !row.theta.is_finite() {
            return Err(Error::Parse(format!("non-finite theta at k = {}", row.k)));
        }
        *slot = row.theta;
    }
    Ok(theta)
}

pub fn write_sim_json<W: Write>(est: &SimEstimates, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, est)?;
    Ok(())
}

pub fn write_sim_csv<W: Write>(est: &SimEstimates, mut w: W) -> Result<()> {
    writeln!(w, "metric,mean,half_width,std_error")?;
    for (name, e) in &est.time_avg {
        writeln!(w, "{},{},{},{}", name, fmt_f64(e.mean), fmt_f64(e.half_width), fmt_f64(e.std_error))?;
    }
    Ok(())
}
