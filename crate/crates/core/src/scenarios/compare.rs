use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ResultSet;
use crate::guests::BenchmarkKind;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot compare {base} with {other}: different benchmarks")]
pub struct CompareError {
    pub base: BenchmarkKind,
    pub other: BenchmarkKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Base is no slower on median and max, and faster on one of them.
    BaseDominates,
    OtherDominates,
    Equal,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub benchmark: BenchmarkKind,
    pub base: String,
    pub other: String,
    /// `other / base`; 1.0 when both are zero.
    pub median_ratio: f64,
    pub p99_ratio: f64,
    pub max_ratio: f64,
    /// Per-iteration HS traps, `other - base` (from the per-iteration maxima).
    pub hs_trap_delta: i64,
    pub m_entry_delta: i64,
    pub verdict: Verdict,
}

fn ratio(base: u64, other: u64) -> f64 {
    match (base, other) {
        (0, 0) => 1.0,
        (0, _) => f64::INFINITY,
        _ => other as f64 / base as f64,
    }
}

fn label(r: &ResultSet) -> String {
    format!("{}/{}", r.scenario, r.irqchip)
}

pub fn compare(base: &ResultSet, other: &ResultSet) -> Result<Comparison, CompareError> {
    if base.benchmark != other.benchmark {
        return Err(CompareError {
            base: base.benchmark,
            other: other.benchmark,
        });
    }
    let (b, o) = (&base.summary, &other.summary);
    let verdict = match (b.median.cmp(&o.median), b.max.cmp(&o.max)) {
        (std::cmp::Ordering::Equal, std::cmp::Ordering::Equal) => Verdict::Equal,
        (x, y) if x.is_le() && y.is_le() => Verdict::BaseDominates,
        (x, y) if x.is_ge() && y.is_ge() => Verdict::OtherDominates,
        _ => Verdict::Mixed,
    };
    Ok(Comparison {
        benchmark: base.benchmark,
        base: label(base),
        other: label(other),
        median_ratio: ratio(b.median, o.median),
        p99_ratio: ratio(b.p99, o.p99),
        max_ratio: ratio(b.max, o.max),
        hs_trap_delta: o.hs_traps.max as i64 - b.hs_traps.max as i64,
        m_entry_delta: o.m_entries.max as i64 - b.m_entries.max as i64,
        verdict,
    })
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "benchmark     {}", self.benchmark)?;
        writeln!(f, "base          {}", self.base)?;
        writeln!(f, "other         {}", self.other)?;
        writeln!(f, "median ratio  {:.3}", self.median_ratio)?;
        writeln!(f, "p99 ratio     {:.3}", self.p99_ratio)?;
        writeln!(f, "max ratio     {:.3}", self.max_ratio)?;
        writeln!(f, "hs_traps      {:+}", self.hs_trap_delta)?;
        writeln!(f, "m_entries     {:+}", self.m_entry_delta)?;
        write!(f, "verdict       {:?}", self.verdict)
    }
}
