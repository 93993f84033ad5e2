//! Order statistics and fixed log-spaced histograms.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guests::BenchmarkSample;
use crate::hypervisor::InterventionCounter;

pub const BINS_PER_DECADE: usize = 12;
pub const DECADES: usize = 6;
pub const BIN_COUNT: usize = BINS_PER_DECADE * DECADES;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot summarize an empty sample set")]
pub struct EmptySamples;

/// Bin edges `10^(i/12)` for `i = 0..=72`, covering `[1, 10^6]` cycles.
pub fn bin_edges() -> &'static [f64] {
    static EDGES: OnceLock<Vec<f64>> = OnceLock::new();
    EDGES.get_or_init(|| {
        (0..=BIN_COUNT)
            .map(|i| 10f64.powf(i as f64 / BINS_PER_DECADE as f64))
            .collect()
    })
}

/// Bin holding `v`; values outside the covered range land in the end bins.
pub fn bin_index(v: u64) -> usize {
    let edges = bin_edges();
    let x = v as f64;
    // Number of edges <= x, minus one, is the bin whose lower edge is <= x.
    let le = edges.partition_point(|&e| e <= x);
    le.saturating_sub(1).min(BIN_COUNT - 1)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn of(values: impl IntoIterator<Item = u64>) -> Self {
        let mut counts = vec![0; BIN_COUNT];
        for v in values {
            counts[bin_index(v)] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn occupied(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().copied().enumerate().filter(|&(_, c)| c > 0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: u64,
    pub max: u64,
    pub total: u64,
}

impl CountRange {
    fn of(values: impl Iterator<Item = u64>) -> Self {
        let mut r = CountRange {
            min: u64::MAX,
            max: 0,
            total: 0,
        };
        for v in values {
            r.min = r.min.min(v);
            r.max = r.max.max(v);
            r.total += v;
        }
        if r.min == u64::MAX {
            r.min = 0;
        }
        r
    }

    /// Same count in every iteration.
    pub fn constant(&self) -> Option<u64> {
        (self.min == self.max).then_some(self.min)
    }
}

/// Exact order statistics: the `q` quantile is the sorted value at index
/// `ceil(q * n) - 1`.
pub fn order_stat(sorted: &[u64], q: f64) -> u64 {
    let n = sorted.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: String,
    pub min: u64,
    pub median: u64,
    pub max: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub min: u64,
    pub median: u64,
    pub p99: u64,
    pub max: u64,
    pub mean: f64,
    pub histogram: Histogram,
    pub hs_traps: CountRange,
    pub m_entries: CountRange,
    /// Interventions summed over the sampled iterations.
    pub interventions: InterventionCounter,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phases: Vec<PhaseSummary>,
}

impl Summary {
    pub fn of(samples: &[BenchmarkSample]) -> Result<Self, EmptySamples> {
        if samples.is_empty() {
            return Err(EmptySamples);
        }
        let mut sorted: Vec<u64> = samples.iter().map(|s| s.cycles).collect();
        sorted.sort_unstable();
        let sum: u128 = sorted.iter().map(|&v| v as u128).sum();
        let mut interventions = InterventionCounter::default();
        for s in samples {
            let iv = &s.interventions;
            interventions.sbi_moderation += iv.sbi_moderation;
            interventions.timer_injection += iv.timer_injection;
            interventions.ipi_injection += iv.ipi_injection;
            interventions.external_injection += iv.external_injection;
            interventions.plic_emulation += iv.plic_emulation;
            interventions.denied += iv.denied;
            interventions.other += iv.other;
        }
        let mut phases = Vec::new();
        if samples.iter().all(|s| s.phases.is_some()) {
            for (i, name) in ["injection", "claim", "complete"].into_iter().enumerate() {
                let mut v: Vec<u64> = samples
                    .iter()
                    .map(|s| s.phases.expect("checked").named()[i].1)
                    .collect();
                v.sort_unstable();
                phases.push(PhaseSummary {
                    phase: name.into(),
                    min: v[0],
                    median: order_stat(&v, 0.5),
                    max: v[v.len() - 1],
                });
            }
        }
        Ok(Self {
            count: sorted.len(),
            min: sorted[0],
            median: order_stat(&sorted, 0.5),
            p99: order_stat(&sorted, 0.99),
            max: sorted[sorted.len() - 1],
            mean: sum as f64 / sorted.len() as f64,
            histogram: Histogram::of(sorted.iter().copied()),
            hs_traps: CountRange::of(samples.iter().map(|s| s.hs_traps)),
            m_entries: CountRange::of(samples.iter().map(|s| s.m_entries)),
            interventions,
            phases,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn samples(values: &[u64]) -> Vec<BenchmarkSample> {
        values
            .iter()
            .enumerate()
            .map(|(i, &cycles)| BenchmarkSample {
                iteration: i,
                cycles,
                hs_traps: 0,
                m_entries: 0,
                phases: None,
                interventions: InterventionCounter::default(),
            })
            .collect()
    }

    /// Independent quantile: smallest value with at least `q * n` samples
    /// at or below it.
    fn brute_quantile(values: &[u64], q: f64) -> u64 {
        let n = values.len() as f64;
        let mut sorted = values.to_vec();
        sorted.sort_unstable();
        *sorted
            .iter()
            .find(|&&v| sorted.iter().filter(|&&w| w <= v).count() as f64 >= q * n)
            .unwrap()
    }

    #[test]
    fn constant_samples() {
        let s = Summary::of(&samples(&[3, 3, 3])).unwrap();
        assert_eq!((s.min, s.median, s.max), (3, 3, 3));
        assert_eq!(s.histogram.occupied().count(), 1);
    }

    #[test]
    fn one_to_hundred() {
        let v: Vec<u64> = (1..=100).collect();
        let s = Summary::of(&samples(&v)).unwrap();
        assert_eq!(s.p99, 99);
        assert_eq!(s.median, 50);
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(Summary::of(&[]), Err(EmptySamples));
    }

    #[test]
    fn bins_follow_decades() {
        assert_eq!(bin_index(0), 0);
        assert_eq!(bin_index(1), 0);
        assert_eq!(bin_index(10), 12);
        assert_eq!(bin_index(9), 11);
        assert_eq!(bin_index(1_000_000), BIN_COUNT - 1);
        assert_eq!(bin_index(u64::MAX), BIN_COUNT - 1);
    }

    proptest! {
        #[test]
        fn order_stats_match_brute_force(v in prop::collection::vec(0u64..100_000, 1..300)) {
            let s = Summary::of(&samples(&v)).unwrap();
            prop_assert_eq!(s.median, brute_quantile(&v, 0.5));
            prop_assert_eq!(s.p99, brute_quantile(&v, 0.99));
            prop_assert!(s.min <= s.median && s.median <= s.p99 && s.p99 <= s.max);
            prop_assert_eq!(s.histogram.total(), v.len() as u64);
        }

        #[test]
        fn bin_contains_value(v in 1u64..999_999) {
            let i = bin_index(v);
            let e = bin_edges();
            prop_assert!(e[i] <= v as f64 && (v as f64) < e[i + 1]);
        }
    }
}
