//! Scripted guest workloads: the four benchmark kernels and the root-cell
//! load generator.

mod ipi;
mod load;
mod mailbox;
mod plic_path;
mod sync_trap;
mod timer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ipi::{IpiRtt, IPI_IDENTITY};
pub use load::{attach_load, LoadConfig};
pub use mailbox::Mailbox;
pub use plic_path::PlicPath;
pub use sync_trap::SyncTrap;
pub use timer::TimerJitter;

use crate::hypervisor::InterventionCounter;
use crate::system::{SimError, System};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    TimerJitter,
    IpiRtt,
    PlicPath,
    SyncTrap,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 4] = [
        BenchmarkKind::TimerJitter,
        BenchmarkKind::IpiRtt,
        BenchmarkKind::PlicPath,
        BenchmarkKind::SyncTrap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkKind::TimerJitter => "timer_jitter",
            BenchmarkKind::IpiRtt => "ipi_rtt",
            BenchmarkKind::PlicPath => "plic_path",
            BenchmarkKind::SyncTrap => "sync_trap",
        }
    }

    /// Colour of the code path in the cross-system path figure.
    pub fn path_color(self) -> &'static str {
        match self {
            BenchmarkKind::TimerJitter => "ochre",
            BenchmarkKind::IpiRtt => "teal",
            BenchmarkKind::PlicPath => "black",
            BenchmarkKind::SyncTrap => "grey",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            BenchmarkKind::TimerJitter => "periodic SBI timer; sample = actual minus scheduled arrival",
            BenchmarkKind::IpiRtt => "IPI to a peer hart and back; sample = round-trip time",
            BenchmarkKind::PlicPath => "wired interrupt; sample = claim access cost (phases: injection, claim, complete)",
            BenchmarkKind::SyncTrap => "rdcycle, SBI remote fence, rdcycle; sample = difference",
        }
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for BenchmarkKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| format!("unknown benchmark `{s}` (expected one of timer_jitter, ipi_rtt, plic_path, sync_trap)"))
    }
}

/// Per-phase cost of one external-interrupt iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseBreakdown {
    /// Line assertion to first guest instruction of the handler.
    pub injection: u64,
    pub claim: u64,
    pub complete: u64,
}

impl PhaseBreakdown {
    pub fn named(&self) -> [(&'static str, u64); 3] {
        [
            ("injection", self.injection),
            ("claim", self.claim),
            ("complete", self.complete),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSample {
    pub iteration: usize,
    pub cycles: u64,
    pub hs_traps: u64,
    pub m_entries: u64,
    pub phases: Option<PhaseBreakdown>,
    /// Hypervisor interventions during this iteration, per category.
    pub interventions: InterventionCounter,
}

/// Collects samples with per-iteration trap deltas.
#[derive(Clone, Debug, Default)]
pub struct Recorder {
    iterations: usize,
    samples: Vec<BenchmarkSample>,
    last_hs: u64,
    last_m: u64,
    last_iv: InterventionCounter,
}

impl Recorder {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            samples: Vec::with_capacity(iterations),
            ..Self::default()
        }
    }

    /// Marks the start of the first iteration.
    pub fn baseline(&mut self, sys: &System) {
        self.last_hs = sys.total_hs_entries();
        self.last_m = sys.total_m_entries();
        self.last_iv = interventions(sys);
    }

    pub fn record(&mut self, sys: &System, cycles: u64, phases: Option<PhaseBreakdown>) {
        let (hs, m, iv) = (sys.total_hs_entries(), sys.total_m_entries(), interventions(sys));
        self.samples.push(BenchmarkSample {
            iteration: self.samples.len(),
            cycles,
            hs_traps: hs - self.last_hs,
            m_entries: m - self.last_m,
            phases,
            interventions: iv.minus(&self.last_iv),
        });
        self.last_hs = hs;
        self.last_m = m;
        self.last_iv = iv;
    }

    pub fn done(&self) -> bool {
        self.samples.len() >= self.iterations
    }

    pub fn samples(&self) -> &[BenchmarkSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<BenchmarkSample> {
        self.samples
    }
}

fn interventions(sys: &System) -> InterventionCounter {
    sys.hv.as_ref().map(|h| h.counters).unwrap_or_default()
}

/// A benchmark workload that yields samples.
pub trait Benchmark: crate::system::Workload {
    fn kind(&self) -> BenchmarkKind;
    fn into_samples(self: Box<Self>) -> Vec<BenchmarkSample>;
}

/// Guest-visible parameters of one benchmark run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchParams {
    pub iterations: usize,
    /// Primary benchmark hart.
    pub hart: crate::HartId,
    pub peer: crate::HartId,
    pub source: u32,
    /// Timer period, or gap between iterations for the other benchmarks.
    pub period: u64,
}

pub fn build(kind: BenchmarkKind, p: BenchParams) -> Box<dyn Benchmark> {
    match kind {
        BenchmarkKind::TimerJitter => Box::new(TimerJitter::new(p.hart, p.period, p.iterations)),
        BenchmarkKind::IpiRtt => Box::new(IpiRtt::new(p.hart, p.peer, p.iterations)),
        BenchmarkKind::PlicPath => Box::new(PlicPath::new(p.hart, p.source, p.period, p.iterations)),
        BenchmarkKind::SyncTrap => Box::new(SyncTrap::new(p.hart, p.iterations)),
    }
}

pub(crate) fn unexpected(hart: crate::HartId, what: impl fmt::Display) -> SimError {
    SimError::Protocol(format!("unexpected {what} on hart {hart}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_parses_both_spellings() {
        assert_eq!("ipi-rtt".parse::<BenchmarkKind>(), Ok(BenchmarkKind::IpiRtt));
        assert_eq!("plic_path".parse::<BenchmarkKind>(), Ok(BenchmarkKind::PlicPath));
        assert!("latency".parse::<BenchmarkKind>().is_err());
    }

    #[test]
    fn every_kind_has_its_own_path_color() {
        let mut colors: Vec<_> = BenchmarkKind::ALL.iter().map(|k| k.path_color()).collect();
        colors.sort();
        colors.dedup();
        assert_eq!(colors.len(), 4);
    }
}
