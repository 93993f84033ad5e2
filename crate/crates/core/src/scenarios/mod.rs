//! Scenario orchestration: bare metal (A), partitioned (B), partitioned
//! with neighbour load (C). Builds the system, runs one benchmark, and
//! summarizes the result.

mod compare;
mod stats;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compare::{compare, Comparison, CompareError, Verdict};
pub use stats::{bin_edges, bin_index, order_stat, CountRange, EmptySamples, Histogram, PhaseSummary, Summary, BIN_COUNT};

use crate::config::{ConfigError, SimConfig};
use crate::devices::{plic, FileLevel, IrqChip, PageOwner, SourceTarget};
use crate::firmware::FirmwareStats;
use crate::guests::{self, attach_load, BenchParams, BenchmarkKind, BenchmarkSample, IPI_IDENTITY};
use crate::hypervisor::{Hypervisor, InterventionCounter, RangeSet};
use crate::kernel::{TraceRecord, NOMINAL_CLOCK_HZ};
use crate::machine::{Hart, InterruptKind, Owner};
use crate::system::{LoadStats, Platform, SimError, System};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Bare metal, no hypervisor.
    A,
    /// Statically partitioned.
    B,
    /// Partitioned, with memory load in the root cell.
    C,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::A, Scenario::B, Scenario::C];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::A => "A",
            Scenario::B => "B",
            Scenario::C => "C",
        }
    }

    pub fn partitioned(self) -> bool {
        self != Scenario::A
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "bare" | "bare-metal" => Ok(Scenario::A),
            "b" | "partitioned" => Ok(Scenario::B),
            "c" | "loaded" => Ok(Scenario::C),
            _ => Err(format!("unknown scenario `{s}` (expected A, B or C)")),
        }
    }
}

/// Everything that determines a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub benchmark: BenchmarkKind,
    pub scenario: Scenario,
    pub irqchip: IrqChip,
    pub iterations: usize,
    pub seed: u64,
    pub config: SimConfig,
    #[serde(default)]
    pub trace: bool,
}

impl RunSpec {
    /// Spec from the config's benchmark defaults.
    pub fn from_config(config: SimConfig) -> Self {
        let b = config.bench;
        Self {
            benchmark: b.benchmark,
            scenario: b.scenario,
            irqchip: b.irqchip,
            iterations: b.iterations,
            seed: b.seed,
            config,
            trace: false,
        }
    }

    pub fn new(benchmark: BenchmarkKind, scenario: Scenario, irqchip: IrqChip) -> Self {
        Self {
            benchmark,
            scenario,
            irqchip,
            ..Self::from_config(SimConfig::default())
        }
    }

    pub fn with_iterations(mut self, n: usize) -> Self {
        self.iterations = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.benchmark, self.scenario, self.irqchip)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.iterations == 0 {
            return Err(ConfigError::Invalid("iterations must be positive".into()));
        }
        self.config.validate()
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl RunError {
    pub fn is_protocol(&self) -> bool {
        matches!(self, RunError::Sim(SimError::Protocol(_)))
    }
}

/// Balance checks over one run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConservationReport {
    /// 0→1 transitions per `mip` bit, summed over harts.
    pub pending_sets: Vec<u64>,
    /// 1→0 transitions per `mip` bit.
    pub pending_clears: Vec<u64>,
    pub irq_asserts: u64,
    pub irq_claims: u64,
    pub irq_completions: u64,
    pub msi_writes: u64,
    pub msi_claims: u64,
    pub protocol_violations: u64,
    pub denied: u64,
    pub other: u64,
}

impl ConservationReport {
    pub fn pending_balanced(&self) -> bool {
        self.pending_sets == self.pending_clears
    }

    pub fn wired_balanced(&self) -> bool {
        self.irq_asserts == self.irq_claims && self.irq_claims == self.irq_completions
    }

    pub fn msi_balanced(&self) -> bool {
        self.msi_writes == self.msi_claims
    }

    pub fn holds(&self) -> bool {
        self.pending_balanced()
            && self.wired_balanced()
            && self.msi_balanced()
            && self.protocol_violations == 0
            && self.denied == 0
            && self.other == 0
    }

    fn of(sys: &System) -> Self {
        let mut r = ConservationReport {
            pending_sets: vec![0; 12],
            pending_clears: vec![0; 12],
            ..Default::default()
        };
        for h in &sys.plat.machine.harts {
            for bit in 0..12 {
                r.pending_sets[bit] += h.counters.sets[bit];
                r.pending_clears[bit] += h.counters.clears[bit];
            }
        }
        let d = &sys.plat.devices;
        let wired = d.plic.as_ref().or(d.aplic.as_ref().map(|a| &a.direct));
        if let Some(p) = wired {
            for s in &p.stats {
                r.irq_asserts += s.asserts;
                r.irq_claims += s.claims;
                r.irq_completions += s.completions;
            }
        }
        if let Some(m) = &d.imsic {
            r.msi_writes = m.stats.eip_sets;
            r.msi_claims = m.stats.claims;
        }
        r.protocol_violations = d.protocol_violations() as u64;
        if let Some(hv) = &sys.hv {
            r.denied = hv.counters.denied;
            r.other = hv.counters.other;
        }
        r
    }
}

/// Serializable outcome of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub benchmark: BenchmarkKind,
    pub scenario: Scenario,
    pub irqchip: IrqChip,
    pub iterations: usize,
    pub seed: u64,
    pub clock_hz: u64,
    pub summary: Summary,
    /// Whole-run intervention totals, including setup and teardown.
    pub interventions: InterventionCounter,
    pub firmware: FirmwareStats,
    pub conservation: ConservationReport,
    pub load_ticks: u64,
    pub diagnostics: Vec<String>,
    #[serde(skip)]
    pub samples: Vec<BenchmarkSample>,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

/// Builds the platform, and for B/C the hypervisor with the benchmark cell,
/// with interrupt routing for the benchmark source already programmed.
pub fn build_system(spec: &RunSpec) -> Result<System, RunError> {
    spec.validate()?;
    let cfg = &spec.config;
    let n = cfg.machine.harts;
    let partitioned = spec.scenario.partitioned();
    let harts = (0..n)
        .map(|h| {
            let owner = if partitioned { Owner::Cell(crate::hypervisor::ROOT_CELL) } else { Owner::Bare };
            Hart::new(h, partitioned, owner)
        })
        .collect();
    let mut plat = Platform::new(
        spec.irqchip,
        cfg.machine.layout,
        harts,
        cfg.costs,
        spec.seed,
        cfg.contention,
        spec.trace,
    )?;
    plat.mem = cfg.memory;
    let b = cfg.bench;
    let guest_file = if partitioned { FileLevel::VS } else { FileLevel::S };
    let d = &mut plat.devices;
    match spec.irqchip {
        IrqChip::PlicClint => {
            let p = d.plic.as_mut().expect("plic present");
            p.priority[b.source as usize] = 1;
            p.enable[plic::s_context(b.hart)] |= 1 << b.source;
        }
        IrqChip::AiaDirect => {
            let a = d.aplic.as_mut().expect("aplic present");
            a.configure(b.source, SourceTarget::Direct { hart: b.hart, priority: 1 });
        }
        IrqChip::AiaMsi => {
            let a = d.aplic.as_mut().expect("aplic present");
            a.configure(
                b.source,
                SourceTarget::Msi {
                    hart: b.hart,
                    file: guest_file,
                    identity: b.source,
                },
            );
            let m = d.imsic.as_mut().expect("imsic present");
            for &h in &cfg.cell.harts {
                for id in [IPI_IDENTITY, b.source] {
                    m.set_enabled(h, guest_file, id, true);
                }
            }
        }
    }

    let hv = if partitioned {
        let root_mem = RangeSet::from_range(cfg.root_memory.base, cfg.root_memory.len);
        let mut hv = Hypervisor::new(n, cfg.machine.layout.sources, root_mem);
        hv.ipi_shortcut = cfg.hypervisor.hv_ipi_shortcut;
        let id = hv
            .create_cell(&cfg.cell)
            .map_err(|e| SimError::Setup(format!("cell `{}`: {e}", cfg.cell.name)))?;
        hv.start_cell(id).map_err(|e| SimError::Setup(e.to_string()))?;
        hv.enter_operational_phase();
        for cell in hv.cells() {
            for &h in &cell.harts {
                plat.machine.harts[h].owner = Owner::Cell(cell.id);
                if spec.irqchip == IrqChip::AiaMsi {
                    let page = plat.devices.layout.imsic_file_addr(h, FileLevel::VS);
                    plat.devices
                        .map
                        .set_owner(page, PageOwner::Cell(cell.id))
                        .map_err(|e| SimError::Setup(e.to_string()))?;
                }
            }
        }
        // The hypervisor takes every HS-level interrupt.
        for hart in &mut plat.machine.harts {
            for k in [InterruptKind::S_SOFT, InterruptKind::S_TIMER, InterruptKind::S_EXT] {
                hart.enable.insert(k);
            }
        }
        Some(hv)
    } else {
        None
    };
    let mut sys = System::new(plat, hv);
    if spec.scenario == Scenario::C {
        attach_load(&mut sys, &cfg.root_harts(), cfg.load)?;
    }
    Ok(sys)
}

/// Runs one benchmark to completion.
pub fn run(spec: &RunSpec) -> Result<ResultSet, RunError> {
    let mut sys = build_system(spec)?;
    let b = spec.config.bench;
    let params = BenchParams {
        iterations: spec.iterations,
        hart: b.hart,
        peer: b.peer,
        source: b.source,
        period: b.period,
    };
    let mut wl = guests::build(spec.benchmark, params);
    sys.run(wl.as_mut())?;
    let violations = sys.plat.devices.protocol_violations();
    if violations > 0 {
        return Err(SimError::Protocol(format!("{violations} interrupt-controller protocol violations")).into());
    }
    let samples = wl.into_samples();
    let summary = Summary::of(&samples).map_err(|e| SimError::Protocol(e.to_string()))?;
    let conservation = ConservationReport::of(&sys);
    let mut diagnostics = sys.plat.devices.diagnostics.clone();
    if let Some(hv) = &sys.hv {
        diagnostics.extend(hv.diagnostics.iter().cloned());
    }
    let LoadStats { ticks, .. } = sys.load;
    Ok(ResultSet {
        benchmark: spec.benchmark,
        scenario: spec.scenario,
        irqchip: spec.irqchip,
        iterations: spec.iterations,
        seed: spec.seed,
        clock_hz: NOMINAL_CLOCK_HZ,
        summary,
        interventions: sys.hv.as_ref().map(|h| h.counters).unwrap_or_default(),
        firmware: sys.plat.fw,
        conservation,
        load_ticks: ticks,
        diagnostics,
        samples,
        trace: std::mem::take(&mut sys.plat.kernel.trace).into_sorted(),
    })
}

/// Runs independent specs in parallel; results keep the input order.
pub fn sweep(specs: &[RunSpec]) -> Vec<Result<ResultSet, RunError>> {
    specs.par_iter().map(run).collect()
}

/// Every benchmark × scenario × irqchip combination over a base config.
pub fn full_matrix(config: &SimConfig, iterations: usize, seed: u64) -> Vec<RunSpec> {
    let mut specs = Vec::new();
    for benchmark in BenchmarkKind::ALL {
        for irqchip in IrqChip::ALL {
            for scenario in Scenario::ALL {
                specs.push(RunSpec {
                    benchmark,
                    scenario,
                    irqchip,
                    iterations,
                    seed,
                    config: config.clone(),
                    trace: false,
                });
            }
        }
    }
    specs
}
