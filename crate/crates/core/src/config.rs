//! Simulation configuration: one TOML document covering the machine, the
//! cost models, the benchmark cell, and benchmark defaults.
//!
//! Precedence is built-in defaults, then the file, then command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::{DeviceLayout, IrqChip};
use crate::guests::{BenchmarkKind, LoadConfig};
use crate::hypervisor::{CellConfig, MemRegion};
use crate::kernel::ContentionModel;
use crate::machine::{CostModel, MemCostModel};
use crate::scenarios::Scenario;
use crate::HartId;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "RVPART_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineConfig {
    pub harts: usize,
    pub layout: DeviceLayout,
}

impl Default for MachineConfig {
    fn default() -> Self {
        Self {
            harts: 6,
            layout: DeviceLayout::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypervisorConfig {
    /// Inject same-cell IPIs without a firmware round trip.
    pub hv_ipi_shortcut: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub benchmark: BenchmarkKind,
    pub scenario: Scenario,
    pub irqchip: IrqChip,
    pub iterations: usize,
    pub seed: u64,
    /// Timer period; gap between external-interrupt iterations.
    pub period: u64,
    pub source: u32,
    pub hart: HartId,
    pub peer: HartId,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            benchmark: BenchmarkKind::TimerJitter,
            scenario: Scenario::B,
            irqchip: IrqChip::PlicClint,
            iterations: 10_000,
            seed: 42,
            period: 10_000,
            source: 12,
            hart: 4,
            peer: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub machine: MachineConfig,
    pub costs: CostModel,
    pub memory: MemCostModel,
    pub contention: ContentionModel,
    pub load: LoadConfig,
    pub hypervisor: HypervisorConfig,
    /// Memory initially owned by the root cell.
    pub root_memory: MemRegion,
    /// The benchmark cell carved out of the root cell in scenarios B and C.
    pub cell: CellConfig,
    pub bench: BenchConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            machine: MachineConfig::default(),
            costs: CostModel::default(),
            memory: MemCostModel::default(),
            contention: ContentionModel::default(),
            load: LoadConfig::default(),
            hypervisor: HypervisorConfig::default(),
            root_memory: MemRegion {
                base: 0x8000_0000,
                len: 0x4000_0000,
            },
            cell: CellConfig {
                name: "bench".into(),
                harts: vec![4, 5],
                memory: vec![MemRegion {
                    base: 0xa000_0000,
                    len: 0x0100_0000,
                }],
                irq_sources: vec![12],
                comm_page: Some(0xa0ff_f000),
            },
            bench: BenchConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.message().replace('\n', " "),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// Harts of the root cell once the benchmark cell exists.
    pub fn root_harts(&self) -> Vec<HartId> {
        (0..self.machine.harts)
            .filter(|h| !self.cell.harts.contains(h))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let n = self.machine.harts;
        if n == 0 || n > 64 {
            return bad(format!("machine.harts must be in 1..=64, got {n}"));
        }
        if self.machine.layout.sources == 0 || self.machine.layout.sources > 64 {
            return bad("machine.layout.sources must be in 1..=64".into());
        }
        self.contention
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("contention: {e}")))?;
        self.memory
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("memory: {e}")))?;
        if !(0.0..=1.0).contains(&self.load.intensity) {
            return bad(format!("load.intensity must be in [0, 1], got {}", self.load.intensity));
        }
        if self.load.period == 0 {
            return bad("load.period must be positive".into());
        }
        if let Some(h) = self.cell.harts.iter().find(|&&h| h >= n) {
            return bad(format!("cell hart {h} does not exist"));
        }
        if self.cell.harts.is_empty() {
            return bad("cell.harts must not be empty".into());
        }
        if let Some(s) = self
            .cell
            .irq_sources
            .iter()
            .find(|&&s| s == 0 || s >= self.machine.layout.sources)
        {
            return bad(format!("cell irq source {s} does not exist"));
        }
        let b = &self.bench;
        if b.iterations == 0 {
            return bad("bench.iterations must be positive".into());
        }
        if b.period == 0 {
            return bad("bench.period must be positive".into());
        }
        if b.hart >= n || b.peer >= n {
            return bad(format!("bench hart {} or peer {} does not exist", b.hart, b.peer));
        }
        if b.hart == b.peer {
            return bad("bench.peer must differ from bench.hart".into());
        }
        if !self.cell.harts.contains(&b.hart) {
            return bad(format!("bench hart {} is not in the benchmark cell", b.hart));
        }
        if !self.cell.irq_sources.contains(&b.source) {
            return bad(format!("irq source {} is not owned by the benchmark cell", b.source));
        }
        if self.machine.layout.identities <= b.source.max(crate::guests::IPI_IDENTITY) {
            return bad("machine.layout.identities too small for the benchmark source".into());
        }
        Ok(())
    }
}
