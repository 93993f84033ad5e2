//! Static-partitioning hypervisor: cell lifecycle during the partitioning
//! phase and exact accounting of every HS entry during the operational
//! phase (SBI moderation, interrupt injection, PLIC trap-and-emulate).

mod cell;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cell::{Cell, CellConfig, CellState, MemRegion, RangeSet};

use crate::devices::{
    aplic, plic, DeviceId, FileLevel, Initiator, MmioOp, MmioOutcome, PlicReg,
};
use crate::firmware::{HartMask, SbiCall, SbiFunction, SbiOutcome, SbiStatus};
use crate::kernel::TraceKind;
use crate::machine::{InterruptKind, IrqClass, IrqLevel, PrivilegeMode, TrapCause, TrapRecord};
use crate::system::Platform;
use crate::{CellId, HartId};

pub const ROOT_CELL: CellId = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Partitioning,
    Operational,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HvError {
    #[error("cell lifecycle operation rejected in the operational phase")]
    PhaseViolation,
    #[error("hart {0} is not owned by the root cell")]
    HartUnavailable(HartId),
    #[error("irq source {0} is not owned by the root cell")]
    SourceUnavailable(u32),
    #[error("memory {base:#x}+{len:#x} is not owned by the root cell")]
    MemoryUnavailable { base: u64, len: u64 },
    #[error("no such cell {0}")]
    NoSuchCell(CellId),
    #[error("the root cell cannot be {0}")]
    RootCell(&'static str),
    #[error("a cell needs at least one hart")]
    EmptyCell,
}

/// Hypervisor interventions per category.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionCounter {
    pub sbi_moderation: u64,
    pub timer_injection: u64,
    pub ipi_injection: u64,
    pub external_injection: u64,
    pub plic_emulation: u64,
    pub denied: u64,
    pub other: u64,
}

impl InterventionCounter {
    pub fn total(&self) -> u64 {
        self.sbi_moderation
            + self.timer_injection
            + self.ipi_injection
            + self.external_injection
            + self.plic_emulation
            + self.denied
            + self.other
    }

    pub fn minus(&self, earlier: &Self) -> Self {
        Self {
            sbi_moderation: self.sbi_moderation - earlier.sbi_moderation,
            timer_injection: self.timer_injection - earlier.timer_injection,
            ipi_injection: self.ipi_injection - earlier.ipi_injection,
            external_injection: self.external_injection - earlier.external_injection,
            plic_emulation: self.plic_emulation - earlier.plic_emulation,
            denied: self.denied - earlier.denied,
            other: self.other - earlier.other,
        }
    }

    pub fn categories(&self) -> [(&'static str, u64); 7] {
        [
            ("sbi_moderation", self.sbi_moderation),
            ("timer_injection", self.timer_injection),
            ("ipi_injection", self.ipi_injection),
            ("external_injection", self.external_injection),
            ("plic_emulation", self.plic_emulation),
            ("denied", self.denied),
            ("other", self.other),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DenyReason {
    ForeignTarget,
    ForeignRegister,
    ReadOnlyRegister,
    LifecycleInOperation,
    NotEmulated,
    InvalidRequest,
}

/// Resolution of one HS trap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HvAction {
    Inject { hart: HartId, kind: InterruptKind },
    EmulateMmio(u64),
    ForwardSbi(SbiOutcome),
    Deny(DenyReason),
    /// Unattributable; counted as `other`.
    Ignore,
}

/// Payload of a synchronous guest trap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GuestRequest {
    None,
    Sbi(SbiFunction),
    Mmio { addr: u64, op: MmioOp },
}

#[derive(Clone, Debug)]
pub struct Hypervisor {
    cells: BTreeMap<CellId, Cell>,
    next_id: CellId,
    phase: Phase,
    pub counters: InterventionCounter,
    /// Inject same-cell IPIs directly instead of forwarding to firmware.
    pub ipi_shortcut: bool,
    pub diagnostics: Vec<String>,
}

impl Hypervisor {
    /// The root cell initially owns every resource.
    pub fn new(harts: usize, sources: u32, memory: RangeSet) -> Self {
        let root = Cell {
            id: ROOT_CELL,
            name: "root".into(),
            harts: (0..harts).collect(),
            memory,
            irq_sources: (1..sources).collect(),
            comm_page: None,
            state: CellState::Running,
        };
        Self {
            cells: BTreeMap::from([(ROOT_CELL, root)]),
            next_id: 1,
            phase: Phase::Partitioning,
            counters: InterventionCounter::default(),
            ipi_shortcut: false,
            diagnostics: Vec::new(),
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn cell(&self, id: CellId) -> Option<&Cell> {
        self.cells.get(&id)
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.values()
    }

    pub fn root(&self) -> &Cell {
        &self.cells[&ROOT_CELL]
    }

    pub fn cell_of_hart(&self, h: HartId) -> Option<&Cell> {
        self.cells.values().find(|c| c.owns_hart(h))
    }

    fn require_partitioning(&self) -> Result<(), HvError> {
        match self.phase {
            Phase::Partitioning => Ok(()),
            Phase::Operational => Err(HvError::PhaseViolation),
        }
    }

    /// Moves the requested resources out of the root cell. Atomic: on error
    /// the root cell is unchanged.
    pub fn create_cell(&mut self, cfg: &CellConfig) -> Result<CellId, HvError> {
        self.require_partitioning()?;
        if cfg.harts.is_empty() {
            return Err(HvError::EmptyCell);
        }
        let root = self.root();
        if let Some(&h) = cfg.harts.iter().find(|h| !root.owns_hart(**h)) {
            return Err(HvError::HartUnavailable(h));
        }
        if let Some(&s) = cfg.irq_sources.iter().find(|s| !root.owns_source(**s)) {
            return Err(HvError::SourceUnavailable(s));
        }
        if let Some(m) = cfg
            .memory
            .iter()
            .find(|m| !root.memory.contains_range(m.base, m.len))
        {
            return Err(HvError::MemoryUnavailable { base: m.base, len: m.len });
        }
        let root = self.cells.get_mut(&ROOT_CELL).expect("root cell");
        let mut memory = RangeSet::new();
        for h in &cfg.harts {
            root.harts.remove(h);
        }
        for s in &cfg.irq_sources {
            root.irq_sources.remove(s);
        }
        for m in &cfg.memory {
            root.memory.remove(m.base, m.len);
            memory.insert(m.base, m.len);
        }
        let id = self.next_id;
        self.next_id += 1;
        self.cells.insert(
            id,
            Cell {
                id,
                name: cfg.name.clone(),
                harts: cfg.harts.iter().copied().collect(),
                memory,
                irq_sources: cfg.irq_sources.iter().copied().collect(),
                comm_page: cfg.comm_page,
                state: CellState::Created,
            },
        );
        Ok(id)
    }

    pub fn start_cell(&mut self, id: CellId) -> Result<(), HvError> {
        self.require_partitioning()?;
        let c = self.cells.get_mut(&id).ok_or(HvError::NoSuchCell(id))?;
        c.state = CellState::Running;
        Ok(())
    }

    pub fn stop_cell(&mut self, id: CellId) -> Result<(), HvError> {
        self.require_partitioning()?;
        if id == ROOT_CELL {
            return Err(HvError::RootCell("stopped"));
        }
        let c = self.cells.get_mut(&id).ok_or(HvError::NoSuchCell(id))?;
        c.state = CellState::Stopped;
        Ok(())
    }

    /// Returns all resources to the root cell.
    pub fn destroy_cell(&mut self, id: CellId) -> Result<(), HvError> {
        self.require_partitioning()?;
        if id == ROOT_CELL {
            return Err(HvError::RootCell("destroyed"));
        }
        let cell = self.cells.remove(&id).ok_or(HvError::NoSuchCell(id))?;
        let root = self.cells.get_mut(&ROOT_CELL).expect("root cell");
        root.harts.extend(cell.harts);
        root.irq_sources.extend(cell.irq_sources);
        for &(a, b) in cell.memory.ranges() {
            root.memory.insert(a, b - a);
        }
        Ok(())
    }

    /// After the last cell start; lifecycle operations are rejected from now on.
    pub fn enter_operational_phase(&mut self) {
        self.phase = Phase::Operational;
    }

    fn running_cell_of(&self, h: HartId) -> Option<&Cell> {
        self.cell_of_hart(h).filter(|c| c.state == CellState::Running)
    }

    /// Resolves one HS trap, applies the action, and counts it in exactly
    /// one category.
    pub fn handle_trap(&mut self, plat: &mut Platform, rec: &TrapRecord, req: GuestRequest) -> HvAction {
        debug_assert_eq!(rec.to_mode, PrivilegeMode::HS);
        let hart = rec.hart;
        let action = match (rec.cause, req) {
            (TrapCause::Interrupt(k), _) if k.level == IrqLevel::S => {
                if self.running_cell_of(hart).is_none() {
                    HvAction::Ignore
                } else {
                    // The physical bit stays raised (timer, external) until the
                    // guest's set_timer or claim; mask it meanwhile.
                    match k.class {
                        IrqClass::Software => {
                            plat.clear_pending(hart, InterruptKind::S_SOFT);
                        }
                        IrqClass::Timer | IrqClass::External => {
                            plat.machine.harts[hart].enable.remove(k);
                        }
                    }
                    let vk = InterruptKind::new(k.class, IrqLevel::VS);
                    self.inject_irq(plat, hart, vk);
                    HvAction::Inject { hart, kind: vk }
                }
            }
            (TrapCause::EcallFromVs, GuestRequest::Sbi(f)) => self.moderate_sbi(plat, hart, f),
            (TrapCause::GuestMmioFault, GuestRequest::Mmio { addr, op }) => {
                match plat.devices.map.lookup(addr).map(|r| r.device) {
                    Some(DeviceId::Plic) | Some(DeviceId::Aplic) => {
                        match self.emulate_plic_access(plat, hart, addr, op) {
                            Ok(v) => HvAction::EmulateMmio(v),
                            Err(r) => HvAction::Deny(r),
                        }
                    }
                    Some(DeviceId::ImsicM) | Some(DeviceId::ImsicS) => HvAction::Deny(DenyReason::ForeignRegister),
                    Some(_) => HvAction::Deny(DenyReason::NotEmulated),
                    None => HvAction::Deny(DenyReason::InvalidRequest),
                }
            }
            _ => HvAction::Ignore,
        };
        match action {
            HvAction::Deny(reason) => {
                self.counters.denied += 1;
                let t = plat.clock(hart);
                plat.kernel
                    .trace
                    .record(t, hart, TraceKind::TrapExit, || format!("deny {reason:?}"));
            }
            HvAction::Ignore => {
                self.counters.other += 1;
                self.diagnostics
                    .push(format!("unattributable HS trap on hart {hart}: {}", rec.cause));
            }
            _ => {}
        }
        action
    }

    fn moderate_sbi(&mut self, plat: &mut Platform, hart: HartId, f: SbiFunction) -> HvAction {
        let Some(cell) = self.running_cell_of(hart) else {
            return HvAction::Deny(DenyReason::InvalidRequest);
        };
        let in_cell = |m: HartMask| m.iter().all(|t| cell.owns_hart(t));
        let allowed = match f {
            SbiFunction::SetTimer(_) => true,
            SbiFunction::SendIpi(m) | SbiFunction::RemoteFence(m) => {
                if !m.within(plat.machine.len()) {
                    return HvAction::Deny(DenyReason::InvalidRequest);
                }
                in_cell(m)
            }
            SbiFunction::HartStop | SbiFunction::HartStart(_) => {
                return HvAction::Deny(DenyReason::LifecycleInOperation);
            }
        };
        if !allowed {
            return HvAction::Deny(DenyReason::ForeignTarget);
        }
        self.counters.sbi_moderation += 1;
        let start = plat.clock(hart);
        let status = match f {
            SbiFunction::SendIpi(m) if self.ipi_shortcut => {
                let at = plat.clock(hart).plus(plat.machine.costs.ipi_propagation);
                for t in m.iter() {
                    plat.set_pending(t, InterruptKind::VS_SOFT, at);
                }
                SbiStatus::Ok
            }
            _ => plat.m_ecall(SbiCall { function: f, caller: hart }),
        };
        if let SbiFunction::SetTimer(_) = f {
            plat.clear_pending(hart, InterruptKind::VS_TIMER);
            let at = plat.clock(hart);
            plat.enable(hart, InterruptKind::S_TIMER, at);
        }
        HvAction::ForwardSbi(SbiOutcome {
            status,
            cycles: plat.clock(hart).since(start),
        })
    }

    /// Sets the VS-level pending bit (the hvip analog).
    pub fn inject_irq(&mut self, plat: &mut Platform, hart: HartId, kind: InterruptKind) {
        match kind.class {
            IrqClass::Timer => self.counters.timer_injection += 1,
            IrqClass::Software => self.counters.ipi_injection += 1,
            IrqClass::External => self.counters.external_injection += 1,
        }
        let t = plat.clock(hart);
        plat.kernel
            .trace
            .record(t, hart, TraceKind::Injection, || kind.to_string());
        plat.set_pending(hart, kind, t);
    }

    /// Validates a trapped guest access to the wired-interrupt controller
    /// against the guest's cell, performs it on the real device, and keeps
    /// the injected VS external bit in step with the physical line.
    pub fn emulate_plic_access(
        &mut self,
        plat: &mut Platform,
        hart: HartId,
        addr: u64,
        op: MmioOp,
    ) -> Result<u64, DenyReason> {
        let cell = self.running_cell_of(hart).ok_or(DenyReason::InvalidRequest)?.clone();
        let costs = plat.machine.costs;
        plat.machine.charge(hart, costs.hv_emulation_cost);
        let region = *plat.devices.map.lookup(addr).ok_or(DenyReason::InvalidRequest)?;
        let offset = addr - region.base;
        let mut read_mask = u64::MAX;
        let mut completes = false;
        match region.device {
            DeviceId::Plic => {
                let p = plat.devices.plic.as_ref().ok_or(DenyReason::NotEmulated)?;
                let reg = plat
                    .devices
                    .layout
                    .plic
                    .decode(offset, p.sources, p.contexts())
                    .ok_or(DenyReason::InvalidRequest)?;
                let own_ctx = |ctx: usize| {
                    let (h, s_level) = plic::context_hart(ctx);
                    s_level && cell.owns_hart(h)
                };
                let mask = cell.source_mask();
                match reg {
                    PlicReg::Priority(s) if !cell.owns_source(s) => {
                        return Err(DenyReason::ForeignRegister)
                    }
                    PlicReg::Priority(_) => {}
                    PlicReg::Pending(w) => {
                        if matches!(op, MmioOp::Write(_)) {
                            return Err(DenyReason::ReadOnlyRegister);
                        }
                        read_mask = (mask >> (32 * w)) & 0xffff_ffff;
                    }
                    PlicReg::Enable { ctx, word } => {
                        if !own_ctx(ctx) {
                            return Err(DenyReason::ForeignRegister);
                        }
                        let word_mask = (mask >> (32 * word)) & 0xffff_ffff;
                        if let MmioOp::Write(v) = op {
                            if v & !word_mask & 0xffff_ffff != 0 {
                                return Err(DenyReason::ForeignRegister);
                            }
                        }
                        read_mask = word_mask;
                    }
                    PlicReg::Threshold(ctx) if !own_ctx(ctx) => {
                        return Err(DenyReason::ForeignRegister)
                    }
                    PlicReg::Threshold(_) => {}
                    PlicReg::Claim(ctx) => {
                        if !own_ctx(ctx) {
                            return Err(DenyReason::ForeignRegister);
                        }
                        if let MmioOp::Write(v) = op {
                            if !cell.owns_source(v as u32) {
                                return Err(DenyReason::ForeignRegister);
                            }
                            completes = true;
                        }
                    }
                }
            }
            DeviceId::Aplic => {
                let n = plat.devices.layout.sources as u64;
                let in_range = |base: u64| (base..base + 4 * (n - 1)).contains(&offset);
                if offset >= aplic::IDC_BASE {
                    let h = ((offset - aplic::IDC_BASE) / aplic::IDC_STRIDE) as HartId;
                    if !cell.owns_hart(h) {
                        return Err(DenyReason::ForeignRegister);
                    }
                    if offset % aplic::IDC_STRIDE == aplic::IDC_CLAIMI {
                        if let MmioOp::Write(v) = op {
                            if !cell.owns_source(v as u32) {
                                return Err(DenyReason::ForeignRegister);
                            }
                            completes = true;
                        }
                    }
                } else if in_range(aplic::SOURCECFG_BASE) || in_range(aplic::TARGET_BASE) {
                    let base = if in_range(aplic::TARGET_BASE) {
                        aplic::TARGET_BASE
                    } else {
                        aplic::SOURCECFG_BASE
                    };
                    let src = ((offset - base) / 4 + 1) as u32;
                    if !cell.owns_source(src) {
                        return Err(DenyReason::ForeignRegister);
                    }
                    if let (MmioOp::Write(v), true) = (op, base == aplic::TARGET_BASE) {
                        if !cell.owns_hart((v >> 18) as HartId) {
                            return Err(DenyReason::ForeignRegister);
                        }
                    }
                } else if offset == aplic::SETIENUM || offset == aplic::CLRIENUM {
                    match op {
                        MmioOp::Write(v) if cell.owns_source(v as u32) => {}
                        _ => return Err(DenyReason::ForeignRegister),
                    }
                } else {
                    return Err(DenyReason::InvalidRequest);
                }
            }
            _ => return Err(DenyReason::NotEmulated),
        }
        let who = Initiator {
            hart,
            mode: PrivilegeMode::HS,
            cell: None,
        };
        let value = match plat.device_mmio(who, addr, op) {
            MmioOutcome::Value(v) => v & read_mask,
            MmioOutcome::GuestFault | MmioOutcome::Denied(_) => return Err(DenyReason::InvalidRequest),
        };
        self.counters.plic_emulation += 1;
        // Virtual line follows the physical one: drop the injected bit once
        // the context has nothing claimable, re-arm after completion.
        let h = &plat.machine.harts[hart];
        if !h.pending.contains(InterruptKind::S_EXT) {
            plat.clear_pending(hart, InterruptKind::VS_EXT);
        }
        if completes {
            let at = plat.clock(hart);
            plat.enable(hart, InterruptKind::S_EXT, at);
        }
        Ok(value)
    }

    /// Cells other than `id`.
    pub fn foreign_harts(&self, id: CellId) -> BTreeSet<HartId> {
        self.cells
            .values()
            .filter(|c| c.id != id)
            .flat_map(|c| c.harts.iter().copied())
            .collect()
    }

    /// IMSIC guest-file pages a cell may map exclusively.
    pub fn vs_file_pages(&self, id: CellId, plat: &Platform) -> Vec<u64> {
        self.cells
            .get(&id)
            .map(|c| {
                c.harts
                    .iter()
                    .map(|&h| plat.devices.layout.imsic_file_addr(h, FileLevel::VS))
                    .collect()
            })
            .unwrap_or_default()
    }
}
