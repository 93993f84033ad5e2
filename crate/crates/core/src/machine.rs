//! Hart state: privilege modes, per-level interrupt pending/enable bits,
//! fixed delegation, trap entry/return, and the analytic memory cost model.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{sample_contention, ContentionModel, RngState, SimTime};
use crate::{CellId, HartId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrivilegeMode {
    U,
    /// Supervisor without hypervisor extension in use (bare-metal runs).
    SBare,
    VS,
    HS,
    M,
}

impl PrivilegeMode {
    fn rank(self) -> u8 {
        match self {
            PrivilegeMode::U => 0,
            PrivilegeMode::VS => 1,
            PrivilegeMode::SBare | PrivilegeMode::HS => 2,
            PrivilegeMode::M => 3,
        }
    }

    /// `self ≻ other`. VS and S-bare never meet on one hart, so their
    /// relative order is irrelevant.
    pub fn more_privileged_than(self, other: PrivilegeMode) -> bool {
        self.rank() > other.rank()
    }
}

impl fmt::Display for PrivilegeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrivilegeMode::U => "U",
            PrivilegeMode::SBare => "S",
            PrivilegeMode::VS => "VS",
            PrivilegeMode::HS => "HS",
            PrivilegeMode::M => "M",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IrqClass {
    Software,
    Timer,
    External,
}

/// Level at which a pending bit lives. `S` is HS in virtualized runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IrqLevel {
    S,
    VS,
    M,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InterruptKind {
    pub class: IrqClass,
    pub level: IrqLevel,
}

impl InterruptKind {
    pub const fn new(class: IrqClass, level: IrqLevel) -> Self {
        Self { class, level }
    }

    pub const M_SOFT: Self = Self::new(IrqClass::Software, IrqLevel::M);
    pub const M_TIMER: Self = Self::new(IrqClass::Timer, IrqLevel::M);
    pub const M_EXT: Self = Self::new(IrqClass::External, IrqLevel::M);
    pub const S_SOFT: Self = Self::new(IrqClass::Software, IrqLevel::S);
    pub const S_TIMER: Self = Self::new(IrqClass::Timer, IrqLevel::S);
    pub const S_EXT: Self = Self::new(IrqClass::External, IrqLevel::S);
    pub const VS_SOFT: Self = Self::new(IrqClass::Software, IrqLevel::VS);
    pub const VS_TIMER: Self = Self::new(IrqClass::Timer, IrqLevel::VS);
    pub const VS_EXT: Self = Self::new(IrqClass::External, IrqLevel::VS);

    pub const ALL: [InterruptKind; 9] = [
        Self::S_SOFT,
        Self::VS_SOFT,
        Self::M_SOFT,
        Self::S_TIMER,
        Self::VS_TIMER,
        Self::M_TIMER,
        Self::S_EXT,
        Self::VS_EXT,
        Self::M_EXT,
    ];

    /// Bit position in mip/mie (and the interrupt cause code).
    pub const fn bit(self) -> u32 {
        let base = match self.class {
            IrqClass::Software => 1,
            IrqClass::Timer => 5,
            IrqClass::External => 9,
        };
        base + match self.level {
            IrqLevel::S => 0,
            IrqLevel::VS => 1,
            IrqLevel::M => 2,
        }
    }

    pub fn from_bit(bit: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.bit() == bit)
    }

    /// Level at which a class physically arrives: timer and software go to
    /// M via the CLINT, external to S/HS via the PLIC.
    pub const fn arrival(class: IrqClass) -> Self {
        match class {
            IrqClass::External => Self::S_EXT,
            _ => Self::new(class, IrqLevel::M),
        }
    }

    fn class_priority(self) -> u8 {
        match self.class {
            IrqClass::External => 0,
            IrqClass::Software => 1,
            IrqClass::Timer => 2,
        }
    }
}

impl fmt::Display for InterruptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.level {
            IrqLevel::S => "S",
            IrqLevel::VS => "VS",
            IrqLevel::M => "M",
        };
        let class = match self.class {
            IrqClass::Software => "soft",
            IrqClass::Timer => "timer",
            IrqClass::External => "ext",
        };
        write!(f, "{level}-{class}")
    }
}

/// Bitset over interrupt kinds, laid out like mip.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IrqSet(pub u16);

impl IrqSet {
    pub const EMPTY: IrqSet = IrqSet(0);

    pub fn of(kinds: &[InterruptKind]) -> Self {
        let mut s = Self::EMPTY;
        for &k in kinds {
            s.insert(k);
        }
        s
    }

    pub fn contains(self, k: InterruptKind) -> bool {
        self.0 & (1 << k.bit()) != 0
    }

    pub fn insert(&mut self, k: InterruptKind) -> bool {
        let had = self.contains(k);
        self.0 |= 1 << k.bit();
        !had
    }

    pub fn remove(&mut self, k: InterruptKind) -> bool {
        let had = self.contains(k);
        self.0 &= !(1 << k.bit());
        had
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = InterruptKind> {
        InterruptKind::ALL.into_iter().filter(move |k| self.contains(*k))
    }
}

/// Where each interrupt kind is handled. Fixed at boot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delegation {
    pub virtualized: bool,
}

impl Delegation {
    pub fn route(self, k: InterruptKind) -> PrivilegeMode {
        match k.level {
            IrqLevel::M => PrivilegeMode::M,
            IrqLevel::S if self.virtualized => PrivilegeMode::HS,
            IrqLevel::S => PrivilegeMode::SBare,
            IrqLevel::VS => PrivilegeMode::VS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Owner {
    /// No hypervisor: the hart runs a bare-metal image.
    Bare,
    Cell(CellId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrapCause {
    Interrupt(InterruptKind),
    EcallFromVs,
    /// ecall from S-bare or HS; both land in M.
    EcallFromS,
    GuestMmioFault,
}

impl fmt::Display for TrapCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrapCause::Interrupt(k) => write!(f, "irq:{k}"),
            TrapCause::EcallFromVs => f.write_str("ecall-from-VS"),
            TrapCause::EcallFromS => f.write_str("ecall-from-S"),
            TrapCause::GuestMmioFault => f.write_str("guest-mmio-fault"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrapRecord {
    pub hart: HartId,
    pub cause: TrapCause,
    pub from_mode: PrivilegeMode,
    pub to_mode: PrivilegeMode,
    pub entry_time: SimTime,
    pub exit_time: SimTime,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HartCounters {
    pub m_entries: u64,
    pub hs_entries: u64,
    pub vs_entries: u64,
    pub s_entries: u64,
    /// 0→1 transitions per mip bit.
    pub sets: [u64; 12],
    /// 1→0 transitions per mip bit.
    pub clears: [u64; 12],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hart {
    pub id: HartId,
    /// Mode the hart rests in when no handler runs.
    pub base_mode: PrivilegeMode,
    pub mode: PrivilegeMode,
    mode_stack: Vec<PrivilegeMode>,
    pub pending: IrqSet,
    pub enable: IrqSet,
    /// Guest-level bits the workload busy-waits on with interrupts masked.
    pub poll: IrqSet,
    pub delegation: Delegation,
    pub clock: SimTime,
    pub owner: Owner,
    /// G-stage translation active (guest harts under the hypervisor).
    pub two_stage: bool,
    pub counters: HartCounters,
}

impl Hart {
    pub fn new(id: HartId, virtualized: bool, owner: Owner) -> Self {
        let base_mode = if virtualized {
            PrivilegeMode::VS
        } else {
            PrivilegeMode::SBare
        };
        Self {
            id,
            base_mode,
            mode: base_mode,
            mode_stack: Vec::new(),
            pending: IrqSet::EMPTY,
            enable: IrqSet::of(&[InterruptKind::M_SOFT, InterruptKind::M_TIMER, InterruptKind::M_EXT]),
            poll: IrqSet::EMPTY,
            delegation: Delegation { virtualized },
            clock: SimTime::ZERO,
            owner,
            two_stage: virtualized,
            counters: HartCounters::default(),
        }
    }

    pub fn virtualized(&self) -> bool {
        self.delegation.virtualized
    }

    /// Returns true on a 0→1 transition.
    pub fn set_pending(&mut self, k: InterruptKind) -> bool {
        let changed = self.pending.insert(k);
        if changed {
            self.counters.sets[k.bit() as usize] += 1;
        }
        changed
    }

    /// Returns true on a 1→0 transition.
    pub fn clear_pending(&mut self, k: InterruptKind) -> bool {
        let changed = self.pending.remove(k);
        if changed {
            self.counters.clears[k.bit() as usize] += 1;
        }
        changed
    }

    pub fn set_level(&mut self, k: InterruptKind, level: bool) -> bool {
        if level {
            self.set_pending(k)
        } else {
            self.clear_pending(k)
        }
    }

    pub fn eligible(&self, k: InterruptKind) -> bool {
        if !(self.pending.contains(k) && self.enable.contains(k)) {
            return false;
        }
        let target = self.delegation.route(k);
        target == self.mode || target.more_privileged_than(self.mode)
    }

    /// Highest-priority interrupt that would trap right now.
    pub fn next_trap(&self) -> Option<InterruptKind> {
        self.pending
            .iter()
            .filter(|&k| self.eligible(k))
            .max_by_key(|&k| {
                (
                    self.delegation.route(k).rank(),
                    std::cmp::Reverse(k.class_priority()),
                )
            })
    }

    /// A masked guest-level bit the workload is busy-waiting on.
    pub fn polled(&self) -> Option<InterruptKind> {
        if self.mode != self.base_mode {
            return None;
        }
        self.pending
            .iter()
            .find(|&k| self.poll.contains(k) && !self.enable.contains(k))
    }

    pub fn depth(&self) -> usize {
        self.mode_stack.len()
    }
}

/// Cycle costs of architectural events. Trap costs fold entry and exit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub trap_cost_m: u64,
    pub trap_cost_hs: u64,
    pub trap_cost_vs: u64,
    pub trap_cost_s: u64,
    /// Hypervisor trap dispatch and bookkeeping.
    pub hv_handler_cost: u64,
    /// Instruction decode and register validation for emulated MMIO.
    pub hv_emulation_cost: u64,
    /// Firmware forwarding an M-level timer or software interrupt.
    pub fw_handler_cost: u64,
    /// Firmware executing one SBI function.
    pub sbi_cost: u64,
    /// Device register access on the bus.
    pub mmio_base_cost: u64,
    /// Line-to-core signalling delay for an interrupt.
    pub irq_signal_delay: u64,
    pub ipi_propagation: u64,
    pub poll_granularity: u64,
    pub mailbox_cost: u64,
    /// Claiming from a local IMSIC interrupt file (CSR access).
    pub imsic_claim_cost: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            trap_cost_m: 120,
            trap_cost_hs: 250,
            trap_cost_vs: 80,
            trap_cost_s: 80,
            hv_handler_cost: 150,
            hv_emulation_cost: 300,
            fw_handler_cost: 30,
            sbi_cost: 50,
            mmio_base_cost: 3,
            irq_signal_delay: 5,
            ipi_propagation: 10,
            poll_granularity: 10,
            mailbox_cost: 20,
            imsic_claim_cost: 3,
        }
    }
}

impl CostModel {
    pub fn trap_cost(&self, to: PrivilegeMode) -> u64 {
        match to {
            PrivilegeMode::M => self.trap_cost_m,
            PrivilegeMode::HS => self.trap_cost_hs,
            PrivilegeMode::VS => self.trap_cost_vs,
            PrivilegeMode::SBare => self.trap_cost_s,
            PrivilegeMode::U => 0,
        }
    }
}

/// Probabilistic TLB cost model; no page tables are walked.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemCostModel {
    pub access_cost: u64,
    pub tlb_miss_prob_1stage: f64,
    pub tlb_miss_prob_2stage: f64,
    pub walk_cost_1stage: u64,
    pub walk_cost_2stage: u64,
    /// Multiplier (< 1) on the two-stage miss probability with G-stage huge pages.
    pub hugepage_factor: f64,
}

impl Default for MemCostModel {
    fn default() -> Self {
        Self {
            access_cost: 2,
            tlb_miss_prob_1stage: 0.01,
            tlb_miss_prob_2stage: 0.02,
            walk_cost_1stage: 30,
            walk_cost_2stage: 90,
            hugepage_factor: 0.5,
        }
    }
}

impl MemCostModel {
    pub fn validate(&self) -> Result<(), MachineError> {
        let p1 = self.tlb_miss_prob_1stage;
        let p2 = self.tlb_miss_prob_2stage;
        if !(0.0..=1.0).contains(&p1) || !(0.0..=1.0).contains(&p2) {
            return Err(MachineError::BadMemModel("miss probabilities must be in [0, 1]"));
        }
        if p2 < p1 {
            return Err(MachineError::BadMemModel(
                "two-stage miss probability below single-stage",
            ));
        }
        if !(0.0..=1.0).contains(&self.hugepage_factor) {
            return Err(MachineError::BadMemModel("hugepage_factor must be in [0, 1]"));
        }
        Ok(())
    }

    pub fn miss_probability(&self, stages: TranslationStages, hugepage: bool) -> f64 {
        match stages {
            TranslationStages::One => self.tlb_miss_prob_1stage,
            TranslationStages::Two if hugepage => self.tlb_miss_prob_2stage * self.hugepage_factor,
            TranslationStages::Two => self.tlb_miss_prob_2stage,
        }
    }

    pub fn walk_cost(&self, stages: TranslationStages) -> u64 {
        match stages {
            TranslationStages::One => self.walk_cost_1stage,
            TranslationStages::Two => self.walk_cost_2stage,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TranslationStages {
    One,
    Two,
}

/// Base access plus a probabilistic walk penalty plus contention.
pub fn mem_access_cost(
    model: &MemCostModel,
    stages: TranslationStages,
    hugepage: bool,
    level: f64,
    contention: &ContentionModel,
    rng: &mut RngState,
) -> u64 {
    let mut cost = model.access_cost;
    if rng.bernoulli(model.miss_probability(stages, hugepage)) {
        cost += model.walk_cost(stages);
    }
    cost + sample_contention(level, contention, rng).unwrap_or(0)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MachineError {
    #[error("no such hart {0}")]
    NoSuchHart(HartId),
    #[error("spurious trap on hart {0}: no enabled pending interrupt")]
    SpuriousTrap(HartId),
    #[error("trap return on hart {0} without a matching trap")]
    UnbalancedReturn(HartId),
    #[error("invalid memory cost model: {0}")]
    BadMemModel(&'static str),
}

/// All harts of the platform.
#[derive(Clone, Debug, PartialEq)]
pub struct Machine {
    pub harts: Vec<Hart>,
    pub costs: CostModel,
}

impl Machine {
    pub fn new(harts: Vec<Hart>, costs: CostModel) -> Self {
        Self { harts, costs }
    }

    pub fn hart(&self, id: HartId) -> Result<&Hart, MachineError> {
        self.harts.get(id).ok_or(MachineError::NoSuchHart(id))
    }

    pub fn hart_mut(&mut self, id: HartId) -> Result<&mut Hart, MachineError> {
        self.harts.get_mut(id).ok_or(MachineError::NoSuchHart(id))
    }

    pub fn len(&self) -> usize {
        self.harts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.harts.is_empty()
    }

    /// Sets the pending bit at the class's physical arrival level. Returns
    /// whether the hart would now trap.
    pub fn assert_interrupt(&mut self, hart: HartId, class: IrqClass) -> Result<bool, MachineError> {
        let h = self.hart_mut(hart)?;
        let k = InterruptKind::arrival(class);
        h.set_pending(k);
        Ok(h.eligible(k))
    }

    /// Takes the highest-priority eligible interrupt.
    pub fn take_trap(&mut self, hart: HartId) -> Result<TrapRecord, MachineError> {
        let k = self
            .hart(hart)?
            .next_trap()
            .ok_or(MachineError::SpuriousTrap(hart))?;
        let to = self.harts[hart].delegation.route(k);
        self.enter(hart, TrapCause::Interrupt(k), to)
    }

    /// Synchronous exception into `to`.
    pub fn take_exception(
        &mut self,
        hart: HartId,
        cause: TrapCause,
        to: PrivilegeMode,
    ) -> Result<TrapRecord, MachineError> {
        self.enter(hart, cause, to)
    }

    fn enter(&mut self, hart: HartId, cause: TrapCause, to: PrivilegeMode) -> Result<TrapRecord, MachineError> {
        let cost = self.costs.trap_cost(to);
        let h = self.hart_mut(hart)?;
        let from = h.mode;
        debug_assert!(to == from || to.more_privileged_than(from), "{from} -> {to}");
        let entry = h.clock;
        h.mode_stack.push(from);
        h.mode = to;
        h.clock = h.clock.plus(cost);
        match to {
            PrivilegeMode::M => h.counters.m_entries += 1,
            PrivilegeMode::HS => h.counters.hs_entries += 1,
            PrivilegeMode::VS => h.counters.vs_entries += 1,
            PrivilegeMode::SBare => h.counters.s_entries += 1,
            PrivilegeMode::U => {}
        }
        Ok(TrapRecord {
            hart,
            cause,
            from_mode: from,
            to_mode: to,
            entry_time: entry,
            exit_time: entry,
        })
    }

    /// The only downward mode change.
    pub fn trap_return(&mut self, mut rec: TrapRecord) -> Result<TrapRecord, MachineError> {
        let h = self.hart_mut(rec.hart)?;
        let prev = h
            .mode_stack
            .pop()
            .ok_or(MachineError::UnbalancedReturn(rec.hart))?;
        h.mode = prev;
        rec.exit_time = h.clock;
        Ok(rec)
    }

    pub fn charge(&mut self, hart: HartId, cycles: u64) {
        let h = &mut self.harts[hart];
        h.clock = h.clock.plus(cycles);
    }

    pub fn total_hs_entries(&self) -> u64 {
        self.harts.iter().map(|h| h.counters.hs_entries).sum()
    }

    pub fn total_m_entries(&self) -> u64 {
        self.harts.iter().map(|h| h.counters.m_entries).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::RngState;

    fn machine(virtualized: bool) -> Machine {
        let owner = if virtualized { Owner::Cell(1) } else { Owner::Bare };
        let harts = (0..4).map(|i| Hart::new(i, virtualized, owner)).collect();
        Machine::new(harts, CostModel::default())
    }

    #[test]
    fn cause_bits_follow_privileged_layout() {
        assert_eq!(InterruptKind::S_SOFT.bit(), 1);
        assert_eq!(InterruptKind::VS_SOFT.bit(), 2);
        assert_eq!(InterruptKind::M_SOFT.bit(), 3);
        assert_eq!(InterruptKind::S_TIMER.bit(), 5);
        assert_eq!(InterruptKind::VS_TIMER.bit(), 6);
        assert_eq!(InterruptKind::M_TIMER.bit(), 7);
        assert_eq!(InterruptKind::S_EXT.bit(), 9);
        assert_eq!(InterruptKind::VS_EXT.bit(), 10);
        assert_eq!(InterruptKind::M_EXT.bit(), 11);
        for k in InterruptKind::ALL {
            assert_eq!(InterruptKind::from_bit(k.bit()), Some(k));
        }
    }

    #[test]
    fn timer_detours_through_m_then_hs() {
        let mut m = machine(true);
        m.harts[2].enable.insert(InterruptKind::S_TIMER);
        assert!(m.assert_interrupt(2, IrqClass::Timer).unwrap());
        assert!(m.harts[2].pending.contains(InterruptKind::M_TIMER));
        let rec = m.take_trap(2).unwrap();
        assert_eq!(rec.to_mode, PrivilegeMode::M);
        // firmware forwards to S level
        m.harts[2].clear_pending(InterruptKind::M_TIMER);
        m.harts[2].set_pending(InterruptKind::S_TIMER);
        m.trap_return(rec).unwrap();
        let rec = m.take_trap(2).unwrap();
        assert_eq!(rec.to_mode, PrivilegeMode::HS);
        assert_eq!(rec.from_mode, PrivilegeMode::VS);
    }

    #[test]
    fn external_arrives_at_hs() {
        let mut m = machine(true);
        m.harts[1].enable.insert(InterruptKind::S_EXT);
        assert!(m.assert_interrupt(1, IrqClass::External).unwrap());
        let rec = m.take_trap(1).unwrap();
        assert_eq!(rec.to_mode, PrivilegeMode::HS);
        assert_eq!(m.harts[1].counters.hs_entries, 1);
    }

    #[test]
    fn masked_external_sets_pending_without_trap() {
        let mut m = machine(true);
        assert!(!m.assert_interrupt(1, IrqClass::External).unwrap());
        assert!(m.harts[1].pending.contains(InterruptKind::S_EXT));
        assert_eq!(m.take_trap(1), Err(MachineError::SpuriousTrap(1)));
    }

    #[test]
    fn injected_vs_timer_stays_in_vs() {
        let mut m = machine(true);
        let h = &mut m.harts[0];
        h.enable.insert(InterruptKind::VS_TIMER);
        h.set_pending(InterruptKind::VS_TIMER);
        let rec = m.take_trap(0).unwrap();
        assert_eq!(rec.to_mode, PrivilegeMode::VS);
        assert_eq!(m.harts[0].counters.hs_entries, 0);
        assert_eq!(m.harts[0].clock, SimTime(CostModel::default().trap_cost_vs));
    }

    #[test]
    fn bare_s_timer_handled_in_s() {
        let mut m = machine(false);
        let h = &mut m.harts[3];
        h.enable.insert(InterruptKind::S_TIMER);
        h.set_pending(InterruptKind::S_TIMER);
        let rec = m.take_trap(3).unwrap();
        assert_eq!(rec.to_mode, PrivilegeMode::SBare);
        assert_eq!(m.total_hs_entries(), 0);
    }

    #[test]
    fn m_level_wins_over_s_level() {
        let mut m = machine(true);
        let h = &mut m.harts[0];
        h.enable.insert(InterruptKind::S_EXT);
        h.set_pending(InterruptKind::S_EXT);
        h.set_pending(InterruptKind::M_TIMER);
        assert_eq!(h.next_trap(), Some(InterruptKind::M_TIMER));
    }

    #[test]
    fn return_restores_previous_mode() {
        let mut m = machine(true);
        let outer = m
            .take_exception(0, TrapCause::EcallFromVs, PrivilegeMode::HS)
            .unwrap();
        let inner = m
            .take_exception(0, TrapCause::EcallFromS, PrivilegeMode::M)
            .unwrap();
        assert_eq!(inner.from_mode, PrivilegeMode::HS);
        let inner = m.trap_return(inner).unwrap();
        assert_eq!(m.harts[0].mode, PrivilegeMode::HS);
        let outer = m.trap_return(outer).unwrap();
        assert_eq!(m.harts[0].mode, PrivilegeMode::VS);
        assert!(outer.exit_time >= inner.exit_time);
        assert_eq!(
            m.trap_return(outer),
            Err(MachineError::UnbalancedReturn(0))
        );
    }

    #[test]
    fn transition_counters_track_only_changes() {
        let mut h = Hart::new(0, true, Owner::Cell(1));
        assert!(h.set_pending(InterruptKind::VS_SOFT));
        assert!(!h.set_pending(InterruptKind::VS_SOFT));
        assert!(h.clear_pending(InterruptKind::VS_SOFT));
        assert!(!h.clear_pending(InterruptKind::VS_SOFT));
        let b = InterruptKind::VS_SOFT.bit() as usize;
        assert_eq!(h.counters.sets[b], 1);
        assert_eq!(h.counters.clears[b], 1);
    }

    #[test]
    fn mem_cost_without_penalties_is_base() {
        let model = MemCostModel {
            tlb_miss_prob_1stage: 0.0,
            tlb_miss_prob_2stage: 0.0,
            ..Default::default()
        };
        let mut rng = RngState::new(1);
        for _ in 0..100 {
            let c = mem_access_cost(
                &model,
                TranslationStages::One,
                false,
                0.0,
                &ContentionModel::default(),
                &mut rng,
            );
            assert_eq!(c, model.access_cost);
        }
    }

    fn mean_cost(stages: TranslationStages, hugepage: bool) -> f64 {
        let model = MemCostModel::default();
        let mut rng = RngState::new(7);
        let n = 100_000;
        let total: u64 = (0..n)
            .map(|_| {
                mem_access_cost(&model, stages, hugepage, 0.0, &ContentionModel::default(), &mut rng)
            })
            .sum();
        total as f64 / n as f64
    }

    #[test]
    fn two_stage_costs_more_than_one_stage() {
        assert!(mean_cost(TranslationStages::Two, false) > mean_cost(TranslationStages::One, false));
    }

    #[test]
    fn gstage_hugepages_reduce_cost() {
        // Closed form: base + p * walk; the Monte-Carlo means must bracket it.
        let m = MemCostModel::default();
        let off = m.access_cost as f64 + m.tlb_miss_prob_2stage * m.walk_cost_2stage as f64;
        let on = m.access_cost as f64
            + m.tlb_miss_prob_2stage * m.hugepage_factor * m.walk_cost_2stage as f64;
        let mc_off = mean_cost(TranslationStages::Two, false);
        let mc_on = mean_cost(TranslationStages::Two, true);
        assert!(mc_on < mc_off);
        assert!((mc_off - off).abs() < 0.2 && (mc_on - on).abs() < 0.2);
    }

    #[test]
    fn mem_model_rejects_inverted_probabilities() {
        let bad = MemCostModel {
            tlb_miss_prob_1stage: 0.1,
            tlb_miss_prob_2stage: 0.05,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(MemCostModel::default().validate().is_ok());
    }
}
