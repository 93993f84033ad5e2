//! The assembled platform and the event loop that drives guest workloads.
//!
//! Handlers run to completion on the hart's local clock. M and HS traps are
//! resolved internally (firmware, hypervisor); VS and S-bare traps, and
//! polled bits, are handed to the workload.

use thiserror::Error;

use crate::devices::{DeviceEffect, DeviceLayout, Devices, FileLevel, Initiator, IrqChip, MmioOp, MmioOutcome};
use crate::firmware::{self, FirmwareStats, SbiCall, SbiFunction, SbiOutcome, SbiStatus};
use crate::hypervisor::{GuestRequest, HvAction, Hypervisor};
use crate::kernel::{Action, ContentionModel, Kernel, SimTime, TraceKind};
use crate::machine::{
    CostModel, Hart, InterruptKind, IrqLevel, Machine, MachineError, MemCostModel, Owner, PrivilegeMode,
    TranslationStages, TrapCause, TrapRecord,
};
use crate::{CellId, HartId};

/// Consecutive traps one delivery may take before it counts as a storm.
const STORM_LIMIT: usize = 64;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error("setup failed: {0}")]
    Setup(String),
}

/// Hardware, firmware state, and the kernel. Everything below the hypervisor.
#[derive(Debug)]
pub struct Platform {
    pub kernel: Kernel,
    pub machine: Machine,
    pub devices: Devices,
    pub fw: FirmwareStats,
    pub mem: MemCostModel,
    pub trap_log: Vec<TrapRecord>,
}

impl Platform {
    pub fn new(
        chip: IrqChip,
        layout: DeviceLayout,
        harts: Vec<Hart>,
        costs: CostModel,
        seed: u64,
        contention: ContentionModel,
        trace: bool,
    ) -> Result<Self, SimError> {
        let devices = Devices::new(chip, layout, harts.len()).map_err(|e| SimError::Setup(e.to_string()))?;
        Ok(Self {
            kernel: Kernel::new(seed, contention, trace),
            machine: Machine::new(harts, costs),
            devices,
            fw: FirmwareStats::default(),
            mem: MemCostModel::default(),
            trap_log: Vec::new(),
        })
    }

    pub fn clock(&self, h: HartId) -> SimTime {
        self.machine.harts[h].clock
    }

    pub fn charge(&mut self, h: HartId, cycles: u64) {
        self.machine.charge(h, cycles);
    }

    /// Samples and charges the contention penalty for one shared access.
    pub fn contend(&mut self, h: HartId) -> u64 {
        let c = self.kernel.contention();
        self.charge(h, c);
        c
    }

    /// Raises a bit; a 0→1 change schedules a delivery attempt at `at`.
    pub fn set_pending(&mut self, h: HartId, k: InterruptKind, at: SimTime) {
        if self.machine.harts[h].set_pending(k) {
            self.kernel.trace.record(at, h, TraceKind::IrqAssert, || k.to_string());
            self.kernel.schedule_at_or_now(at, Action::Deliver { hart: h });
        }
    }

    pub fn clear_pending(&mut self, h: HartId, k: InterruptKind) {
        self.machine.harts[h].clear_pending(k);
    }

    /// Unmasks a bit; if it is already pending, delivery is attempted at `at`.
    pub fn enable(&mut self, h: HartId, k: InterruptKind, at: SimTime) {
        let hart = &mut self.machine.harts[h];
        if hart.enable.insert(k) && hart.pending.contains(k) {
            self.kernel.schedule_at_or_now(at, Action::Deliver { hart: h });
        }
    }

    /// Re-evaluates every device-driven interrupt line.
    pub fn sync_lines(&mut self, at: SimTime) {
        self.devices.set_mtime(self.kernel.now());
        for h in 0..self.machine.len() {
            let (m_ext, s_ext, vs_ext) = self.devices.external_lines(h);
            let mut levels = vec![
                (InterruptKind::M_SOFT, self.devices.clint.msip[h]),
                (InterruptKind::M_TIMER, self.devices.clint.timer_pending(h)),
                (InterruptKind::M_EXT, m_ext),
                (InterruptKind::S_EXT, s_ext),
            ];
            if let Some(vs) = vs_ext {
                levels.push((InterruptKind::VS_EXT, vs));
            }
            for (k, level) in levels {
                if level {
                    self.set_pending(h, k, at);
                } else {
                    self.clear_pending(h, k);
                }
            }
        }
        for effect in std::mem::take(&mut self.devices.effects) {
            match effect {
                DeviceEffect::SupervisorSoft(h) => self.set_pending(h, InterruptKind::S_SOFT, at),
            }
        }
    }

    fn entered(&mut self, rec: &TrapRecord) {
        self.kernel.trace.record(rec.entry_time, rec.hart, TraceKind::TrapEntry, || {
            format!("{} {}->{}", rec.cause, rec.from_mode, rec.to_mode)
        });
    }

    pub fn take_interrupt(&mut self, h: HartId) -> Result<TrapRecord, SimError> {
        let rec = self.machine.take_trap(h)?;
        self.entered(&rec);
        Ok(rec)
    }

    pub fn take_exception(&mut self, h: HartId, cause: TrapCause, to: PrivilegeMode) -> Result<TrapRecord, SimError> {
        let rec = self.machine.take_exception(h, cause, to)?;
        self.entered(&rec);
        Ok(rec)
    }

    pub fn leave(&mut self, rec: TrapRecord) -> Result<TrapRecord, SimError> {
        let rec = self.machine.trap_return(rec)?;
        self.kernel
            .trace
            .record(rec.exit_time, rec.hart, TraceKind::TrapExit, || format!("{} ->{}", rec.cause, rec.from_mode));
        self.trap_log.push(rec);
        Ok(rec)
    }

    /// Environment call into the firmware from S level (HS or S-bare).
    pub fn m_ecall(&mut self, call: SbiCall) -> SbiStatus {
        let rec = self
            .take_exception(call.caller, TrapCause::EcallFromS, PrivilegeMode::M)
            .expect("caller hart exists");
        self.contend(call.caller);
        let status = firmware::dispatch(self, call);
        self.leave(rec).expect("balanced ecall");
        status
    }

    /// One device access. Faulting accesses cost nothing here; the trap
    /// that follows carries the cost.
    pub fn device_mmio(&mut self, who: Initiator, addr: u64, op: MmioOp) -> MmioOutcome {
        let out = self.devices.mmio_access(who, addr, op);
        if let MmioOutcome::Value(_) = out {
            let base = self.machine.costs.mmio_base_cost;
            self.charge(who.hart, base);
            self.contend(who.hart);
            let t = self.clock(who.hart);
            self.kernel
                .trace
                .record(t, who.hart, TraceKind::Mmio, || format!("{op:?} {addr:#x}"));
            self.sync_lines(t);
        }
        out
    }

    /// Memory access through the translation model.
    pub fn mem_access(&mut self, h: HartId, hugepage: bool) -> u64 {
        let stages = if self.machine.harts[h].two_stage {
            TranslationStages::Two
        } else {
            TranslationStages::One
        };
        let level = self.kernel.level();
        let c = crate::machine::mem_access_cost(
            &self.mem,
            stages,
            hugepage,
            level,
            &self.kernel.contention,
            &mut self.kernel.rng,
        );
        self.charge(h, c);
        c
    }
}

/// How a guest learns about an interrupt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delivery {
    /// Trap into the guest's (V)S handler.
    Trap,
    /// Busy-wait loop observed the masked pending bit.
    Poll,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GuestIrq {
    pub kind: InterruptKind,
    pub delivery: Delivery,
    /// Hart clock when the guest code starts running.
    pub arrival: SimTime,
}

/// A scripted guest program.
pub trait Workload {
    fn start(&mut self, sys: &mut System) -> Result<(), SimError>;
    /// The guest must consume `irq.kind` before returning.
    fn on_irq(&mut self, sys: &mut System, hart: HartId, irq: GuestIrq) -> Result<(), SimError>;
    fn on_wake(&mut self, _sys: &mut System, _hart: HartId, _token: u64) -> Result<(), SimError> {
        Ok(())
    }
    fn done(&self) -> bool;
}

/// Root-cell memory traffic in scenario C.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub ticks: u64,
    pub cycles: u64,
}

#[derive(Debug)]
pub struct System {
    pub plat: Platform,
    /// Absent on bare metal.
    pub hv: Option<Hypervisor>,
    pub load_harts: Vec<HartId>,
    pub load_period: u64,
    pub load: LoadStats,
}

impl System {
    pub fn new(plat: Platform, hv: Option<Hypervisor>) -> Self {
        Self {
            plat,
            hv,
            load_harts: Vec::new(),
            load_period: 1_000,
            load: LoadStats::default(),
        }
    }

    pub fn clock(&self, h: HartId) -> SimTime {
        self.plat.clock(h)
    }

    /// Guest cycle-counter read.
    pub fn read_cycle(&self, h: HartId) -> SimTime {
        self.plat.clock(h)
    }

    pub fn compute(&mut self, h: HartId, cycles: u64) {
        self.plat.charge(h, cycles);
    }

    fn cell_of(&self, h: HartId) -> Option<CellId> {
        match self.plat.machine.harts[h].owner {
            Owner::Cell(c) => Some(c),
            Owner::Bare => None,
        }
    }

    fn virtualized(&self, h: HartId) -> bool {
        self.hv.is_some() && self.plat.machine.harts[h].virtualized()
    }

    /// Enters HS, charges the handler, lets the hypervisor act, returns.
    fn hs_trap(&mut self, h: HartId, cause: TrapCause, req: GuestRequest) -> Result<HvAction, SimError> {
        let rec = self.plat.take_exception(h, cause, PrivilegeMode::HS)?;
        self.hs_handle(rec, req)
    }

    fn hs_handle(&mut self, rec: TrapRecord, req: GuestRequest) -> Result<HvAction, SimError> {
        let h = rec.hart;
        let handler = self.plat.machine.costs.hv_handler_cost;
        self.plat.charge(h, handler);
        self.plat.contend(h);
        let hv = self
            .hv
            .as_mut()
            .ok_or_else(|| SimError::Protocol(format!("HS trap on hart {h} without a hypervisor")))?;
        let action = hv.handle_trap(&mut self.plat, &rec, req);
        self.plat.leave(rec)?;
        Ok(action)
    }

    /// SBI call from guest code: moderated by the hypervisor when present.
    pub fn ecall(&mut self, h: HartId, f: SbiFunction) -> Result<SbiOutcome, SimError> {
        let start = self.clock(h);
        if !self.virtualized(h) {
            let status = self.plat.m_ecall(SbiCall { function: f, caller: h });
            return Ok(SbiOutcome { status, cycles: self.clock(h).since(start) });
        }
        let status = match self.hs_trap(h, TrapCause::EcallFromVs, GuestRequest::Sbi(f))? {
            HvAction::ForwardSbi(o) => o.status,
            HvAction::Deny(_) => SbiStatus::Denied,
            _ => SbiStatus::Invalid,
        };
        Ok(SbiOutcome { status, cycles: self.clock(h).since(start) })
    }

    /// Guest load/store to a device address.
    pub fn mmio(&mut self, h: HartId, addr: u64, op: MmioOp) -> Result<MmioOutcome, SimError> {
        let who = Initiator {
            hart: h,
            mode: self.plat.machine.harts[h].mode,
            cell: self.cell_of(h),
        };
        match self.plat.device_mmio(who, addr, op) {
            MmioOutcome::GuestFault => {
                Ok(match self.hs_trap(h, TrapCause::GuestMmioFault, GuestRequest::Mmio { addr, op })? {
                    HvAction::EmulateMmio(v) => MmioOutcome::Value(v),
                    HvAction::Deny(r) => MmioOutcome::Denied(format!("{r:?}")),
                    _ => MmioOutcome::Denied("unhandled".into()),
                })
            }
            other => Ok(other),
        }
    }

    /// CSR-based IMSIC claim (`*topei` read-and-clear). No hypervisor exit.
    pub fn imsic_claim(&mut self, h: HartId, level: FileLevel) -> Option<u32> {
        let cost = self.plat.machine.costs.imsic_claim_cost;
        self.plat.charge(h, cost);
        let id = self.plat.devices.imsic.as_mut()?.claim(h, level);
        let t = self.clock(h);
        self.plat.sync_lines(t);
        id
    }

    /// Shared-memory word access (mailbox slots).
    pub fn shared_access(&mut self, h: HartId) {
        let cost = self.plat.machine.costs.mailbox_cost;
        self.plat.charge(h, cost);
        self.plat.contend(h);
    }

    /// Guest write to its own `sip`/`vsip`: only software bits at the
    /// guest's level may be cleared this way.
    pub fn clear_guest_pending(&mut self, h: HartId, k: InterruptKind) -> Result<(), SimError> {
        let level = self.guest_level(h);
        if k.level != level {
            return Err(SimError::Protocol(format!("hart {h} cannot clear {k}")));
        }
        self.plat.clear_pending(h, k);
        Ok(())
    }

    /// Interrupt level the guest on `h` sees as its own.
    pub fn guest_level(&self, h: HartId) -> IrqLevel {
        if self.virtualized(h) {
            IrqLevel::VS
        } else {
            IrqLevel::S
        }
    }

    pub fn set_enable(&mut self, h: HartId, k: InterruptKind, on: bool) {
        if on {
            let t = self.clock(h);
            self.plat.enable(h, k, t);
        } else {
            self.plat.machine.harts[h].enable.remove(k);
        }
    }

    pub fn set_poll(&mut self, h: HartId, k: InterruptKind, on: bool) {
        let hart = &mut self.plat.machine.harts[h];
        if on {
            hart.poll.insert(k);
            if hart.pending.contains(k) {
                let t = hart.clock;
                self.plat.kernel.schedule_at_or_now(t, Action::Deliver { hart: h });
            }
        } else {
            hart.poll.remove(k);
        }
    }

    pub fn schedule_wake(&mut self, h: HartId, at: SimTime, token: u64) {
        self.plat.kernel.schedule_at_or_now(at, Action::Wake { hart: h, token });
    }

    pub fn schedule_wire(&mut self, source: u32, at: SimTime) {
        self.plat.kernel.schedule_at_or_now(at, Action::WireAssert { source });
    }

    pub fn total_hs_entries(&self) -> u64 {
        self.plat.machine.total_hs_entries()
    }

    pub fn total_m_entries(&self) -> u64 {
        self.plat.machine.total_m_entries()
    }

    /// Brings an idle hart's clock up to the current event time.
    fn catch_up(&mut self, h: HartId) {
        let now = self.plat.kernel.now();
        let hart = &mut self.plat.machine.harts[h];
        hart.clock = hart.clock.max(now);
    }

    /// Takes every interrupt that is deliverable on `h`.
    fn deliver(&mut self, wl: &mut dyn Workload, h: HartId) -> Result<(), SimError> {
        let now = self.plat.kernel.now();
        let clock = self.clock(h);
        if clock > now {
            self.plat.kernel.schedule_at_or_now(clock, Action::Deliver { hart: h });
            return Ok(());
        }
        self.catch_up(h);
        for _ in 0..STORM_LIMIT {
            let hart = &self.plat.machine.harts[h];
            if let Some(k) = hart.next_trap() {
                let rec = self.plat.take_interrupt(h)?;
                match rec.to_mode {
                    PrivilegeMode::M => {
                        self.plat.contend(h);
                        firmware::handle_interrupt(&mut self.plat, h, k);
                        self.plat.leave(rec)?;
                    }
                    PrivilegeMode::HS => {
                        self.hs_handle(rec, GuestRequest::None)?;
                    }
                    _ => {
                        let arrival = self.clock(h);
                        wl.on_irq(self, h, GuestIrq { kind: k, delivery: Delivery::Trap, arrival })?;
                        self.plat.leave(rec)?;
                        if self.plat.machine.harts[h].eligible(k) {
                            return Err(SimError::Protocol(format!(
                                "guest on hart {h} returned with {k} still pending"
                            )));
                        }
                    }
                }
            } else if let Some(k) = hart.polled() {
                let poll = self.plat.machine.costs.poll_granularity;
                self.plat.charge(h, poll);
                let arrival = self.clock(h);
                wl.on_irq(self, h, GuestIrq { kind: k, delivery: Delivery::Poll, arrival })?;
                if self.plat.machine.harts[h].pending.contains(k) {
                    return Err(SimError::Protocol(format!("polled {k} on hart {h} not consumed")));
                }
            } else {
                return Ok(());
            }
        }
        Err(SimError::Protocol(format!("interrupt storm on hart {h}")))
    }

    fn load_tick(&mut self, h: HartId, done: bool) {
        if done {
            return;
        }
        self.catch_up(h);
        let c = self.plat.mem_access(h, false);
        self.load.ticks += 1;
        self.load.cycles += c;
        let next = self.clock(h).plus(self.load_period);
        self.plat.kernel.schedule_at_or_now(next, Action::LoadTick { hart: h });
    }

    /// Runs the workload until it reports completion.
    pub fn run(&mut self, wl: &mut dyn Workload) -> Result<(), SimError> {
        for h in self.load_harts.clone() {
            self.plat.kernel.schedule_at_or_now(SimTime::ZERO, Action::LoadTick { hart: h });
        }
        wl.start(self)?;
        while !wl.done() {
            let Some(ev) = self.plat.kernel.queue.advance() else {
                return Err(SimError::Protocol("workload stalled with no pending events".into()));
            };
            let now = ev.due;
            match ev.action {
                Action::Deliver { hart } => self.deliver(wl, hart)?,
                Action::TimerDeadline { .. } => {
                    let delay = self.plat.machine.costs.irq_signal_delay;
                    self.plat.sync_lines(now.plus(delay));
                }
                Action::WireAssert { source } => {
                    self.plat.kernel.trace.record(now, 0, TraceKind::IrqAssert, || format!("wire {source}"));
                    self.plat.devices.assert_wire(source);
                    let delay = self.plat.machine.costs.irq_signal_delay;
                    self.plat.sync_lines(now.plus(delay));
                }
                Action::LoadTick { hart } => self.load_tick(hart, wl.done()),
                Action::Wake { hart, token } => {
                    self.catch_up(hart);
                    if self.clock(hart) > now {
                        self.plat.kernel.schedule_at_or_now(self.clock(hart), ev.action);
                    } else {
                        wl.on_wake(self, hart, token)?;
                    }
                }
            }
        }
        Ok(())
    }
}
