//! M-mode SBI firmware: timer programming, IPIs, remote fences, hart
//! control, and forwarding of M-level timer/software interrupts to S level.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kernel::{Action, SimTime, TraceKind};
use crate::machine::InterruptKind;
use crate::system::Platform;
use crate::HartId;

/// Set of harts addressed by an SBI call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HartMask(pub u64);

impl HartMask {
    pub fn single(h: HartId) -> Self {
        HartMask(1 << h)
    }

    pub fn of(harts: &[HartId]) -> Self {
        HartMask(harts.iter().fold(0, |m, &h| m | (1 << h)))
    }

    pub fn iter(self) -> impl Iterator<Item = HartId> {
        (0..64).filter(move |h| self.0 & (1 << h) != 0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// All bits name existing harts.
    pub fn within(self, harts: usize) -> bool {
        harts >= 64 || self.0 >> harts == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SbiFunction {
    SetTimer(SimTime),
    SendIpi(HartMask),
    RemoteFence(HartMask),
    HartStop,
    HartStart(HartId),
}

impl fmt::Display for SbiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SbiFunction::SetTimer(t) => write!(f, "set_timer({t})"),
            SbiFunction::SendIpi(m) => write!(f, "send_ipi({:#x})", m.0),
            SbiFunction::RemoteFence(m) => write!(f, "rfence({:#x})", m.0),
            SbiFunction::HartStop => f.write_str("hart_stop"),
            SbiFunction::HartStart(h) => write!(f, "hart_start({h})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SbiCall {
    pub function: SbiFunction,
    pub caller: HartId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SbiStatus {
    Ok,
    /// Only ever produced by hypervisor moderation.
    Denied,
    Invalid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SbiOutcome {
    pub status: SbiStatus,
    /// Cycles the caller spent in the call.
    pub cycles: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirmwareStats {
    pub calls: u64,
    pub set_timer: u64,
    pub send_ipi: u64,
    pub rfence: u64,
    pub hart_control: u64,
    pub forwarded_timer: u64,
    pub forwarded_soft: u64,
}

/// Executes one SBI function. The caller is already in M mode.
pub fn dispatch(plat: &mut Platform, call: SbiCall) -> SbiStatus {
    plat.fw.calls += 1;
    let caller = call.caller;
    let costs = plat.machine.costs;
    plat.machine.charge(caller, costs.sbi_cost);
    let t = plat.clock(caller);
    plat.kernel
        .trace
        .record(t, caller, TraceKind::SbiCall, || call.function.to_string());
    match call.function {
        SbiFunction::SetTimer(deadline) => sbi_set_timer(plat, caller, deadline),
        SbiFunction::SendIpi(mask) => sbi_send_ipi(plat, caller, mask),
        SbiFunction::RemoteFence(mask) => sbi_rfence(plat, caller, mask),
        SbiFunction::HartStop | SbiFunction::HartStart(_) => {
            plat.fw.hart_control += 1;
            SbiStatus::Ok
        }
    }
}

/// Programs the comparator and clears the firmware-managed S-level timer
/// bit. A deadline at or before now fires at the next event boundary.
pub fn sbi_set_timer(plat: &mut Platform, caller: HartId, deadline: SimTime) -> SbiStatus {
    plat.fw.set_timer += 1;
    plat.devices.clint.mtimecmp[caller] = deadline;
    let h = &mut plat.machine.harts[caller];
    h.enable.insert(InterruptKind::M_TIMER);
    h.clear_pending(InterruptKind::S_TIMER);
    let delay = plat.machine.costs.irq_signal_delay;
    let now = plat.kernel.now();
    plat.sync_lines(now.plus(delay));
    if deadline != SimTime::NEVER {
        plat.kernel
            .schedule_at_or_now(deadline, Action::TimerDeadline { hart: caller });
    }
    SbiStatus::Ok
}

/// Raises the M-level software interrupt of every hart in `mask`.
pub fn sbi_send_ipi(plat: &mut Platform, caller: HartId, mask: HartMask) -> SbiStatus {
    if !mask.within(plat.machine.len()) {
        return SbiStatus::Invalid;
    }
    plat.fw.send_ipi += 1;
    for target in mask.iter() {
        plat.devices.clint.msip[target] = true;
    }
    let at = plat.clock(caller).plus(plat.machine.costs.ipi_propagation);
    plat.sync_lines(at);
    SbiStatus::Ok
}

/// Stateless: only the call cost is modelled.
pub fn sbi_rfence(plat: &mut Platform, _caller: HartId, mask: HartMask) -> SbiStatus {
    if !mask.within(plat.machine.len()) {
        return SbiStatus::Invalid;
    }
    plat.fw.rfence += 1;
    SbiStatus::Ok
}

/// M-level interrupt handler: hands timer and software interrupts down to
/// S level (HS under the hypervisor).
pub fn handle_interrupt(plat: &mut Platform, hart: HartId, kind: InterruptKind) {
    let costs = plat.machine.costs;
    plat.machine.charge(hart, costs.fw_handler_cost);
    let at = plat.clock(hart);
    match kind {
        InterruptKind::M_TIMER => {
            plat.fw.forwarded_timer += 1;
            // MTIP stays high until the next set_timer; mask it meanwhile.
            plat.machine.harts[hart].enable.remove(InterruptKind::M_TIMER);
            plat.set_pending(hart, InterruptKind::S_TIMER, at);
        }
        InterruptKind::M_SOFT => {
            plat.fw.forwarded_soft += 1;
            plat.devices.clint.msip[hart] = false;
            plat.sync_lines(at);
            plat.set_pending(hart, InterruptKind::S_SOFT, at);
        }
        other => {
            plat.machine.harts[hart].enable.remove(other);
            plat.devices
                .diagnostics
                .push(format!("firmware: unexpected {other} on hart {hart}, masked"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_validation() {
        assert!(HartMask::of(&[0, 5]).within(6));
        assert!(!HartMask::of(&[6]).within(6));
        assert!(HartMask::default().within(1));
        assert_eq!(HartMask::of(&[1, 3]).iter().collect::<Vec<_>>(), [1, 3]);
    }
}
