use crate::devices::{FileLevel, IrqChip, MmioOp, MmioOutcome};
use crate::kernel::SimTime;
use crate::machine::{InterruptKind, IrqClass, IrqLevel};
use crate::system::{Delivery, GuestIrq, SimError, System, Workload};
use crate::HartId;

use super::{unexpected, Benchmark, BenchmarkKind, BenchmarkSample, PhaseBreakdown, Recorder};

/// Wired interrupt taken, claimed, and completed by the guest.
#[derive(Debug)]
pub struct PlicPath {
    hart: HartId,
    source: u32,
    gap: u64,
    asserted_at: SimTime,
    rec: Recorder,
}

impl PlicPath {
    pub fn new(hart: HartId, source: u32, gap: u64, iterations: usize) -> Self {
        Self {
            hart,
            source,
            gap,
            asserted_at: SimTime::ZERO,
            rec: Recorder::new(iterations),
        }
    }

    fn arm(&mut self, sys: &mut System) {
        self.asserted_at = sys.clock(self.hart).plus(self.gap);
        sys.schedule_wire(self.source, self.asserted_at);
    }

    fn access(sys: &mut System, h: HartId, addr: u64, op: MmioOp) -> Result<u64, SimError> {
        match sys.mmio(h, addr, op)? {
            MmioOutcome::Value(v) => Ok(v),
            other => Err(SimError::Setup(format!("interrupt controller access refused: {other:?}"))),
        }
    }
}

impl Workload for PlicPath {
    fn start(&mut self, sys: &mut System) -> Result<(), SimError> {
        let k = InterruptKind::new(IrqClass::External, sys.guest_level(self.hart));
        sys.set_enable(self.hart, k, true);
        self.rec.baseline(sys);
        self.arm(sys);
        Ok(())
    }

    fn on_irq(&mut self, sys: &mut System, hart: HartId, irq: GuestIrq) -> Result<(), SimError> {
        let level = sys.guest_level(hart);
        if hart != self.hart || irq.delivery != Delivery::Trap || irq.kind != InterruptKind::new(IrqClass::External, level) {
            return Err(unexpected(hart, irq.kind));
        }
        let injection = irq.arrival.since(self.asserted_at);
        let chip = sys.plat.devices.chip;
        let t0 = sys.read_cycle(hart);
        let (id, claim, complete) = match chip {
            IrqChip::AiaMsi => {
                let file = if level == IrqLevel::VS { FileLevel::VS } else { FileLevel::S };
                let id = sys.imsic_claim(hart, file).unwrap_or(0);
                // MSIs need no completion write.
                (id, sys.read_cycle(hart).since(t0), 0)
            }
            IrqChip::PlicClint | IrqChip::AiaDirect => {
                let addr = sys
                    .plat
                    .devices
                    .layout
                    .claim_addr(chip, hart)
                    .expect("wired chips have a claim register");
                let id = Self::access(sys, hart, addr, MmioOp::Read)? as u32;
                let t1 = sys.read_cycle(hart);
                Self::access(sys, hart, addr, MmioOp::Write(id as u64))?;
                (id, t1.since(t0), sys.read_cycle(hart).since(t1))
            }
        };
        if id != self.source {
            return Err(SimError::Protocol(format!(
                "hart {hart} claimed {id} while waiting for source {}",
                self.source
            )));
        }
        let phases = PhaseBreakdown { injection, claim, complete };
        self.rec.record(sys, claim, Some(phases));
        if self.rec.done() {
            sys.set_enable(hart, irq.kind, false);
        } else {
            self.arm(sys);
        }
        Ok(())
    }

    fn done(&self) -> bool {
        self.rec.done()
    }
}

impl Benchmark for PlicPath {
    fn kind(&self) -> BenchmarkKind {
        BenchmarkKind::PlicPath
    }

    fn into_samples(self: Box<Self>) -> Vec<BenchmarkSample> {
        self.rec.into_samples()
    }
}
