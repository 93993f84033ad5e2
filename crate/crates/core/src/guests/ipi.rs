use crate::devices::{FileLevel, IrqChip, MmioOp, MmioOutcome};
use crate::firmware::{HartMask, SbiFunction, SbiStatus};
use crate::machine::{InterruptKind, IrqClass, IrqLevel};
use crate::system::{Delivery, GuestIrq, SimError, System, Workload};
use crate::HartId;

use super::{unexpected, Benchmark, BenchmarkKind, BenchmarkSample, Mailbox, Recorder};

/// IMSIC identity reserved for inter-processor doorbells.
pub const IPI_IDENTITY: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Doorbell {
    /// SBI send_ipi through firmware (and the hypervisor).
    Sbi,
    /// Direct ACLINT SSWI store; only reachable on bare metal.
    Sswi,
    /// MSI store into the peer's interrupt file.
    Msi,
}

/// IPI echo between two harts; the sender busy-waits for the reply.
#[derive(Debug)]
pub struct IpiRtt {
    sender: HartId,
    peer: HartId,
    doorbell: Doorbell,
    mailbox: Mailbox,
    seq: u64,
    sent_at: crate::kernel::SimTime,
    rec: Recorder,
}

impl IpiRtt {
    pub fn new(sender: HartId, peer: HartId, iterations: usize) -> Self {
        Self {
            sender,
            peer,
            doorbell: Doorbell::Sbi,
            mailbox: Mailbox::new(),
            seq: 0,
            sent_at: crate::kernel::SimTime::ZERO,
            rec: Recorder::new(iterations),
        }
    }

    pub fn mailbox(&self) -> &Mailbox {
        &self.mailbox
    }

    fn watched(&self, level: IrqLevel) -> InterruptKind {
        let class = match self.doorbell {
            Doorbell::Msi => IrqClass::External,
            Doorbell::Sbi | Doorbell::Sswi => IrqClass::Software,
        };
        InterruptKind::new(class, level)
    }

    fn file(level: IrqLevel) -> FileLevel {
        match level {
            IrqLevel::VS => FileLevel::VS,
            _ => FileLevel::S,
        }
    }

    fn ring(&mut self, sys: &mut System, from: HartId, to: HartId) -> Result<(), SimError> {
        if self.doorbell != Doorbell::Msi {
            self.mailbox.post(sys, from, to, self.seq);
        }
        let refused = match self.doorbell {
            Doorbell::Sbi => {
                let out = sys.ecall(from, SbiFunction::SendIpi(HartMask::single(to)))?;
                (out.status != SbiStatus::Ok).then(|| format!("{:?}", out.status))
            }
            Doorbell::Sswi => {
                let addr = sys.plat.devices.layout.sswi_addr(to);
                match sys.mmio(from, addr, MmioOp::Write(1))? {
                    MmioOutcome::Value(_) => None,
                    other => Some(format!("{other:?}")),
                }
            }
            Doorbell::Msi => {
                let addr = sys
                    .plat
                    .devices
                    .layout
                    .imsic_file_addr(to, Self::file(sys.guest_level(to)));
                match sys.mmio(from, addr, MmioOp::Write(IPI_IDENTITY as u64))? {
                    MmioOutcome::Value(_) => None,
                    other => Some(format!("{other:?}")),
                }
            }
        };
        match refused {
            None => Ok(()),
            Some(why) => Err(SimError::Setup(format!("IPI from hart {from} to hart {to} refused: {why}"))),
        }
    }

    /// Acknowledges the doorbell and reads the message, if any.
    fn consume(&mut self, sys: &mut System, from: HartId, me: HartId, kind: InterruptKind) -> Result<(), SimError> {
        match self.doorbell {
            Doorbell::Msi => {
                let id = sys.imsic_claim(me, Self::file(kind.level));
                if id != Some(IPI_IDENTITY) {
                    return Err(SimError::Protocol(format!("hart {me} claimed {id:?} instead of the IPI identity")));
                }
            }
            Doorbell::Sbi | Doorbell::Sswi => {
                sys.clear_guest_pending(me, kind)?;
                match self.mailbox.take(sys, from, me) {
                    Some(v) if v == self.seq => {}
                    got => {
                        return Err(SimError::Protocol(format!(
                            "hart {me} expected message {} from hart {from}, found {got:?}",
                            self.seq
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

impl Workload for IpiRtt {
    fn start(&mut self, sys: &mut System) -> Result<(), SimError> {
        let level = sys.guest_level(self.sender);
        let chip = sys.plat.devices.chip;
        self.doorbell = match chip {
            IrqChip::AiaMsi => Doorbell::Msi,
            IrqChip::AiaDirect if level == IrqLevel::S => Doorbell::Sswi,
            _ => Doorbell::Sbi,
        };
        for h in [self.sender, self.peer] {
            let k = self.watched(sys.guest_level(h));
            sys.set_poll(h, k, true);
        }
        self.rec.baseline(sys);
        let t = sys.clock(self.sender);
        sys.schedule_wake(self.sender, t, 0);
        Ok(())
    }

    fn on_wake(&mut self, sys: &mut System, hart: HartId, _token: u64) -> Result<(), SimError> {
        if hart != self.sender {
            return Err(unexpected(hart, "wake"));
        }
        self.seq += 1;
        self.sent_at = sys.read_cycle(hart);
        self.ring(sys, self.sender, self.peer)
    }

    fn on_irq(&mut self, sys: &mut System, hart: HartId, irq: GuestIrq) -> Result<(), SimError> {
        if irq.delivery != Delivery::Poll || irq.kind != self.watched(sys.guest_level(hart)) {
            return Err(unexpected(hart, irq.kind));
        }
        if hart == self.peer {
            self.consume(sys, self.sender, hart, irq.kind)?;
            self.ring(sys, self.peer, self.sender)
        } else if hart == self.sender {
            let rtt = irq.arrival.since(self.sent_at);
            self.consume(sys, self.peer, hart, irq.kind)?;
            self.rec.record(sys, rtt, None);
            if !self.rec.done() {
                let t = sys.clock(hart);
                sys.schedule_wake(hart, t, 0);
            } else {
                for h in [self.sender, self.peer] {
                    let k = self.watched(sys.guest_level(h));
                    sys.set_poll(h, k, false);
                }
            }
            Ok(())
        } else {
            Err(unexpected(hart, irq.kind))
        }
    }

    fn done(&self) -> bool {
        self.rec.done()
    }
}

impl Benchmark for IpiRtt {
    fn kind(&self) -> BenchmarkKind {
        BenchmarkKind::IpiRtt
    }

    fn into_samples(self: Box<Self>) -> Vec<BenchmarkSample> {
        self.rec.into_samples()
    }
}
