use crate::firmware::SbiFunction;
use crate::kernel::SimTime;
use crate::machine::{InterruptKind, IrqClass};
use crate::system::{Delivery, GuestIrq, SimError, System, Workload};
use crate::HartId;

use super::{unexpected, Benchmark, BenchmarkKind, BenchmarkSample, Recorder};

/// Periodic timer; each sample is arrival minus deadline.
#[derive(Debug)]
pub struct TimerJitter {
    hart: HartId,
    period: u64,
    deadline: SimTime,
    rec: Recorder,
}

impl TimerJitter {
    pub fn new(hart: HartId, period: u64, iterations: usize) -> Self {
        Self {
            hart,
            period,
            deadline: SimTime::NEVER,
            rec: Recorder::new(iterations),
        }
    }

    fn program(&mut self, sys: &mut System, deadline: SimTime) -> Result<(), SimError> {
        self.deadline = deadline;
        let out = sys.ecall(self.hart, SbiFunction::SetTimer(deadline))?;
        match out.status {
            crate::firmware::SbiStatus::Ok => Ok(()),
            s => Err(SimError::Setup(format!("set_timer rejected: {s:?}"))),
        }
    }

    fn timer_kind(sys: &System, h: HartId) -> InterruptKind {
        InterruptKind::new(IrqClass::Timer, sys.guest_level(h))
    }
}

impl Workload for TimerJitter {
    fn start(&mut self, sys: &mut System) -> Result<(), SimError> {
        let k = Self::timer_kind(sys, self.hart);
        sys.set_enable(self.hart, k, true);
        self.rec.baseline(sys);
        let first = sys.clock(self.hart).plus(self.period);
        self.program(sys, first)
    }

    fn on_irq(&mut self, sys: &mut System, hart: HartId, irq: GuestIrq) -> Result<(), SimError> {
        if hart != self.hart || irq.kind != Self::timer_kind(sys, hart) || irq.delivery != Delivery::Trap {
            return Err(unexpected(hart, irq.kind));
        }
        let jitter = irq.arrival.since(self.deadline);
        self.rec.record(sys, jitter, None);
        if self.rec.done() {
            // Disarm so no timer bit outlives the run.
            self.program(sys, SimTime::NEVER)?;
            sys.set_enable(hart, irq.kind, false);
            return Ok(());
        }
        let next = sys.clock(hart).plus(self.period);
        self.program(sys, next)
    }

    fn done(&self) -> bool {
        self.rec.done()
    }
}

impl Benchmark for TimerJitter {
    fn kind(&self) -> BenchmarkKind {
        BenchmarkKind::TimerJitter
    }

    fn into_samples(self: Box<Self>) -> Vec<BenchmarkSample> {
        self.rec.into_samples()
    }
}
