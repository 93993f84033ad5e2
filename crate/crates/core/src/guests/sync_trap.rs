use crate::firmware::{HartMask, SbiFunction, SbiStatus};
use crate::system::{GuestIrq, SimError, System, Workload};
use crate::HartId;

use super::{unexpected, Benchmark, BenchmarkKind, BenchmarkSample, Recorder};

/// rdcycle; SBI remote fence on self; rdcycle.
#[derive(Debug)]
pub struct SyncTrap {
    hart: HartId,
    rec: Recorder,
}

impl SyncTrap {
    pub fn new(hart: HartId, iterations: usize) -> Self {
        Self {
            hart,
            rec: Recorder::new(iterations),
        }
    }
}

impl Workload for SyncTrap {
    fn start(&mut self, sys: &mut System) -> Result<(), SimError> {
        self.rec.baseline(sys);
        let t = sys.clock(self.hart);
        sys.schedule_wake(self.hart, t, 0);
        Ok(())
    }

    fn on_irq(&mut self, _sys: &mut System, hart: HartId, irq: GuestIrq) -> Result<(), SimError> {
        Err(unexpected(hart, irq.kind))
    }

    fn on_wake(&mut self, sys: &mut System, hart: HartId, _token: u64) -> Result<(), SimError> {
        let t0 = sys.read_cycle(hart);
        let out = sys.ecall(hart, SbiFunction::RemoteFence(HartMask::single(hart)))?;
        if out.status != SbiStatus::Ok {
            return Err(SimError::Setup(format!("rfence rejected: {:?}", out.status)));
        }
        let t1 = sys.read_cycle(hart);
        self.rec.record(sys, t1.since(t0), None);
        if !self.rec.done() {
            sys.schedule_wake(hart, t1, 0);
        }
        Ok(())
    }

    fn done(&self) -> bool {
        self.rec.done()
    }
}

impl Benchmark for SyncTrap {
    fn kind(&self) -> BenchmarkKind {
        BenchmarkKind::SyncTrap
    }

    fn into_samples(self: Box<Self>) -> Vec<BenchmarkSample> {
        self.rec.into_samples()
    }
}
