//! A guest program written against the `Workload` trait: hart 4 sends
//! itself SBI IPIs and measures how long each takes to arrive.

use rvpart::devices::IrqChip;
use rvpart::firmware::{HartMask, SbiFunction};
use rvpart::guests::BenchmarkKind;
use rvpart::kernel::SimTime;
use rvpart::machine::{InterruptKind, IrqClass};
use rvpart::scenarios::{build_system, RunSpec, Scenario};
use rvpart::system::{GuestIrq, SimError, System, Workload};
use rvpart::HartId;

const HART: HartId = 4;

struct SelfIpi {
    left: usize,
    sent: SimTime,
    latencies: Vec<u64>,
}

impl SelfIpi {
    fn soft(sys: &System) -> InterruptKind {
        InterruptKind::new(IrqClass::Software, sys.guest_level(HART))
    }

    fn send(&mut self, sys: &mut System) -> Result<(), SimError> {
        self.sent = sys.read_cycle(HART);
        sys.ecall(HART, SbiFunction::SendIpi(HartMask::single(HART)))?;
        Ok(())
    }
}

impl Workload for SelfIpi {
    fn start(&mut self, sys: &mut System) -> Result<(), SimError> {
        let k = Self::soft(sys);
        sys.set_enable(HART, k, true);
        self.send(sys)
    }

    fn on_irq(&mut self, sys: &mut System, hart: HartId, irq: GuestIrq) -> Result<(), SimError> {
        sys.clear_guest_pending(hart, irq.kind)?;
        self.latencies.push(irq.arrival.since(self.sent));
        self.left -= 1;
        if self.left > 0 {
            // Sending again from inside the handler would re-raise the
            // interrupt immediately; space iterations with a wake instead.
            let next = sys.clock(hart).plus(1_000);
            sys.schedule_wake(hart, next, 0);
        } else {
            sys.set_enable(hart, irq.kind, false);
        }
        Ok(())
    }

    fn on_wake(&mut self, sys: &mut System, _hart: HartId, _token: u64) -> Result<(), SimError> {
        self.send(sys)
    }

    fn done(&self) -> bool {
        self.left == 0
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for s in [Scenario::A, Scenario::B] {
        // The benchmark kind only matters for the run label here.
        let spec = RunSpec::new(BenchmarkKind::IpiRtt, s, IrqChip::PlicClint);
        let mut sys = build_system(&spec)?;
        let mut wl = SelfIpi { left: 100, sent: SimTime::ZERO, latencies: Vec::new() };
        sys.run(&mut wl)?;
        let max = wl.latencies.iter().max().unwrap();
        println!(
            "{s}: self-IPI latency {} cycles (max {max}), HS entries {}",
            wl.latencies[0],
            sys.total_hs_entries()
        );
    }
    Ok(())
}
