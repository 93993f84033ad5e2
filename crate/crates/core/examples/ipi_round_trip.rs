//! IPI echo between two harts of the benchmark cell for every interrupt
//! controller. SBI doorbells cost four hypervisor entries per round trip;
//! IMSIC guest files need none.

use rvpart::devices::IrqChip;
use rvpart::guests::BenchmarkKind;
use rvpart::scenarios::{run, RunSpec, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for chip in IrqChip::ALL {
        for s in [Scenario::A, Scenario::B] {
            let r = run(&RunSpec::new(BenchmarkKind::IpiRtt, s, chip).with_iterations(500))?;
            let i = r.samples[0].interventions;
            println!(
                "{chip:<10} {s}  rtt {:>5} cycles  HS/iter {}  (moderation {}, injection {})",
                r.summary.median, r.samples[0].hs_traps, i.sbi_moderation, i.ipi_injection
            );
        }
    }
    Ok(())
}
