//! Cost of a synchronous SBI call from S/VS mode: one extra hypervisor
//! round trip in partitioned scenarios.

use rvpart::devices::IrqChip;
use rvpart::guests::BenchmarkKind;
use rvpart::scenarios::{run, RunSpec, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut base = None;
    for s in Scenario::ALL {
        let r = run(&RunSpec::new(BenchmarkKind::SyncTrap, s, IrqChip::PlicClint).with_iterations(5_000))?;
        let median = r.summary.median;
        let extra = base.map(|b| format!("  (+{} over A)", median - b)).unwrap_or_default();
        base.get_or_insert(median);
        println!(
            "{s}: median {median:>4}  max {:>5}  moderations/call {}{extra}",
            r.summary.max, r.samples[0].interventions.sbi_moderation
        );
    }
    Ok(())
}
