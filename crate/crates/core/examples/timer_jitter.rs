//! Periodic timer jitter on bare metal, in a partitioned cell, and under
//! root-cell load.
//!
//!     cargo run --example timer_jitter [iterations]

use rvpart::devices::IrqChip;
use rvpart::guests::BenchmarkKind;
use rvpart::scenarios::{run, RunSpec, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2_000);
    println!("{:<9} {:>6} {:>6} {:>6} {:>6}  HS/iter", "scenario", "min", "median", "p99", "max");
    for s in Scenario::ALL {
        let spec = RunSpec::new(BenchmarkKind::TimerJitter, s, IrqChip::PlicClint).with_iterations(n);
        let r = run(&spec)?;
        let m = &r.summary;
        println!(
            "{:<9} {:>6} {:>6} {:>6} {:>6}  {}",
            s, m.min, m.median, m.p99, m.max, m.hs_traps.max
        );
    }
    // Under the hypervisor each period costs one set_timer moderation and
    // one timer injection.
    let b = run(&RunSpec::new(BenchmarkKind::TimerJitter, Scenario::B, IrqChip::PlicClint).with_iterations(1))?;
    for (name, n) in b.samples[0].interventions.categories() {
        if n > 0 {
            println!("  {name}: {n}");
        }
    }
    Ok(())
}
