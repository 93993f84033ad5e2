//! Trap-and-emulate of the PLIC claim/complete registers. Prints the phase
//! breakdown and the trace of a single external interrupt.

use rvpart::devices::IrqChip;
use rvpart::guests::BenchmarkKind;
use rvpart::kernel::TraceKind;
use rvpart::scenarios::{run, RunSpec, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for s in [Scenario::A, Scenario::B] {
        let r = run(&RunSpec::new(BenchmarkKind::PlicPath, s, IrqChip::PlicClint).with_iterations(100))?;
        let p = r.samples[0].phases.expect("plic_path records phases");
        println!(
            "{s}: injection {:>4}  claim {:>4}  complete {:>4}  HS traps {}",
            p.injection, p.claim, p.complete, r.samples[0].hs_traps
        );
    }

    let mut spec = RunSpec::new(BenchmarkKind::PlicPath, Scenario::B, IrqChip::PlicClint).with_iterations(1);
    spec.trace = true;
    let r = run(&spec)?;
    println!("\ntrace of one interrupt on hart {}:", spec.config.bench.hart);
    let first_wire = r.trace.iter().position(|t| t.kind == TraceKind::IrqAssert && t.detail.starts_with("wire"));
    for t in r.trace.iter().skip(first_wire.unwrap_or(0)) {
        println!("{:>8} h{} {:<11} {}", t.time, t.hart, t.kind.as_str(), t.detail);
    }
    Ok(())
}
