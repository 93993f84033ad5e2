//! Same benchmarks, three interrupt architectures, all partitioned.
//! Each AIA configuration is compared against PLIC/CLINT.

use rvpart::devices::IrqChip;
use rvpart::guests::BenchmarkKind;
use rvpart::scenarios::{compare, sweep, RunSpec, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let specs: Vec<RunSpec> = BenchmarkKind::ALL
        .iter()
        .flat_map(|&b| IrqChip::ALL.map(|c| RunSpec::new(b, Scenario::B, c).with_iterations(1_000)))
        .collect();
    let results = sweep(&specs).into_iter().collect::<Result<Vec<_>, _>>()?;
    for per_bench in results.chunks(IrqChip::ALL.len()) {
        let plic = &per_bench[0];
        println!("{}:", plic.benchmark);
        for other in per_bench {
            let c = compare(plic, other)?;
            println!(
                "  {:<10} median {:>5} ({:>5.2}x)  HS/iter {}  {:?}",
                other.irqchip, other.summary.median, c.median_ratio, other.summary.hs_traps.max, c.verdict
            );
        }
    }
    Ok(())
}
