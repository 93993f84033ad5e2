//! How root-cell memory traffic stretches the PLIC claim inside the cell.
//! Sweeps the load intensity; 0 reproduces scenario B exactly.

use rvpart::devices::IrqChip;
use rvpart::guests::BenchmarkKind;
use rvpart::scenarios::{run, RunSpec, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bare = 3.0;
    println!("intensity  median    p99      max   max/bare");
    for intensity in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let mut spec = RunSpec::new(BenchmarkKind::PlicPath, Scenario::C, IrqChip::PlicClint).with_iterations(10_000);
        spec.config.load.intensity = intensity;
        let s = run(&spec)?.summary;
        println!(
            "{intensity:>9.2} {:>7} {:>6} {:>8} {:>9.0}x",
            s.median,
            s.p99,
            s.max,
            s.max as f64 / bare
        );
    }
    Ok(())
}
