//! Writes a full report bundle (JSON summary, samples CSV, trace CSV,
//! histogram SVG, replay manifest) and reads the summary back.
//!
//!     cargo run --example report_bundle [out-dir]

use std::path::PathBuf;

use rvpart::devices::IrqChip;
use rvpart::guests::BenchmarkKind;
use rvpart::report::{read_summary, write_bundle, Format};
use rvpart::scenarios::{run, RunSpec, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rvpart-bundle"));
    let mut spec = RunSpec::new(BenchmarkKind::IpiRtt, Scenario::C, IrqChip::PlicClint).with_iterations(1_000);
    spec.trace = true;
    let r = run(&spec)?;
    for f in write_bundle(&dir, &spec, &r, Format::All)? {
        println!("{:>9} bytes  {}", std::fs::metadata(&f)?.len(), f.display());
    }
    let back = read_summary(&dir.join("summary.json"))?;
    assert_eq!(back.summary, r.summary);
    println!("summary round-trips: median {} p99 {}", back.summary.median, back.summary.p99);
    Ok(())
}
