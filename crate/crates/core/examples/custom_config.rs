//! Loads a partial TOML config and runs the benchmark it describes,
//! then the same benchmark with the built-in cost model for contrast.

use rvpart::config::SimConfig;
use rvpart::scenarios::{run, RunSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/rvpart.toml");
    let cfg = SimConfig::load(path.as_ref())?;
    let custom = RunSpec::from_config(cfg.clone());
    let stock = RunSpec::from_config(SimConfig { costs: Default::default(), ..cfg });
    for (name, spec) in [("custom", custom), ("stock", stock)] {
        let s = run(&spec)?.summary;
        println!("{name:<6} {}: median {} p99 {} max {}", spec.label(), s.median, s.p99, s.max);
    }

    // Invalid values are rejected before anything runs.
    let err = SimConfig::from_toml("[load]\nintensity = 2.0\n", "inline").unwrap_err();
    println!("rejected: {err}");
    Ok(())
}
