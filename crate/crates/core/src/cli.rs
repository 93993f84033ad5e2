//! Command-line front end. Every failure prints one `error:` line.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or
//! configuration error, 3 simulation protocol violation.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{SimConfig, CONFIG_ENV};
use crate::devices::IrqChip;
use crate::guests::BenchmarkKind;
use crate::report::{self, Format};
use crate::scenarios::{self, compare, RunError, RunSpec, Scenario};

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PROTOCOL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rvpart", version, about = "Interrupt-path simulator for statically partitioned RISC-V systems")]
struct Cli {
    /// TOML config; flags override its values, which override built-in defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one benchmark and write a report bundle.
    Run(RunArgs),
    /// Compare two summary.json files.
    Compare {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        other: PathBuf,
        /// Print the comparison as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run benchmark × scenario × irqchip combinations in parallel.
    Sweep(SweepArgs),
    /// List the benchmark kinds.
    ListBenchmarks,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Iterations [default: 10000]
    #[arg(long)]
    iterations: Option<usize>,
    /// RNG seed [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Timer period or gap between iterations, in cycles [default: 10000]
    #[arg(long)]
    period: Option<u64>,
    /// Wired interrupt source [default: 12]
    #[arg(long)]
    source: Option<u32>,
    /// Peer hart for the IPI benchmark [default: 5]
    #[arg(long)]
    peer: Option<usize>,
    /// Load intensity in scenario C, in [0, 1] [default: 1.0]
    #[arg(long)]
    intensity: Option<f64>,
    /// Output directory
    #[arg(long, default_value = "rvpart-out")]
    out: PathBuf,
    /// Files to emit: csv, json, svg or all
    #[arg(long, default_value = "all")]
    format: Format,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// timer_jitter, ipi_rtt, plic_path or sync_trap [default: timer_jitter]
    #[arg(long)]
    benchmark: Option<BenchmarkKind>,
    /// A (bare metal), B (partitioned) or C (partitioned with load) [default: B]
    #[arg(long)]
    scenario: Option<Scenario>,
    /// plic_clint, aia_direct or aia_msi [default: plic_clint]
    #[arg(long)]
    irqchip: Option<IrqChip>,
    /// Also write trace.csv
    #[arg(long)]
    trace: bool,
    /// Replay the spec recorded in a bundle's manifest.json; other
    /// simulation flags and the config file are ignored.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    common: Overrides,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Comma-separated benchmarks [default: all]
    #[arg(long, value_delimiter = ',')]
    benchmarks: Vec<BenchmarkKind>,
    /// Comma-separated scenarios [default: A,B,C]
    #[arg(long, value_delimiter = ',')]
    scenarios: Vec<Scenario>,
    /// Comma-separated irqchips [default: all]
    #[arg(long, value_delimiter = ',')]
    irqchips: Vec<IrqChip>,
    #[command(flatten)]
    common: Overrides,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(m: impl ToString) -> Self {
        Self { code: EXIT_USAGE, message: m.to_string() }
    }

    fn runtime(m: impl ToString) -> Self {
        Self { code: EXIT_RUNTIME, message: m.to_string() }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let code = match &e {
            RunError::Config(_) => EXIT_USAGE,
            RunError::Sim(crate::system::SimError::Setup(_)) => EXIT_USAGE,
            _ if e.is_protocol() => EXIT_PROTOCOL,
            _ => EXIT_RUNTIME,
        };
        Self { code, message: e.to_string() }
    }
}

fn load_config(path: Option<&Path>) -> Result<SimConfig, Failure> {
    match path {
        Some(p) => SimConfig::load(p).map_err(Failure::usage),
        None => Ok(SimConfig::default()),
    }
}

fn apply(cfg: &mut SimConfig, o: &Overrides) -> Result<(), Failure> {
    let b = &mut cfg.bench;
    if let Some(v) = o.iterations {
        b.iterations = v;
    }
    if let Some(v) = o.seed {
        b.seed = v;
    }
    if let Some(v) = o.period {
        b.period = v;
    }
    if let Some(v) = o.source {
        b.source = v;
    }
    if let Some(v) = o.peer {
        b.peer = v;
    }
    if let Some(v) = o.intensity {
        cfg.load.intensity = v;
    }
    cfg.validate().map_err(Failure::usage)
}

fn run_cmd(cfg: SimConfig, args: &RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut spec = RunSpec::from_config(cfg);
    if let Some(b) = args.benchmark {
        spec.benchmark = b;
    }
    if let Some(s) = args.scenario {
        spec.scenario = s;
    }
    if let Some(c) = args.irqchip {
        spec.irqchip = c;
    }
    spec.trace = args.trace;
    run_spec(spec, &args.common, out)
}

fn run_spec(spec: RunSpec, o: &Overrides, out: &mut dyn Write) -> Result<(), Failure> {
    let result = scenarios::run(&spec)?;
    let files = report::write_bundle(&o.out, &spec, &result, o.format).map_err(Failure::runtime)?;
    let s = &result.summary;
    let _ = writeln!(
        out,
        "{}: min {} median {} p99 {} max {} cycles; hs_traps/iter {}; m_entries/iter {}",
        spec.label(),
        s.min,
        s.median,
        s.p99,
        s.max,
        per_iter(&s.hs_traps),
        per_iter(&s.m_entries)
    );
    for f in files {
        let _ = writeln!(out, "wrote {}", f.display());
    }
    Ok(())
}

fn per_iter(r: &scenarios::CountRange) -> String {
    match r.constant() {
        Some(v) => v.to_string(),
        None => format!("{}..{}", r.min, r.max),
    }
}

fn or_all<T: Copy>(chosen: &[T], all: &[T]) -> Vec<T> {
    if chosen.is_empty() {
        all.to_vec()
    } else {
        chosen.to_vec()
    }
}

fn sweep_cmd(cfg: SimConfig, args: &SweepArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let benches = or_all(&args.benchmarks, &BenchmarkKind::ALL);
    let scens = or_all(&args.scenarios, &Scenario::ALL);
    let chips = or_all(&args.irqchips, &IrqChip::ALL);
    let mut specs = Vec::new();
    for &b in &benches {
        for &c in &chips {
            for &s in &scens {
                let mut spec = RunSpec::from_config(cfg.clone());
                spec.benchmark = b;
                spec.scenario = s;
                spec.irqchip = c;
                specs.push(spec);
            }
        }
    }
    let results = scenarios::sweep(&specs);
    let mut ok = Vec::new();
    for (spec, r) in specs.iter().zip(results) {
        ok.push((spec, r?));
    }
    let root = &args.common.out;
    for (spec, r) in &ok {
        let dir = root.join(format!("{}_{}_{}", r.benchmark, r.scenario, r.irqchip));
        report::write_bundle(&dir, spec, r, args.common.format).map_err(Failure::runtime)?;
        let _ = writeln!(
            out,
            "{:<28} median {:>7} max {:>7} hs_traps/iter {}",
            spec.label(),
            r.summary.median,
            r.summary.max,
            per_iter(&r.summary.hs_traps)
        );
    }
    if args.common.format == Format::All || args.common.format == Format::Svg {
        for &b in &benches {
            for &c in &chips {
                let series: Vec<_> = ok
                    .iter()
                    .filter(|(_, r)| r.benchmark == b && r.irqchip == c)
                    .map(|(_, r)| (r.scenario.to_string(), &r.summary))
                    .collect();
                let svg = report::render_histogram(&format!("{b}/{c}"), &series);
                let path = root.join(format!("histogram_{b}_{c}.svg"));
                std::fs::write(&path, svg).map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))?;
            }
        }
    }
    let _ = writeln!(out, "wrote {} bundles under {}", ok.len(), root.display());
    Ok(())
}

fn compare_cmd(base: &Path, other: &Path, json: bool, out: &mut dyn Write) -> Result<(), Failure> {
    let b = report::read_summary(base).map_err(Failure::usage)?;
    let o = report::read_summary(other).map_err(Failure::usage)?;
    let c = compare(&b, &o).map_err(Failure::usage)?;
    if json {
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(&c).map_err(Failure::runtime)?);
    } else {
        let _ = writeln!(out, "{c}");
    }
    Ok(())
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::ListBenchmarks => {
            for k in BenchmarkKind::ALL {
                let _ = writeln!(out, "{:<13} {}", k.as_str(), k.description());
            }
            Ok(())
        }
        Command::Compare { base, other, json } => compare_cmd(base, other, *json, out),
        Command::Run(args) if args.manifest.is_some() => {
            let path = args.manifest.as_deref().expect("checked");
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
            let manifest: report::Manifest = serde_json::from_str(&text)
                .map_err(|e| Failure::usage(format!("invalid manifest {}: {e}", path.display())))?;
            run_spec(manifest.spec, &args.common, out)
        }
        Command::Run(args) => {
            let mut cfg = load_config(cli.config.as_deref())?;
            apply(&mut cfg, &args.common)?;
            run_cmd(cfg, args, out)
        }
        Command::Sweep(args) => {
            let mut cfg = load_config(cli.config.as_deref())?;
            apply(&mut cfg, &args.common)?;
            sweep_cmd(cfg, args, out)
        }
    }
}

fn one_line(s: &str) -> String {
    let first = s.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    first.trim_start_matches("error: ").trim().to_string()
}

/// Runs the CLI; returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let _ = writeln!(err, "error: {}", one_line(&e.to_string()));
            return EXIT_USAGE;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", one_line(&f.message));
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::SimError;

    #[test]
    fn exit_code_classes() {
        let code = |e: RunError| Failure::from(e).code;
        assert_eq!(code(RunError::Sim(SimError::Protocol("x".into()))), EXIT_PROTOCOL);
        assert_eq!(code(RunError::Sim(SimError::Setup("x".into()))), EXIT_USAGE);
        assert_eq!(code(RunError::Config(crate::config::ConfigError::Invalid("x".into()))), EXIT_USAGE);
    }

    #[test]
    fn diagnostics_are_one_line() {
        assert_eq!(one_line("\nerror: bad thing\n\nUsage: rvpart"), "bad thing");
    }
}
