//! Report bundles: summary JSON, samples CSV, histogram SVG, manifest, and
//! optionally the event trace.

mod svg;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use svg::render_histogram;

use crate::kernel::write_trace_csv;
use crate::scenarios::{ResultSet, RunSpec};

pub const SAMPLES_HEADER: [&str; 9] = [
    "benchmark",
    "scenario",
    "irqchip",
    "iteration",
    "cycles",
    "hs_traps",
    "m_entries",
    "phase",
    "seed",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
    All,
}

impl Format {
    fn wants(self, f: Format) -> bool {
        self == Format::All || self == f
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            "all" => Ok(Format::All),
            _ => Err(format!("unknown format `{s}` (expected csv, json, svg or all)")),
        }
    }
}

/// Samples of one or more runs. Phased benchmarks emit one row per phase;
/// the others leave `phase` empty.
pub fn write_samples_csv<W: Write>(results: &[&ResultSet], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SAMPLES_HEADER)?;
    for r in results {
        let (b, s, c, seed) = (r.benchmark.as_str(), r.scenario.as_str(), r.irqchip.as_str(), r.seed.to_string());
        for sample in &r.samples {
            let iteration = sample.iteration.to_string();
            let hs = sample.hs_traps.to_string();
            let m = sample.m_entries.to_string();
            match &sample.phases {
                Some(p) => {
                    for (phase, cycles) in p.named() {
                        w.write_record([b, s, c, &iteration, &cycles.to_string(), &hs, &m, phase, &seed])?;
                    }
                }
                None => {
                    w.write_record([b, s, c, &iteration, &sample.cycles.to_string(), &hs, &m, "", &seed])?;
                }
            }
        }
    }
    w.flush().map_err(|source| ReportError::Io {
        path: "samples".into(),
        source,
    })?;
    Ok(())
}

pub fn summary_json(r: &ResultSet) -> Result<String, ReportError> {
    Ok(serde_json::to_string_pretty(r)? + "\n")
}

/// Enough to reproduce the bundle: the full spec and the tool version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub spec: RunSpec,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(spec: &RunSpec, files: Vec<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            spec: spec.clone(),
            files,
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    fs::write(path, bytes).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the bundle for one run into `dir`; returns the files written.
pub fn write_bundle(dir: &Path, spec: &RunSpec, r: &ResultSet, format: Format) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut names = Vec::new();
    if format.wants(Format::Json) {
        write_file(&dir.join("summary.json"), summary_json(r)?.as_bytes())?;
        names.push("summary.json".to_string());
    }
    if format.wants(Format::Csv) {
        let mut buf = Vec::new();
        write_samples_csv(&[r], &mut buf)?;
        write_file(&dir.join("samples.csv"), &buf)?;
        names.push("samples.csv".to_string());
        if spec.trace {
            let mut buf = Vec::new();
            write_trace_csv(&r.trace, &mut buf)?;
            write_file(&dir.join("trace.csv"), &buf)?;
            names.push("trace.csv".to_string());
        }
    }
    if format.wants(Format::Svg) {
        let svg = render_histogram(&spec.label(), &[(r.scenario.to_string(), &r.summary)]);
        write_file(&dir.join("histogram.svg"), svg.as_bytes())?;
        names.push("histogram.svg".to_string());
    }
    let manifest = Manifest::new(spec, names.clone());
    write_file(
        &dir.join("manifest.json"),
        (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes(),
    )?;
    names.push("manifest.json".to_string());
    Ok(names.into_iter().map(|n| dir.join(n)).collect())
}

/// Reads a `summary.json` written by [`write_bundle`].
pub fn read_summary(path: &Path) -> Result<ResultSet, ReportError> {
    let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}
