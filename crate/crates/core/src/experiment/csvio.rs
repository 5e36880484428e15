//! Result-bundle files: sample/CDF/candlestick CSVs with fixed headers, and
//! the per-run metadata document, written to and read back from an output
//! directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{ResponseSample, Setup};
use crate::diameter::{Application, Command};

use super::report::CellStats;
use super::runner::RunResult;

pub const SAMPLES_HEADER: &str = "run_id,setup,R,interface,command,message_id,response_ms";
pub const CDF_HEADER: &str = "setup,R,interface,value_ms,fraction";
pub const CANDLES_HEADER: &str = "setup,R,command,min,q1,mean,q3,max,n";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("io failure on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed csv at line {line}: {reason}")]
    BadCsv { line: usize, reason: String },
    #[error("malformed run metadata: {0}")]
    BadMeta(String),
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Render samples with the fixed header; rows are emitted in input order.
pub fn samples_to_csv(samples: &[ResponseSample]) -> String {
    let mut out = String::with_capacity(64 * samples.len() + 64);
    out.push_str(SAMPLES_HEADER);
    out.push('\n');
    for sample in samples {
        let _ = writeln!(
            out,
            "{},{},{:.2},{},{},{},{:.3}",
            sample.run_id,
            sample.setup,
            sample.target_utilization,
            sample.interface,
            sample.command,
            sample.message_id,
            sample.response_time_ms
        );
    }
    out
}

pub fn samples_from_csv(text: &str) -> Result<Vec<ResponseSample>, BundleError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == SAMPLES_HEADER => {}
        other => {
            return Err(BundleError::BadCsv {
                line: 1,
                reason: format!("expected header '{SAMPLES_HEADER}', got {other:?}"),
            })
        }
    }
    let mut samples = Vec::new();
    for (index, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(BundleError::BadCsv {
                line: index + 1,
                reason: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let parse_err = |reason: String| BundleError::BadCsv { line: index + 1, reason };
        samples.push(ResponseSample {
            run_id: fields[0].to_string(),
            setup: Setup::from_str(fields[1]).map_err(parse_err)?,
            target_utilization: fields[2]
                .parse()
                .map_err(|e| BundleError::BadCsv { line: index + 1, reason: format!("{e}") })?,
            interface: Application::from_str(fields[3])
                .map_err(|e| BundleError::BadCsv { line: index + 1, reason: e })?,
            command: Command::from_str(fields[4])
                .map_err(|e| BundleError::BadCsv { line: index + 1, reason: e })?,
            message_id: fields[5]
                .parse()
                .map_err(|e| BundleError::BadCsv { line: index + 1, reason: format!("{e}") })?,
            response_time_ms: fields[6]
                .parse()
                .map_err(|e| BundleError::BadCsv { line: index + 1, reason: format!("{e}") })?,
        });
    }
    Ok(samples)
}

/// CDF rows for every cell and interface.
pub fn cdf_to_csv(cells: &[CellStats]) -> String {
    let mut out = String::from(CDF_HEADER);
    out.push('\n');
    for cell in cells {
        for (interface, ecdf) in &cell.ecdfs {
            for &(value, fraction) in ecdf.points() {
                let _ = writeln!(
                    out,
                    "{},{:.2},{},{:.3},{:.6}",
                    cell.setup, cell.r, interface, value, fraction
                );
            }
        }
    }
    out
}

/// Candlestick rows for every cell and command.
pub fn candles_to_csv(cells: &[CellStats]) -> String {
    let mut out = String::from(CANDLES_HEADER);
    out.push('\n');
    for cell in cells {
        for (command, candle) in &cell.command_candles {
            let _ = writeln!(
                out,
                "{},{:.2},{},{:.3},{:.3},{:.3},{:.3},{:.3},{}",
                cell.setup,
                cell.r,
                command,
                candle.min,
                candle.q1,
                candle.mean,
                candle.q3,
                candle.max,
                candle.n
            );
        }
    }
    out
}

// --- run metadata -------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunMeta {
    pub run_id: String,
    pub setup: String,
    pub r: f64,
    pub rep: u32,
    pub seed: u64,
    pub duration_s: u64,
    pub generated: u64,
    pub audit_ok: bool,
    pub rates: BTreeMap<String, f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct RunsFile {
    pub runs: Vec<RunMeta>,
}

impl RunsFile {
    pub fn from_results(results: &[RunResult]) -> RunsFile {
        RunsFile {
            runs: results
                .iter()
                .map(|result| RunMeta {
                    run_id: result.run_id.clone(),
                    setup: result.spec.setup.to_string(),
                    r: result.spec.r,
                    rep: result.spec.rep,
                    seed: result.seed,
                    duration_s: result.duration_s,
                    generated: result.generated,
                    audit_ok: result.audit_ok,
                    rates: result
                        .rates
                        .iter()
                        .map(|(interface, rate)| (interface.to_string(), *rate))
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn serialize(&self) -> String {
        toml::to_string(self).expect("metadata serialization cannot fail")
    }

    pub fn parse(text: &str) -> Result<RunsFile, BundleError> {
        toml::from_str(text).map_err(|e| BundleError::BadMeta(e.to_string()))
    }
}

/// Write the whole result bundle: per-run sample CSVs, CDF and candlestick
/// CSVs, run metadata, and a human-readable summary.
pub fn write_bundle(
    dir: &Path,
    results: &[RunResult],
    cells: &[CellStats],
    summary: &str,
) -> Result<(), BundleError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let samples_dir = dir.join("samples");
    fs::create_dir_all(&samples_dir).map_err(io_error(&samples_dir))?;
    for result in results {
        let path = samples_dir.join(format!("{}.csv", result.run_id));
        fs::write(&path, samples_to_csv(&result.samples)).map_err(io_error(&path))?;
    }
    let runs_path = dir.join("runs.toml");
    fs::write(&runs_path, RunsFile::from_results(results).serialize())
        .map_err(io_error(&runs_path))?;
    let cdf_path = dir.join("cdf.csv");
    fs::write(&cdf_path, cdf_to_csv(cells)).map_err(io_error(&cdf_path))?;
    let candles_path = dir.join("candles.csv");
    fs::write(&candles_path, candles_to_csv(cells)).map_err(io_error(&candles_path))?;
    let summary_path = dir.join("summary.txt");
    fs::write(&summary_path, summary).map_err(io_error(&summary_path))?;
    Ok(())
}

/// Load a bundle's metadata and samples back (for `compare`).
pub fn load_bundle(dir: &Path) -> Result<(RunsFile, Vec<ResponseSample>), BundleError> {
    let runs_path = dir.join("runs.toml");
    let meta_text = fs::read_to_string(&runs_path).map_err(io_error(&runs_path))?;
    let meta = RunsFile::parse(&meta_text)?;
    let mut samples = Vec::new();
    for run in &meta.runs {
        let path = dir.join("samples").join(format!("{}.csv", run.run_id));
        let text = fs::read_to_string(&path).map_err(io_error(&path))?;
        samples.extend(samples_from_csv(&text)?);
    }
    Ok((meta, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<ResponseSample> {
        vec![
            ResponseSample {
                message_id: 12,
                interface: Application::Cx,
                command: Command::Lir,
                response_time_ms: 3.25,
                run_id: "split-r0.90-rep1".to_string(),
                setup: Setup::Split,
                target_utilization: 0.9,
            },
            ResponseSample {
                message_id: 13,
                interface: Application::S6a,
                command: Command::Ulr,
                response_time_ms: 117.5,
                run_id: "split-r0.90-rep1".to_string(),
                setup: Setup::Split,
                target_utilization: 0.9,
            },
        ]
    }

    #[test]
    fn samples_csv_uses_the_pinned_header_and_formats() {
        let csv = samples_to_csv(&samples());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "run_id,setup,R,interface,command,message_id,response_ms");
        assert_eq!(lines[1], "split-r0.90-rep1,split,0.90,Cx,LIR,12,3.250");
        assert_eq!(lines[2], "split-r0.90-rep1,split,0.90,S6a,ULR,13,117.500");
    }

    #[test]
    fn samples_csv_round_trips() {
        let originals = samples();
        let parsed = samples_from_csv(&samples_to_csv(&originals)).unwrap();
        assert_eq!(parsed, originals);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(samples_from_csv("nope\n1,2,3\n").is_err());
    }

    #[test]
    fn cdf_and_candle_headers_are_pinned() {
        use super::super::report::analyze_cell;
        let cell = analyze_cell(Setup::Split, 0.9, &samples(), 0.05);
        let cdf = cdf_to_csv(&[cell.clone()]);
        assert!(cdf.starts_with("setup,R,interface,value_ms,fraction\n"), "{cdf}");
        assert!(cdf.contains("split,0.90,Cx,3.250,1.000000"), "{cdf}");
        let candles = candles_to_csv(&[cell]);
        assert!(candles.starts_with("setup,R,command,min,q1,mean,q3,max,n\n"));
        assert!(candles.contains("split,0.90,ULR,117.500,117.500,117.500,117.500,117.500,1"));
    }

    #[test]
    fn bundle_round_trips_through_the_filesystem() {
        use super::super::runner::{RunResult, RunSpec};
        let dir = std::env::temp_dir().join(format!("vnpaas-bundle-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        let result = RunResult {
            spec: RunSpec { setup: Setup::Split, r: 0.9, rep: 1 },
            run_id: "split-r0.90-rep1".to_string(),
            seed: 42,
            duration_s: 60,
            rates: [(Application::S6a, 23.5), (Application::Cx, 280.0)]
                .into_iter()
                .collect(),
            samples: samples(),
            generated: 2,
            audit_ok: true,
        };
        write_bundle(&dir, &[result], &[], "summary\n").unwrap();
        let (meta, loaded) = load_bundle(&dir).unwrap();
        assert_eq!(meta.runs.len(), 1);
        assert_eq!(meta.runs[0].duration_s, 60);
        assert_eq!(loaded, samples());
        fs::remove_dir_all(&dir).unwrap();
    }
}
