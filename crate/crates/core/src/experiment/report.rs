//! Per-cell statistics and the full-versus-split comparison report.
//!
//! Samples are outlier-filtered per (interface, command) group, then
//! summarized per interface (median, mean, p95, empirical CDF) and per
//! command (candlesticks). Comparing the two setups yields median ratios
//! and a first-order stochastic-dominance verdict per interface.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::analysis::{
    candlestick, dominance_report, grubbs_filter, CandlestickSummary, Dominance, Ecdf,
    ResponseSample, Setup,
};
use crate::diameter::{Application, Command};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceStats {
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    pub p95: f64,
}

/// Filtered statistics for one (setup, R) cell of the matrix.
#[derive(Debug, Clone)]
pub struct CellStats {
    pub setup: Setup,
    pub r: f64,
    pub interfaces: BTreeMap<Application, InterfaceStats>,
    pub ecdfs: BTreeMap<Application, Ecdf>,
    pub command_candles: BTreeMap<Command, CandlestickSummary>,
    pub outliers_removed: usize,
    pub sample_count: usize,
}

/// Filter and summarize the pooled samples of one (setup, R) cell.
pub fn analyze_cell(setup: Setup, r: f64, samples: &[ResponseSample], alpha: f64) -> CellStats {
    let mut groups: BTreeMap<(Application, Command), Vec<f64>> = BTreeMap::new();
    for sample in samples {
        groups
            .entry((sample.interface, sample.command))
            .or_default()
            .push(sample.response_time_ms);
    }

    let mut outliers_removed = 0;
    let mut per_interface: BTreeMap<Application, Vec<f64>> = BTreeMap::new();
    let mut command_candles = BTreeMap::new();
    for ((interface, command), values) in groups {
        let outcome = grubbs_filter(&values, alpha).expect("alpha validated by config");
        outliers_removed += outcome.removed.len();
        if !outcome.retained.is_empty() {
            command_candles.insert(
                command,
                candlestick(&outcome.retained).expect("non-empty group"),
            );
        }
        per_interface
            .entry(interface)
            .or_default()
            .extend(outcome.retained);
    }

    let mut interfaces = BTreeMap::new();
    let mut ecdfs = BTreeMap::new();
    for (interface, values) in per_interface {
        if values.is_empty() {
            continue;
        }
        let ecdf = Ecdf::new(&values).expect("non-empty");
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        interfaces.insert(
            interface,
            InterfaceStats {
                n: values.len(),
                median: ecdf.median(),
                mean,
                p95: ecdf.quantile(0.95),
            },
        );
        ecdfs.insert(interface, ecdf);
    }

    CellStats {
        setup,
        r,
        interfaces,
        ecdfs,
        command_candles,
        outliers_removed,
        sample_count: samples.len(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub r: f64,
    pub interface: Application,
    pub full: InterfaceStats,
    pub split: InterfaceStats,
    /// split median / full median.
    pub median_ratio: f64,
    /// Dominance of the split distribution over the full one.
    pub split_dominance: Dominance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandComparisonRow {
    pub r: f64,
    pub command: Command,
    pub full: CandlestickSummary,
    pub split: CandlestickSummary,
}

#[derive(Debug, Clone)]
pub struct IsolationReport {
    pub rows: Vec<ComparisonRow>,
    pub command_rows: Vec<CommandComparisonRow>,
}

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("utilization levels differ between sides: full {full:?}, split {split:?}")]
    MismatchedLevels { full: Vec<u64>, split: Vec<u64> },
    #[error("run durations differ between sides: full {full} s, split {split} s")]
    MismatchedDurations { full: u64, split: u64 },
    #[error("side '{0}' contributes no cells")]
    EmptySide(&'static str),
}

/// One setup's cells plus the run duration they were measured over.
pub struct Side {
    pub duration_s: u64,
    pub cells: Vec<CellStats>,
}

fn level_keys(cells: &[CellStats]) -> Vec<u64> {
    let mut keys: Vec<u64> = cells.iter().map(|c| (c.r * 1000.0).round() as u64).collect();
    keys.sort_unstable();
    keys.dedup();
    keys
}

/// Build the isolation report from matching full and split sides.
pub fn compare(full: &Side, split: &Side) -> Result<IsolationReport, CompareError> {
    if full.cells.is_empty() {
        return Err(CompareError::EmptySide("full"));
    }
    if split.cells.is_empty() {
        return Err(CompareError::EmptySide("split"));
    }
    if full.duration_s != split.duration_s {
        return Err(CompareError::MismatchedDurations {
            full: full.duration_s,
            split: split.duration_s,
        });
    }
    let full_levels = level_keys(&full.cells);
    let split_levels = level_keys(&split.cells);
    if full_levels != split_levels {
        return Err(CompareError::MismatchedLevels {
            full: full_levels,
            split: split_levels,
        });
    }

    let mut rows = Vec::new();
    let mut command_rows = Vec::new();
    for key in full_levels {
        let full_cell = full
            .cells
            .iter()
            .find(|c| (c.r * 1000.0).round() as u64 == key)
            .expect("level present");
        let split_cell = split
            .cells
            .iter()
            .find(|c| (c.r * 1000.0).round() as u64 == key)
            .expect("level present");
        for interface in [Application::S6a, Application::Cx] {
            let (Some(full_stats), Some(split_stats)) = (
                full_cell.interfaces.get(&interface),
                split_cell.interfaces.get(&interface),
            ) else {
                continue;
            };
            let report = dominance_report(
                &split_cell.ecdfs[&interface],
                &full_cell.ecdfs[&interface],
            );
            rows.push(ComparisonRow {
                r: full_cell.r,
                interface,
                full: *full_stats,
                split: *split_stats,
                median_ratio: split_stats.median / full_stats.median,
                split_dominance: report.verdict,
            });
        }
        for command in Command::ALL {
            if let (Some(full_candle), Some(split_candle)) = (
                full_cell.command_candles.get(&command),
                split_cell.command_candles.get(&command),
            ) {
                command_rows.push(CommandComparisonRow {
                    r: full_cell.r,
                    command,
                    full: *full_candle,
                    split: *split_candle,
                });
            }
        }
    }
    Ok(IsolationReport { rows, command_rows })
}

impl IsolationReport {
    /// Plain-text rendering, one block per utilization level.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<6} {:<9} {:>10} {:>10} {:>8} {:>12}",
            "R", "interface", "full med", "split med", "ratio", "dominance"
        );
        for row in &self.rows {
            let verdict = match row.split_dominance {
                Dominance::ADominates => "split",
                Dominance::BDominates => "full",
                Dominance::Crossing => "crossing",
            };
            let _ = writeln!(
                out,
                "{:<6.2} {:<9} {:>10.3} {:>10.3} {:>8.3} {:>12}",
                row.r,
                row.interface.to_string(),
                row.full.median,
                row.split.median,
                row.median_ratio,
                verdict
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<6} {:<7} {:>12} {:>12} {:>12} {:>12}",
            "R", "command", "full mean", "split mean", "full q3", "split q3"
        );
        for row in &self.command_rows {
            let _ = writeln!(
                out,
                "{:<6.2} {:<7} {:>12.3} {:>12.3} {:>12.3} {:>12.3}",
                row.r,
                row.command.to_string(),
                row.full.mean,
                row.split.mean,
                row.full.q3,
                row.split.q3
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(
        interface: Application,
        command: Command,
        response: f64,
        setup: Setup,
    ) -> ResponseSample {
        ResponseSample {
            message_id: 0,
            interface,
            command,
            response_time_ms: response,
            run_id: "test".to_string(),
            setup,
            target_utilization: 0.9,
        }
    }

    fn cell(setup: Setup, shift: f64) -> CellStats {
        let mut samples = Vec::new();
        for i in 0..40 {
            samples.push(sample(
                Application::Cx,
                Command::Lir,
                3.0 + shift + (i % 5) as f64,
                setup,
            ));
            samples.push(sample(
                Application::S6a,
                Command::Air,
                5.0 + shift + (i % 7) as f64,
                setup,
            ));
        }
        analyze_cell(setup, 0.9, &samples, 0.05)
    }

    #[test]
    fn analysis_summarizes_interfaces_and_commands() {
        let stats = cell(Setup::Split, 0.0);
        assert!(stats.interfaces.contains_key(&Application::Cx));
        assert!(stats.command_candles.contains_key(&Command::Lir));
        let cx = stats.interfaces[&Application::Cx];
        assert_eq!(cx.n, 40);
        assert!(cx.median >= 3.0 && cx.median <= 8.0);
    }

    #[test]
    fn shifted_full_side_is_dominated_by_split() {
        let report = compare(
            &Side { duration_s: 60, cells: vec![cell(Setup::Full, 50.0)] },
            &Side { duration_s: 60, cells: vec![cell(Setup::Split, 0.0)] },
        )
        .unwrap();
        for row in &report.rows {
            assert_eq!(row.split_dominance, Dominance::ADominates);
            assert!(row.median_ratio < 1.0);
        }
        assert!(!report.render().is_empty());
    }

    #[test]
    fn mismatched_durations_are_rejected() {
        let err = compare(
            &Side { duration_s: 60, cells: vec![cell(Setup::Full, 0.0)] },
            &Side { duration_s: 420, cells: vec![cell(Setup::Split, 0.0)] },
        )
        .unwrap_err();
        assert_eq!(
            err,
            CompareError::MismatchedDurations { full: 60, split: 420 }
        );
    }

    #[test]
    fn mismatched_levels_are_rejected() {
        let mut other = cell(Setup::Split, 0.0);
        other.r = 0.25;
        let err = compare(
            &Side { duration_s: 60, cells: vec![cell(Setup::Full, 0.0)] },
            &Side { duration_s: 60, cells: vec![other] },
        )
        .unwrap_err();
        assert!(matches!(err, CompareError::MismatchedLevels { .. }));
    }
}
