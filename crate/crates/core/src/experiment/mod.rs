//! The experiment front door: configuration, scenario assembly, matrix
//! execution, statistics, and the result-bundle file formats.

mod config;
mod csvio;
mod report;
mod runner;
mod scenario;

pub use config::{ConfigError, ExperimentConfig};
pub use csvio::{
    candles_to_csv, cdf_to_csv, load_bundle, samples_from_csv, samples_to_csv, write_bundle,
    BundleError, RunMeta, RunsFile, CANDLES_HEADER, CDF_HEADER, SAMPLES_HEADER,
};
pub use report::{
    analyze_cell, compare, CellStats, CommandComparisonRow, CompareError, ComparisonRow,
    InterfaceStats, IsolationReport, Side,
};
pub use runner::{
    calibrate_rates, deployment_trace, run_matrix, run_single, RateTable, RunError, RunResult,
    RunSpec,
};
pub use scenario::{
    applications_for, build_scenario, full_placement, full_template, split_placement,
    split_template, Scenario, ScenarioParams,
};

use crate::analysis::{ResponseSample, Setup};

/// Group a run list's samples into per-(setup, R) cells and summarize each.
pub fn cells_from_runs(results: &[RunResult], alpha: f64) -> Vec<CellStats> {
    use std::collections::BTreeMap;
    let mut grouped: BTreeMap<(Setup, u64), Vec<&ResponseSample>> = BTreeMap::new();
    for result in results {
        for sample in &result.samples {
            grouped
                .entry((result.spec.setup, (result.spec.r * 1000.0).round() as u64))
                .or_default()
                .push(sample);
        }
    }
    grouped
        .into_iter()
        .map(|((setup, key), samples)| {
            let owned: Vec<ResponseSample> = samples.into_iter().cloned().collect();
            analyze_cell(setup, key as f64 / 1000.0, &owned, alpha)
        })
        .collect()
}

/// Group already-loaded samples (e.g. from a bundle) into cells.
pub fn cells_from_samples(samples: &[ResponseSample], alpha: f64) -> Vec<CellStats> {
    use std::collections::BTreeMap;
    let mut grouped: BTreeMap<(Setup, u64), Vec<ResponseSample>> = BTreeMap::new();
    for sample in samples {
        grouped
            .entry((
                sample.setup,
                (sample.target_utilization * 1000.0).round() as u64,
            ))
            .or_default()
            .push(sample.clone());
    }
    grouped
        .into_iter()
        .map(|((setup, key), samples)| analyze_cell(setup, key as f64 / 1000.0, &samples, alpha))
        .collect()
}

/// Render the per-cell summary text that ships with a bundle.
pub fn summarize_cells(cells: &[CellStats]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for cell in cells {
        let _ = writeln!(
            out,
            "[{} R={:.2}] samples={} outliers_removed={}",
            cell.setup, cell.r, cell.sample_count, cell.outliers_removed
        );
        for (interface, stats) in &cell.interfaces {
            let _ = writeln!(
                out,
                "  {interface}: n={} median={:.3} ms mean={:.3} ms p95={:.3} ms",
                stats.n, stats.median, stats.mean, stats.p95
            );
        }
    }
    out
}
