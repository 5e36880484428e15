//! Statistical post-processing of response-time samples: iterative Grubbs
//! outlier elimination, empirical CDFs, candlestick summaries, and a
//! first-order stochastic-dominance check between two distributions.

mod students_t;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use students_t::{ln_gamma, regularized_incomplete_beta, t_upper_quantile, t_upper_tail};

use crate::diameter::{Application, Command};

/// Which deployment variant a sample was measured under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Setup {
    Full,
    Split,
}

impl Setup {
    pub fn as_str(&self) -> &'static str {
        match self {
            Setup::Full => "full",
            Setup::Split => "split",
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Setup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Setup::Full),
            "split" => Ok(Setup::Split),
            other => Err(format!("unknown setup '{other}' (expected full or split)")),
        }
    }
}

/// One measured request with its run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSample {
    pub message_id: u64,
    pub interface: Application,
    pub command: Command,
    pub response_time_ms: f64,
    pub run_id: String,
    pub setup: Setup,
    pub target_utilization: f64,
}

/// Five-number candlestick: min, first quartile, mean, third quartile, max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandlestickSummary {
    pub min: f64,
    pub q1: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
    pub n: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("input sample set is empty")]
    Empty,
    #[error("significance level must lie in (0, 0.2], got {0}")]
    InvalidAlpha(f64),
}

/// Result of the iterative Grubbs filter. `removed` holds indices into the
/// original input, in removal order.
#[derive(Debug, Clone, PartialEq)]
pub struct GrubbsOutcome {
    pub retained: Vec<f64>,
    pub removed: Vec<usize>,
    /// Set when the input had fewer than 3 points and was returned unchanged.
    pub small_sample: bool,
}

/// Critical value for the two-sided Grubbs test at significance `alpha`:
/// `((n-1)/sqrt(n)) * sqrt(t^2 / (n-2+t^2))` with `t` the upper-tail
/// t-quantile at `alpha/(2n)` on `n-2` degrees of freedom.
pub fn grubbs_critical_value(n: usize, alpha: f64) -> f64 {
    assert!(n >= 3, "the Grubbs statistic needs at least 3 points");
    let n_f = n as f64;
    let t = t_upper_quantile(alpha / (2.0 * n_f), n_f - 2.0);
    ((n_f - 1.0) / n_f.sqrt()) * (t * t / (n_f - 2.0 + t * t)).sqrt()
}

fn mean_and_sample_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, variance.sqrt())
}

/// Iterative two-sided Grubbs outlier elimination: while the most deviant
/// point exceeds the critical value, remove that single point and repeat.
/// Inputs with fewer than 3 points come back unchanged with a warning flag;
/// a zero-spread iteration stops the filter (the statistic is undefined).
/// When several points tie for the maximum deviation, the earliest index
/// goes first.
pub fn grubbs_filter(samples: &[f64], alpha: f64) -> Result<GrubbsOutcome, AnalysisError> {
    if !(alpha > 0.0 && alpha <= 0.2) {
        return Err(AnalysisError::InvalidAlpha(alpha));
    }
    if samples.len() < 3 {
        return Ok(GrubbsOutcome {
            retained: samples.to_vec(),
            removed: Vec::new(),
            small_sample: true,
        });
    }
    let mut live: Vec<(usize, f64)> = samples.iter().copied().enumerate().collect();
    let mut removed = Vec::new();
    while live.len() >= 3 {
        let values: Vec<f64> = live.iter().map(|(_, v)| *v).collect();
        let (mean, stddev) = mean_and_sample_stddev(&values);
        if !(stddev > 0.0) || !stddev.is_finite() {
            break;
        }
        let (position, statistic) = live
            .iter()
            .enumerate()
            .map(|(position, (_, value))| (position, (value - mean).abs() / stddev))
            .fold((0, f64::MIN), |best, candidate| {
                if candidate.1 > best.1 {
                    candidate
                } else {
                    best
                }
            });
        if statistic <= grubbs_critical_value(live.len(), alpha) {
            break;
        }
        removed.push(live.remove(position).0);
    }
    Ok(GrubbsOutcome {
        retained: live.into_iter().map(|(_, v)| v).collect(),
        removed,
        small_sample: false,
    })
}

/// Empirical CDF as a right-continuous step function.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
    points: Vec<(f64, f64)>,
}

impl Ecdf {
    pub fn new(samples: &[f64]) -> Result<Ecdf, AnalysisError> {
        if samples.is_empty() {
            return Err(AnalysisError::Empty);
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples must not be NaN"));
        let n = sorted.len() as f64;
        let mut points: Vec<(f64, f64)> = Vec::new();
        for (rank, &value) in sorted.iter().enumerate() {
            let fraction = (rank + 1) as f64 / n;
            match points.last_mut() {
                Some(last) if last.0 == value => last.1 = fraction,
                _ => points.push((value, fraction)),
            }
        }
        Ok(Ecdf { sorted, points })
    }

    /// Distinct sample values with their cumulative fractions; the last
    /// fraction is exactly 1.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of samples <= x.
    pub fn fraction_at(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v <= x);
        count as f64 / self.sorted.len() as f64
    }

    /// Quantile by inclusive linear interpolation on the order statistics.
    pub fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&self.sorted, p)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 == n {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Candlestick summary with inclusive linear-interpolation quartiles and the
/// arithmetic mean.
pub fn candlestick(samples: &[f64]) -> Result<CandlestickSummary, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples must not be NaN"));
    Ok(CandlestickSummary {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        n: sorted.len(),
    })
}

/// Outcome of a first-order stochastic-dominance comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    /// A's CDF lies at or above B's everywhere and strictly above somewhere
    /// (A concentrates on smaller values).
    ADominates,
    BDominates,
    /// The CDFs cross, or coincide everywhere.
    Crossing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub verdict: Dominance,
    /// median(b) / median(a).
    pub median_ratio: f64,
}

/// First-order stochastic-dominance check over the merged support of the two
/// distributions, plus the ratio of medians.
pub fn dominance_report(a: &Ecdf, b: &Ecdf) -> DominanceReport {
    let mut support: Vec<f64> = a
        .points()
        .iter()
        .chain(b.points().iter())
        .map(|&(value, _)| value)
        .collect();
    support.sort_by(|x, y| x.partial_cmp(y).expect("support must not be NaN"));
    support.dedup();

    let mut a_strictly_above = false;
    let mut b_strictly_above = false;
    for &x in &support {
        let fa = a.fraction_at(x);
        let fb = b.fraction_at(x);
        if fa > fb {
            a_strictly_above = true;
        }
        if fb > fa {
            b_strictly_above = true;
        }
    }
    let verdict = match (a_strictly_above, b_strictly_above) {
        (true, false) => Dominance::ADominates,
        (false, true) => Dominance::BDominates,
        _ => Dominance::Crossing,
    };
    DominanceReport {
        verdict,
        median_ratio: b.median() / a.median(),
    }
}
