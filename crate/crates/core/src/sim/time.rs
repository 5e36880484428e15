//! Virtual time with microsecond resolution.
//!
//! All timers and durations in the simulator are fixed-point microsecond
//! counts. Using integers keeps event ordering exact and identical across
//! platforms; milliseconds are the human-facing unit throughout.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// An instant on the virtual clock, in microseconds since simulation start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SimTime(u64);

/// A non-negative span of virtual time, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SimSpan(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1_000_000.0
    }

    /// Span from an earlier instant to this one. Panics if `earlier` is later.
    pub fn since(self, earlier: SimTime) -> SimSpan {
        SimSpan(
            self.0
                .checked_sub(earlier.0)
                .expect("SimTime::since called with a later instant"),
        )
    }
}

impl SimSpan {
    pub const ZERO: SimSpan = SimSpan(0);

    pub fn from_micros(us: u64) -> Self {
        SimSpan(us)
    }

    pub fn from_millis(ms: u64) -> Self {
        SimSpan(ms * 1_000)
    }

    pub fn from_secs(s: u64) -> Self {
        SimSpan(s * 1_000_000)
    }

    /// Fractional milliseconds rounded to the microsecond grid.
    /// Negative or non-finite inputs clamp to zero.
    pub fn from_millis_f64(ms: f64) -> Self {
        if !ms.is_finite() || ms <= 0.0 {
            return SimSpan(0);
        }
        SimSpan((ms * 1_000.0).round() as u64)
    }

    pub fn from_secs_f64(s: f64) -> Self {
        Self::from_millis_f64(s * 1_000.0)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1_000_000.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl Add<SimSpan> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimSpan) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign<SimSpan> for SimTime {
    fn add_assign(&mut self, rhs: SimSpan) {
        self.0 += rhs.0;
    }
}

impl Add for SimSpan {
    type Output = SimSpan;
    fn add(self, rhs: SimSpan) -> SimSpan {
        SimSpan(self.0 + rhs.0)
    }
}

impl AddAssign for SimSpan {
    fn add_assign(&mut self, rhs: SimSpan) {
        self.0 += rhs.0;
    }
}

impl Sub for SimSpan {
    type Output = SimSpan;
    fn sub(self, rhs: SimSpan) -> SimSpan {
        SimSpan(self.0.saturating_sub(rhs.0))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Millisecond reading with microsecond precision, e.g. "12.345" ms.
        write!(f, "{}.{:03}", self.0 / 1_000, self.0 % 1_000)
    }
}

impl fmt::Display for SimSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1_000, self.0 % 1_000)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(SimTime::from_millis(7).as_micros(), 7_000);
        assert_eq!(SimTime::from_secs(2).as_millis_f64(), 2_000.0);
        assert_eq!(SimSpan::from_millis_f64(1.2344).as_micros(), 1_234);
        assert_eq!(SimSpan::from_millis_f64(1.2346).as_micros(), 1_235);
    }

    #[test]
    fn negative_and_nan_spans_clamp_to_zero() {
        assert_eq!(SimSpan::from_millis_f64(-3.0), SimSpan::ZERO);
        assert_eq!(SimSpan::from_millis_f64(f64::NAN), SimSpan::ZERO);
    }

    #[test]
    fn display_is_millis_with_micro_precision() {
        assert_eq!(SimTime::from_micros(12_345).to_string(), "12.345");
        assert_eq!(SimTime::ZERO.to_string(), "0.000");
    }

    #[test]
    fn since_computes_span() {
        let a = SimTime::from_millis(5);
        let b = SimTime::from_millis(9);
        assert_eq!(b.since(a), SimSpan::from_millis(4));
    }
}
