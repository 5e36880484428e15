//! Traffic generation and the message-conservation ledger.
//!
//! One generator per diameter interface produces Poisson arrivals (or fixed
//! intervals, for debugging) with commands drawn from a percentage mix, on a
//! stream keyed by the interface so the two interfaces stay independent.
//! The ledger counts every message at generation, completion, and drop;
//! auditing checks `generated = completed + dropped + in_flight` per
//! (interface, command) cell.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use thiserror::Error;

use crate::diameter::{Application, Command, DiameterMessage};
use crate::sim::{Engine, RngStream, SimSpan, SimTime};

/// Bundled per-interface message volumes for each utilization level, from
/// the reference seven-minute runs that sized the workloads.
pub const REFERENCE_RUN_SECS: u64 = 420;

const REFERENCE_VOLUMES: [(f64, u64, u64); 4] = [
    // (utilization, S6a messages, Cx messages)
    (0.25, 19_067, 21_234),
    (0.50, 40_749, 45_102),
    (0.70, 59_366, 64_098),
    (0.90, 76_783, 84_131),
];

/// Command percentages per interface in the reference workloads.
pub fn reference_mix(interface: Application) -> Vec<(Command, f64)> {
    match interface {
        Application::S6a => vec![
            (Command::Air, 40.0),
            (Command::Pur, 30.0),
            (Command::Ulr, 30.0),
        ],
        Application::Cx => vec![
            (Command::Lir, 43.0),
            (Command::Mar, 2.0),
            (Command::Sar, 8.0),
            (Command::Uar, 47.0),
        ],
    }
}

/// Message count of the reference run at the given utilization level.
pub fn reference_message_count(interface: Application, utilization: f64) -> Option<u64> {
    REFERENCE_VOLUMES
        .iter()
        .find(|(r, _, _)| (r - utilization).abs() < 1e-9)
        .map(|(_, s6a, cx)| match interface {
            Application::S6a => *s6a,
            Application::Cx => *cx,
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GenerationMode {
    /// A total volume over a nominal duration; the implied rate is
    /// `total / duration` and is preserved when generating over a shorter
    /// horizon.
    FixedCount { total: u64, duration: SimSpan },
    Rate { per_s: f64, duration: SimSpan },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalProcess {
    Poisson,
    /// Fixed inter-arrival gaps at the same rate, for debugging.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficProfile {
    pub interface: Application,
    pub mix: Vec<(Command, f64)>,
    pub mode: GenerationMode,
    pub arrival_process: ArrivalProcess,
    pub seed: u64,
    /// Label suffix separating this profile's random stream from every
    /// other stream with the same seed.
    pub stream_tag: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("command {command} does not belong to interface {interface}")]
    ForeignCommand {
        interface: Application,
        command: Command,
    },
    #[error("mix percentages must be non-negative and sum to 100, got {0}")]
    BadMix(f64),
    #[error("generation rate must be positive")]
    ZeroRate,
}

impl TrafficProfile {
    /// Reference-volume profile for an interface and utilization level:
    /// the reference rate (count over the seven-minute run) applied for
    /// `duration`.
    pub fn reference(
        interface: Application,
        utilization: f64,
        duration: SimSpan,
        seed: u64,
    ) -> Option<TrafficProfile> {
        let total = reference_message_count(interface, utilization)?;
        Some(TrafficProfile {
            interface,
            mix: reference_mix(interface),
            mode: GenerationMode::FixedCount {
                total,
                duration: SimSpan::from_secs(REFERENCE_RUN_SECS),
            },
            arrival_process: ArrivalProcess::Poisson,
            seed,
            stream_tag: format!("{interface}"),
        })
        .map(|profile| TrafficProfile {
            mode: GenerationMode::Rate {
                per_s: profile.rate_per_s(),
                duration,
            },
            ..profile
        })
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let mut sum = 0.0;
        for (command, share) in &self.mix {
            if command.application() != self.interface {
                return Err(ProfileError::ForeignCommand {
                    interface: self.interface,
                    command: *command,
                });
            }
            if *share < 0.0 {
                return Err(ProfileError::BadMix(*share));
            }
            sum += share;
        }
        if (sum - 100.0).abs() > 1e-6 {
            return Err(ProfileError::BadMix(sum));
        }
        if self.rate_per_s() <= 0.0 {
            return Err(ProfileError::ZeroRate);
        }
        Ok(())
    }

    pub fn rate_per_s(&self) -> f64 {
        match self.mode {
            GenerationMode::FixedCount { total, duration } => {
                total as f64 / duration.as_secs_f64()
            }
            GenerationMode::Rate { per_s, .. } => per_s,
        }
    }

    pub fn duration(&self) -> SimSpan {
        match self.mode {
            GenerationMode::FixedCount { duration, .. } => duration,
            GenerationMode::Rate { duration, .. } => duration,
        }
    }

    fn stream(&self) -> RngStream {
        RngStream::new(self.seed, format!("workload-{}", self.stream_tag))
    }
}

// --- conservation ledger ------------------------------------------------------

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LedgerCell {
    pub generated: u64,
    pub completed: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditViolation {
    pub interface: Application,
    pub command: Command,
    pub cell: LedgerCell,
    pub in_flight: u64,
}

impl std::fmt::Display for AuditViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({}, {}): generated {} != completed {} + dropped {} + in-flight {}",
            self.interface,
            self.command,
            self.cell.generated,
            self.cell.completed,
            self.cell.dropped,
            self.in_flight
        )
    }
}

/// Shared counters per (interface, command).
#[derive(Clone, Default)]
pub struct Ledger {
    inner: Rc<RefCell<BTreeMap<(Application, Command), LedgerCell>>>,
}

impl Ledger {
    pub fn new() -> Ledger {
        Ledger::default()
    }

    pub fn count_generated(&self, command: Command) {
        self.inner
            .borrow_mut()
            .entry((command.application(), command))
            .or_default()
            .generated += 1;
    }

    pub fn count_completed(&self, command: Command) {
        self.inner
            .borrow_mut()
            .entry((command.application(), command))
            .or_default()
            .completed += 1;
    }

    pub fn count_dropped(&self, command: Command) {
        self.inner
            .borrow_mut()
            .entry((command.application(), command))
            .or_default()
            .dropped += 1;
    }

    pub fn cells(&self) -> BTreeMap<(Application, Command), LedgerCell> {
        self.inner.borrow().clone()
    }

    pub fn total_generated(&self) -> u64 {
        self.inner.borrow().values().map(|c| c.generated).sum()
    }

    /// Check `generated = completed + dropped + in_flight` per cell, with
    /// in-flight counts taken independently from the live queues.
    pub fn audit(
        &self,
        in_flight: &BTreeMap<(Application, Command), u64>,
    ) -> Result<(), Vec<AuditViolation>> {
        let cells = self.inner.borrow();
        let mut violations = Vec::new();
        let mut keys: Vec<(Application, Command)> = cells.keys().copied().collect();
        for key in in_flight.keys() {
            if !cells.contains_key(key) {
                keys.push(*key);
            }
        }
        for key in keys {
            let cell = cells.get(&key).copied().unwrap_or_default();
            let live = in_flight.get(&key).copied().unwrap_or(0);
            if cell.generated != cell.completed + cell.dropped + live {
                violations.push(AuditViolation {
                    interface: key.0,
                    command: key.1,
                    cell,
                    in_flight: live,
                });
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }
}

// --- generator -----------------------------------------------------------------

pub type Deliver = Rc<dyn Fn(&mut Engine, DiameterMessage)>;

/// Schedule a generator for `profile` starting at `start`. Messages receive
/// ids from the shared counter and are handed to `deliver`; every generated
/// message is counted in the ledger.
pub fn spawn_generator(
    engine: &mut Engine,
    profile: &TrafficProfile,
    start: SimTime,
    message_ids: Rc<RefCell<u64>>,
    ledger: Ledger,
    deliver: Deliver,
) {
    profile.validate().expect("profile must be valid");
    struct Gen {
        stream: RngStream,
        mix: Vec<(Command, f64)>,
        weights: Vec<f64>,
        mean_gap_ms: f64,
        deterministic: bool,
        horizon: SimTime,
        message_ids: Rc<RefCell<u64>>,
        ledger: Ledger,
        deliver: Deliver,
    }

    fn schedule_next(generator: Rc<RefCell<Gen>>, engine: &mut Engine) {
        let (at, command) = {
            let mut state = generator.borrow_mut();
            let mean_gap_ms = state.mean_gap_ms;
            let gap_ms = if state.deterministic {
                mean_gap_ms
            } else {
                state
                    .stream
                    .exponential(mean_gap_ms)
                    .expect("positive mean gap")
            };
            let at = engine.now() + SimSpan::from_millis_f64(gap_ms);
            if at >= state.horizon {
                return;
            }
            let weights = std::mem::take(&mut state.weights);
            let pick = state.stream.weighted_index(&weights);
            state.weights = weights;
            (at, state.mix[pick].0)
        };
        engine
            .schedule_at(at, "arrival", command.as_str(), move |engine| {
                let (message, ledger, deliver) = {
                    let state = generator.borrow();
                    let mut ids = state.message_ids.borrow_mut();
                    *ids += 1;
                    (
                        DiameterMessage::new(*ids, command, engine.now()),
                        state.ledger.clone(),
                        state.deliver.clone(),
                    )
                };
                ledger.count_generated(command);
                deliver(engine, message);
                schedule_next(generator, engine);
            })
            .expect("arrival in the future");
    }

    let generator = Rc::new(RefCell::new(Gen {
        stream: profile.stream(),
        mix: profile.mix.clone(),
        weights: profile.mix.iter().map(|(_, w)| *w).collect(),
        mean_gap_ms: 1_000.0 / profile.rate_per_s(),
        deterministic: profile.arrival_process == ArrivalProcess::Deterministic,
        horizon: start + profile.duration(),
        message_ids,
        ledger,
        deliver,
    }));
    let kickoff = generator.clone();
    engine
        .schedule_at(start, "generator-start", profile.stream_tag.clone(), move |engine| {
            schedule_next(kickoff, engine);
        })
        .expect("start is not in the past");
}
