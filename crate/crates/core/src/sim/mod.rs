//! Deterministic discrete-event core: virtual clock, event queue, and
//! seeded randomness. Everything else in the crate runs on top of this.

mod engine;
mod rng;
mod time;

pub use engine::{Action, Engine, EventHandle, ScheduleError, TraceEntry};
pub use rng::{DrawError, RngStream};
pub use time::{SimSpan, SimTime};
