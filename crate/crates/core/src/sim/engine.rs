//! Single-threaded discrete-event engine.
//!
//! Events are dispatched in `(fire_at, sequence)` order, where the sequence
//! number is an insertion counter: two events scheduled for the same instant
//! fire in the order they were scheduled. The engine never observes wall
//! clock time; a full run is a pure function of its inputs.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use super::time::{SimSpan, SimTime};

/// Callback invoked when an event fires.
pub type Action = Box<dyn FnOnce(&mut Engine)>;

/// Identifies a scheduled event so it can be cancelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("cannot schedule event at {requested} ms: clock is already at {now} ms")]
    InPast { requested: SimTime, now: SimTime },
}

struct QueuedEvent {
    fire_at: SimTime,
    sequence: u64,
    kind: &'static str,
    detail: String,
    action: Action,
}

// BinaryHeap is a max-heap; invert the comparison to pop the earliest
// (fire_at, sequence) first.
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire_at, other.sequence).cmp(&(self.fire_at, self.sequence))
    }
}

impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.sequence == other.sequence
    }
}

impl Eq for QueuedEvent {}

/// One line of the event trace: `time<TAB>sequence<TAB>kind<TAB>detail`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub time: SimTime,
    pub sequence: u64,
    pub kind: String,
    pub detail: String,
}

pub struct Engine {
    now: SimTime,
    next_sequence: u64,
    queue: BinaryHeap<QueuedEvent>,
    cancelled: HashSet<u64>,
    trace: Option<Vec<TraceEntry>>,
}

impl Default for Engine {
    fn default() -> Self {
        Self::new()
    }
}

impl Engine {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            next_sequence: 0,
            queue: BinaryHeap::new(),
            cancelled: HashSet::new(),
            trace: None,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Start recording a trace entry for every dispatched event and every
    /// explicit [`Engine::mark`].
    pub fn enable_trace(&mut self) {
        if self.trace.is_none() {
            self.trace = Some(Vec::new());
        }
    }

    pub fn trace(&self) -> &[TraceEntry] {
        self.trace.as_deref().unwrap_or(&[])
    }

    /// Trace rendered as tab-separated lines, one per entry.
    pub fn trace_dump(&self) -> String {
        let mut out = String::new();
        for entry in self.trace() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                entry.time, entry.sequence, entry.kind, entry.detail
            );
        }
        out
    }

    /// Append an annotation to the trace at the current instant. Marks share
    /// the sequence counter with events so the trace stays totally ordered.
    pub fn mark(&mut self, kind: &str, detail: impl Into<String>) {
        if self.trace.is_some() {
            let sequence = self.next_sequence;
            self.next_sequence += 1;
            let now = self.now;
            self.record(now, sequence, kind, detail.into());
        }
    }

    fn record(&mut self, time: SimTime, sequence: u64, kind: &str, detail: String) {
        if let Some(trace) = &mut self.trace {
            trace.push(TraceEntry {
                time,
                sequence,
                kind: kind.to_string(),
                detail,
            });
        }
    }

    /// Schedule `action` to fire at `at`. Scheduling in the past is an error
    /// naming both instants.
    pub fn schedule_at(
        &mut self,
        at: SimTime,
        kind: &'static str,
        detail: impl Into<String>,
        action: impl FnOnce(&mut Engine) + 'static,
    ) -> Result<EventHandle, ScheduleError> {
        if at < self.now {
            return Err(ScheduleError::InPast {
                requested: at,
                now: self.now,
            });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(QueuedEvent {
            fire_at: at,
            sequence,
            kind,
            detail: detail.into(),
            action: Box::new(action),
        });
        Ok(EventHandle(sequence))
    }

    /// Schedule `action` to fire `delay` after the current instant.
    pub fn schedule_in(
        &mut self,
        delay: SimSpan,
        kind: &'static str,
        detail: impl Into<String>,
        action: impl FnOnce(&mut Engine) + 'static,
    ) -> EventHandle {
        self.schedule_at(self.now + delay, kind, detail, action)
            .expect("now + delay cannot be in the past")
    }

    /// Cancel a previously scheduled event. Cancelled events never fire and
    /// are not counted as dispatched. Cancelling twice or cancelling an
    /// already-fired event is a no-op.
    pub fn cancel(&mut self, handle: EventHandle) {
        self.cancelled.insert(handle.0);
    }

    /// Dispatch every event with `fire_at <= t_end`, then advance the clock
    /// to `t_end`. Returns the number of dispatched events.
    pub fn run_until(&mut self, t_end: SimTime) -> usize {
        let mut dispatched = 0;
        while let Some(head) = self.queue.peek() {
            if head.fire_at > t_end {
                break;
            }
            let event = self.queue.pop().expect("peeked event");
            if self.cancelled.remove(&event.sequence) {
                continue;
            }
            debug_assert!(event.fire_at >= self.now, "event queue went backwards");
            self.now = event.fire_at;
            self.record(event.fire_at, event.sequence, event.kind, event.detail);
            (event.action)(self);
            dispatched += 1;
        }
        if t_end > self.now {
            self.now = t_end;
        }
        dispatched
    }

    /// Dispatch events until the queue is empty. Returns the dispatched count.
    pub fn run_to_completion(&mut self) -> usize {
        let mut dispatched = 0;
        while let Some(event) = self.queue.pop() {
            if self.cancelled.remove(&event.sequence) {
                continue;
            }
            self.now = event.fire_at;
            self.record(event.fire_at, event.sequence, event.kind, event.detail);
            (event.action)(self);
            dispatched += 1;
        }
        dispatched
    }
}
