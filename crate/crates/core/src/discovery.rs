//! Central VNF registry with publish and blocking discover.
//!
//! A discover request either returns matching live records immediately, or
//! parks until the first matching publish, or fails at exactly its deadline.
//! "Blocking" is a parked continuation on the event loop, never a thread
//! block. The orchestrator installs an allow-list of rules; publishes and
//! discovers outside the rules are rejected up front.
//!
//! Tie rule at the deadline instant: event insertion order decides, per the
//! engine's dispatch order. A publish event scheduled before the discover's
//! timeout event wins at the same instant; one scheduled after loses.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::rc::Rc;

use thiserror::Error;

use crate::diameter::ConnectionPoint;
use crate::sim::{Engine, EventHandle, SimSpan, SimTime};

/// Published information about one VNF instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VnfRecordEntry {
    pub vnf_type: String,
    pub instance_id: String,
    pub zone: String,
    pub connection_points: Vec<ConnectionPoint>,
    pub metadata: BTreeMap<String, String>,
    pub published_at: SimTime,
}

/// One allow-list entry: who may publish a type, and who may discover it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscoveryRule {
    pub publisher_zone: String,
    pub vnf_type: String,
    pub consumer_zones: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiscoveryError {
    #[error("no rule authorizes zone '{zone}' to publish vnf type '{vnf_type}'")]
    PublishNotAllowed { zone: String, vnf_type: String },
    #[error("record ({vnf_type}, {instance_id}) is already published")]
    DuplicateRecord {
        vnf_type: String,
        instance_id: String,
    },
    #[error("record ({vnf_type}, {instance_id}) is not published")]
    UnknownRecord {
        vnf_type: String,
        instance_id: String,
    },
    #[error("record ({vnf_type}, {instance_id}) carries no connection points")]
    NoConnectionPoints {
        vnf_type: String,
        instance_id: String,
    },
    #[error("no rule authorizes zone '{zone}' to discover vnf type '{vnf_type}'")]
    DiscoverNotAllowed { zone: String, vnf_type: String },
    #[error("discovery of '{vnf_type}' for zone '{zone}' timed out at {deadline} ms")]
    Timeout {
        vnf_type: String,
        zone: String,
        deadline: SimTime,
    },
    #[error("discover timeout must be positive")]
    ZeroTimeout,
    #[error(
        "conflicting discovery rules for vnf type '{vnf_type}': \
         publishers '{existing}' and '{added}' with overlapping consumers"
    )]
    RuleConflict {
        vnf_type: String,
        existing: String,
        added: String,
    },
    #[error("discovery rule for '{vnf_type}' has no consumer zones")]
    EmptyConsumers { vnf_type: String },
}

pub type DiscoverResult = Result<Vec<VnfRecordEntry>, DiscoveryError>;
pub type DiscoverCallback = Box<dyn FnOnce(&mut Engine, DiscoverResult)>;

struct PendingDiscover {
    vnf_type: String,
    requester_zone: String,
    timeout_handle: EventHandle,
    deadline: SimTime,
    callback: DiscoverCallback,
}

#[derive(Default)]
struct State {
    rules: Vec<DiscoveryRule>,
    records: BTreeMap<(String, String), VnfRecordEntry>,
    pending: BTreeMap<u64, PendingDiscover>,
    next_request: u64,
}

impl State {
    fn may_publish(&self, zone: &str, vnf_type: &str) -> bool {
        self.rules
            .iter()
            .any(|rule| rule.publisher_zone == zone && rule.vnf_type == vnf_type)
    }

    fn may_discover(&self, zone: &str, vnf_type: &str) -> bool {
        self.rules.iter().any(|rule| {
            rule.vnf_type == vnf_type && rule.consumer_zones.iter().any(|c| c == zone)
        })
    }

    /// Live records visible to `requester_zone` for `vnf_type`: the publisher
    /// zone of the record must be rule-connected to the requester.
    fn visible_records(&self, vnf_type: &str, requester_zone: &str) -> Vec<VnfRecordEntry> {
        self.records
            .values()
            .filter(|record| {
                record.vnf_type == vnf_type
                    && self.rules.iter().any(|rule| {
                        rule.vnf_type == vnf_type
                            && rule.publisher_zone == record.zone
                            && rule.consumer_zones.iter().any(|c| c == requester_zone)
                    })
            })
            .cloned()
            .collect()
    }
}

/// Cheap, clonable handle to the single logical registry.
#[derive(Clone, Default)]
pub struct Discovery {
    inner: Rc<RefCell<State>>,
}

impl Discovery {
    pub fn new() -> Self {
        Self::default()
    }

    /// Install allow-list rules, rejecting conflicts: two rules for the same
    /// type with overlapping consumers must name the same publisher.
    /// Duplicate rules merge silently.
    pub fn add_rules(&self, rules: &[DiscoveryRule]) -> Result<(), DiscoveryError> {
        let mut state = self.inner.borrow_mut();
        for rule in rules {
            if rule.consumer_zones.is_empty() {
                return Err(DiscoveryError::EmptyConsumers {
                    vnf_type: rule.vnf_type.clone(),
                });
            }
            if let Some(existing) = state.rules.iter_mut().find(|existing| {
                existing.vnf_type == rule.vnf_type
                    && existing
                        .consumer_zones
                        .iter()
                        .any(|c| rule.consumer_zones.contains(c))
            }) {
                if existing.publisher_zone != rule.publisher_zone {
                    return Err(DiscoveryError::RuleConflict {
                        vnf_type: rule.vnf_type.clone(),
                        existing: existing.publisher_zone.clone(),
                        added: rule.publisher_zone.clone(),
                    });
                }
                for consumer in &rule.consumer_zones {
                    if !existing.consumer_zones.contains(consumer) {
                        existing.consumer_zones.push(consumer.clone());
                    }
                }
                continue;
            }
            state.rules.push(rule.clone());
        }
        Ok(())
    }

    pub fn rules(&self) -> Vec<DiscoveryRule> {
        self.inner.borrow().rules.clone()
    }

    /// Store a record and complete every parked discover it satisfies, at the
    /// current instant.
    pub fn publish(&self, engine: &mut Engine, mut record: VnfRecordEntry) -> Result<(), DiscoveryError> {
        let woken = {
            let mut state = self.inner.borrow_mut();
            if !state.may_publish(&record.zone, &record.vnf_type) {
                return Err(DiscoveryError::PublishNotAllowed {
                    zone: record.zone,
                    vnf_type: record.vnf_type,
                });
            }
            if record.connection_points.is_empty() {
                return Err(DiscoveryError::NoConnectionPoints {
                    vnf_type: record.vnf_type,
                    instance_id: record.instance_id,
                });
            }
            let key = (record.vnf_type.clone(), record.instance_id.clone());
            if state.records.contains_key(&key) {
                return Err(DiscoveryError::DuplicateRecord {
                    vnf_type: record.vnf_type,
                    instance_id: record.instance_id,
                });
            }
            record.published_at = engine.now();
            state.records.insert(key, record.clone());

            // Collect parked requests this publish satisfies, in request order.
            let request_ids: Vec<u64> = state
                .pending
                .iter()
                .filter(|(_, pending)| {
                    pending.vnf_type == record.vnf_type
                        && state.rules.iter().any(|rule| {
                            rule.vnf_type == record.vnf_type
                                && rule.publisher_zone == record.zone
                                && rule
                                    .consumer_zones
                                    .iter()
                                    .any(|c| *c == pending.requester_zone)
                        })
                })
                .map(|(&id, _)| id)
                .collect();
            let mut woken = Vec::with_capacity(request_ids.len());
            for id in request_ids {
                let pending = state.pending.remove(&id).expect("collected id");
                let records =
                    state.visible_records(&pending.vnf_type, &pending.requester_zone);
                woken.push((pending, records));
            }
            woken
        };
        for (pending, records) in woken {
            // The timeout must not fire once the wakeup is decided.
            engine.cancel(pending.timeout_handle);
            engine.mark(
                "discover-complete",
                format!("{}<-{}", pending.requester_zone, pending.vnf_type),
            );
            engine.schedule_in(SimSpan::ZERO, "discover-return", pending.vnf_type.clone(), {
                let callback = pending.callback;
                move |engine| callback(engine, Ok(records))
            });
        }
        Ok(())
    }

    /// Discover live records of `vnf_type` for `requester_zone`.
    ///
    /// The callback runs synchronously when the request can be answered or
    /// rejected immediately; otherwise the request parks and the callback
    /// runs at the first matching publish or at the deadline.
    pub fn discover(
        &self,
        engine: &mut Engine,
        vnf_type: &str,
        requester_zone: &str,
        timeout: SimSpan,
        callback: DiscoverCallback,
    ) {
        if timeout.is_zero() {
            callback(engine, Err(DiscoveryError::ZeroTimeout));
            return;
        }
        let immediate = {
            let state = self.inner.borrow();
            if !state.may_discover(requester_zone, vnf_type) {
                Some(Err(DiscoveryError::DiscoverNotAllowed {
                    zone: requester_zone.to_string(),
                    vnf_type: vnf_type.to_string(),
                }))
            } else {
                let records = state.visible_records(vnf_type, requester_zone);
                if records.is_empty() {
                    None
                } else {
                    Some(Ok(records))
                }
            }
        };
        if let Some(result) = immediate {
            callback(engine, result);
            return;
        }

        // Park until publish or deadline.
        let deadline = engine.now() + timeout;
        let request_id = {
            let mut state = self.inner.borrow_mut();
            let id = state.next_request;
            state.next_request += 1;
            id
        };
        engine.mark(
            "discover-parked",
            format!("{requester_zone}<-{vnf_type}"),
        );
        let timeout_handle = {
            let this = self.clone();
            engine
                .schedule_at(
                    deadline,
                    "discover-timeout",
                    format!("{requester_zone}<-{vnf_type}"),
                    move |engine| this.fire_timeout(engine, request_id),
                )
                .expect("deadline is in the future")
        };
        self.inner.borrow_mut().pending.insert(
            request_id,
            PendingDiscover {
                vnf_type: vnf_type.to_string(),
                requester_zone: requester_zone.to_string(),
                timeout_handle,
                deadline,
                callback,
            },
        );
    }

    fn fire_timeout(&self, engine: &mut Engine, request_id: u64) {
        let pending = self.inner.borrow_mut().pending.remove(&request_id);
        if let Some(pending) = pending {
            (pending.callback)(
                engine,
                Err(DiscoveryError::Timeout {
                    vnf_type: pending.vnf_type,
                    zone: pending.requester_zone,
                    deadline: pending.deadline,
                }),
            );
        }
    }

    /// Remove a record; later discovers no longer see it.
    pub fn unpublish(&self, vnf_type: &str, instance_id: &str) -> Result<(), DiscoveryError> {
        let mut state = self.inner.borrow_mut();
        state
            .records
            .remove(&(vnf_type.to_string(), instance_id.to_string()))
            .map(|_| ())
            .ok_or_else(|| DiscoveryError::UnknownRecord {
                vnf_type: vnf_type.to_string(),
                instance_id: instance_id.to_string(),
            })
    }

    /// Snapshot of live records, optionally filtered by type.
    pub fn list(&self, filter: Option<&str>) -> Vec<VnfRecordEntry> {
        self.inner
            .borrow()
            .records
            .values()
            .filter(|record| filter.is_none_or(|t| record.vnf_type == t))
            .cloned()
            .collect()
    }

    pub fn pending_count(&self) -> usize {
        self.inner.borrow().pending.len()
    }

    /// Registry dump: `vnf_type<TAB>instance_id<TAB>zone<TAB>endpoint<TAB>port`.
    pub fn snapshot_dump(&self) -> String {
        let mut out = String::new();
        for record in self.list(None) {
            let endpoint = record
                .connection_points
                .first()
                .expect("published records carry at least one connection point");
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                record.vnf_type, record.instance_id, record.zone, endpoint.address, endpoint.port
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hss_rule() -> DiscoveryRule {
        DiscoveryRule {
            publisher_zone: "zone-1".to_string(),
            vnf_type: "UDR".to_string(),
            consumer_zones: vec!["zone-2".to_string()],
        }
    }

    fn udr_record(instance_id: &str) -> VnfRecordEntry {
        VnfRecordEntry {
            vnf_type: "UDR".to_string(),
            instance_id: instance_id.to_string(),
            zone: "zone-1".to_string(),
            connection_points: vec![ConnectionPoint::diameter(format!("{instance_id}.zone-1.sim"))],
            metadata: BTreeMap::new(),
            published_at: SimTime::ZERO,
        }
    }

    type Slot = Rc<RefCell<Option<(SimTime, DiscoverResult)>>>;

    fn capture() -> (Slot, DiscoverCallback) {
        let slot: Slot = Rc::new(RefCell::new(None));
        let inner = slot.clone();
        let callback: DiscoverCallback = Box::new(move |engine, result| {
            *inner.borrow_mut() = Some((engine.now(), result));
        });
        (slot, callback)
    }

    #[test]
    fn parked_discover_completes_at_publish_time() {
        let mut engine = Engine::new();
        let discovery = Discovery::new();
        discovery.add_rules(&[hss_rule()]).unwrap();

        let (slot, callback) = capture();
        discovery.discover(&mut engine, "UDR", "zone-2", SimSpan::from_millis(10), callback);
        assert_eq!(discovery.pending_count(), 1);

        let publisher = discovery.clone();
        engine
            .schedule_at(SimTime::from_millis(5), "publish", "UDR", move |engine| {
                publisher.publish(engine, udr_record("udr-1")).unwrap();
            })
            .unwrap();
        engine.run_until(SimTime::from_millis(20));

        let (at, result) = slot.borrow_mut().take().expect("callback ran");
        assert_eq!(at, SimTime::from_millis(5));
        let records = result.unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].instance_id, "udr-1");
        assert_eq!(records[0].published_at, SimTime::from_millis(5));
        assert_eq!(discovery.pending_count(), 0);
    }

    #[test]
    fn publish_without_rule_is_rejected() {
        let mut engine = Engine::new();
        let discovery = Discovery::new();
        discovery.add_rules(&[hss_rule()]).unwrap();
        let mut record = udr_record("udr-1");
        record.zone = "zone-3".to_string();
        assert_eq!(
            discovery.publish(&mut engine, record),
            Err(DiscoveryError::PublishNotAllowed {
                zone: "zone-3".to_string(),
                vnf_type: "UDR".to_string(),
            })
        );
    }

    #[test]
    fn duplicate_instance_id_is_rejected() {
        let mut engine = Engine::new();
        let discovery = Discovery::new();
        discovery.add_rules(&[hss_rule()]).unwrap();
        discovery.publish(&mut engine, udr_record("udr-1")).unwrap();
        assert_eq!(
            discovery.publish(&mut engine, udr_record("udr-1")),
            Err(DiscoveryError::DuplicateRecord {
                vnf_type: "UDR".to_string(),
                instance_id: "udr-1".to_string(),
            })
        );
    }

    #[test]
    fn discover_with_nothing_published_times_out_at_the_deadline() {
        let mut engine = Engine::new();
        let discovery = Discovery::new();
        discovery.add_rules(&[hss_rule()]).unwrap();
        let (slot, callback) = capture();
        discovery.discover(&mut engine, "UDR", "zone-2", SimSpan::from_millis(10), callback);
        engine.run_until(SimTime::from_millis(50));
        let (at, result) = slot.borrow_mut().take().unwrap();
        assert_eq!(at, SimTime::from_millis(10));
        assert!(matches!(result, Err(DiscoveryError::Timeout { deadline, .. })
            if deadline == SimTime::from_millis(10)));
    }

    #[test]
    fn existing_record_returns_immediately_at_request_time() {
        let mut engine = Engine::new();
        let discovery = Discovery::new();
        discovery.add_rules(&[hss_rule()]).unwrap();
        discovery.publish(&mut engine, udr_record("udr-1")).unwrap();
        engine.run_until(SimTime::from_millis(3));

        let (slot, callback) = capture();
        discovery.discover(&mut engine, "UDR", "zone-2", SimSpan::from_millis(10), callback);
        let (at, result) = slot.borrow_mut().take().expect("synchronous return");
        assert_eq!(at, SimTime::from_millis(3));
        assert_eq!(result.unwrap().len(), 1);
    }

    #[test]
    fn unauthorized_discover_is_rejected_immediately() {
        let mut engine = Engine::new();
        let discovery = Discovery::new();
        discovery.add_rules(&[hss_rule()]).unwrap();
        let (slot, callback) = capture();
        discovery.discover(&mut engine, "UDR", "zone-3", SimSpan::from_millis(10), callback);
        let (_, result) = slot.borrow_mut().take().expect("synchronous rejection");
        assert_eq!(
            result,
            Err(DiscoveryError::DiscoverNotAllowed {
                zone: "zone-3".to_string(),
                vnf_type: "UDR".to_string(),
            })
        );
        assert_eq!(discovery.pending_count(), 0);
    }

    #[test]
    fn unpublished_record_is_no_longer_discoverable() {
        let mut engine = Engine::new();
        let discovery = Discovery::new();
        discovery.add_rules(&[hss_rule()]).unwrap();
        discovery.publish(&mut engine, udr_record("udr-1")).unwrap();
        discovery.unpublish("UDR", "udr-1").unwrap();

        let (slot, callback) = capture();
        discovery.discover(&mut engine, "UDR", "zone-2", SimSpan::from_millis(1), callback);
        engine.run_until(SimTime::from_millis(2));
        let (_, result) = slot.borrow_mut().take().unwrap();
        assert!(matches!(result, Err(DiscoveryError::Timeout { .. })));
    }

    #[test]
    fn unpublish_unknown_record_is_an_error() {
        let discovery = Discovery::new();
        assert!(matches!(
            discovery.unpublish("UDR", "ghost"),
            Err(DiscoveryError::UnknownRecord { .. })
        ));
    }

    #[test]
    fn unpublishing_one_of_two_instances_leaves_the_survivor() {
        let mut engine = Engine::new();
        let discovery = Discovery::new();
        discovery.add_rules(&[hss_rule()]).unwrap();
        discovery.publish(&mut engine, udr_record("udr-1")).unwrap();
        discovery.publish(&mut engine, udr_record("udr-2")).unwrap();
        discovery.unpublish("UDR", "udr-1").unwrap();

        let (slot, callback) = capture();
        discovery.discover(&mut engine, "UDR", "zone-2", SimSpan::from_millis(5), callback);
        let (_, result) = slot.borrow_mut().take().unwrap();
        let records = result.unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].instance_id, "udr-2");
    }

    #[test]
    fn list_snapshots_live_records() {
        let mut engine = Engine::new();
        let discovery = Discovery::new();
        assert!(discovery.list(None).is_empty());
        discovery.add_rules(&[hss_rule()]).unwrap();
        discovery.publish(&mut engine, udr_record("udr-1")).unwrap();
        assert_eq!(discovery.list(Some("UDR")).len(), 1);
        assert!(discovery.list(Some("HSS-FE")).is_empty());
        assert_eq!(
            discovery.snapshot_dump(),
            "UDR\tudr-1\tzone-1\tudr-1.zone-1.sim\t3868\n"
        );
    }

    #[test]
    fn conflicting_rules_are_rejected() {
        let discovery = Discovery::new();
        discovery.add_rules(&[hss_rule()]).unwrap();
        let conflicting = DiscoveryRule {
            publisher_zone: "zone-3".to_string(),
            vnf_type: "UDR".to_string(),
            consumer_zones: vec!["zone-2".to_string()],
        };
        assert!(matches!(
            discovery.add_rules(&[conflicting]),
            Err(DiscoveryError::RuleConflict { .. })
        ));
        // Disjoint consumers for the same type are fine.
        let disjoint = DiscoveryRule {
            publisher_zone: "zone-3".to_string(),
            vnf_type: "UDR".to_string(),
            consumer_zones: vec!["zone-4".to_string()],
        };
        discovery.add_rules(&[disjoint]).unwrap();
        assert_eq!(discovery.rules().len(), 2);
    }

    #[test]
    fn zero_timeout_is_rejected() {
        let mut engine = Engine::new();
        let discovery = Discovery::new();
        discovery.add_rules(&[hss_rule()]).unwrap();
        let (slot, callback) = capture();
        discovery.discover(&mut engine, "UDR", "zone-2", SimSpan::ZERO, callback);
        let (_, result) = slot.borrow_mut().take().unwrap();
        assert_eq!(result, Err(DiscoveryError::ZeroTimeout));
    }

    // The two orders at an exact deadline tie, both pinned.
    #[test]
    fn publish_scheduled_before_the_discover_wins_the_deadline_tie() {
        let mut engine = Engine::new();
        let discovery = Discovery::new();
        discovery.add_rules(&[hss_rule()]).unwrap();

        // Publish event enters the queue first...
        let publisher = discovery.clone();
        engine
            .schedule_at(SimTime::from_millis(10), "publish", "UDR", move |engine| {
                publisher.publish(engine, udr_record("udr-1")).unwrap();
            })
            .unwrap();
        // ...then the discover parks with its timeout at the same instant.
        let (slot, callback) = capture();
        discovery.discover(&mut engine, "UDR", "zone-2", SimSpan::from_millis(10), callback);

        engine.run_until(SimTime::from_millis(20));
        let (at, result) = slot.borrow_mut().take().unwrap();
        assert_eq!(at, SimTime::from_millis(10));
        assert!(result.is_ok(), "publish inserted first resolves the discover");
    }

    #[test]
    fn timeout_scheduled_before_the_publish_wins_the_deadline_tie() {
        let mut engine = Engine::new();
        let discovery = Discovery::new();
        discovery.add_rules(&[hss_rule()]).unwrap();

        // Discover parks first: its timeout event has the lower sequence.
        let (slot, callback) = capture();
        discovery.discover(&mut engine, "UDR", "zone-2", SimSpan::from_millis(10), callback);
        let publisher = discovery.clone();
        engine
            .schedule_at(SimTime::from_millis(10), "publish", "UDR", move |engine| {
                publisher.publish(engine, udr_record("udr-1")).unwrap();
            })
            .unwrap();

        engine.run_until(SimTime::from_millis(20));
        let (at, result) = slot.borrow_mut().take().unwrap();
        assert_eq!(at, SimTime::from_millis(10));
        assert!(matches!(result, Err(DiscoveryError::Timeout { .. })));
        // The record itself still landed in the registry.
        assert_eq!(discovery.list(Some("UDR")).len(), 1);
    }

    #[test]
    fn multiple_parked_discovers_wake_in_request_order() {
        let mut engine = Engine::new();
        let discovery = Discovery::new();
        discovery
            .add_rules(&[DiscoveryRule {
                publisher_zone: "zone-1".to_string(),
                vnf_type: "UDR".to_string(),
                consumer_zones: vec!["zone-2".to_string(), "zone-3".to_string()],
            }])
            .unwrap();

        let order: Rc<RefCell<Vec<String>>> = Rc::new(RefCell::new(Vec::new()));
        for zone in ["zone-2", "zone-3"] {
            let order = order.clone();
            let zone_name = zone.to_string();
            discovery.discover(
                &mut engine,
                "UDR",
                zone,
                SimSpan::from_millis(10),
                Box::new(move |_, result| {
                    assert!(result.is_ok());
                    order.borrow_mut().push(zone_name);
                }),
            );
        }
        let publisher = discovery.clone();
        engine
            .schedule_at(SimTime::from_millis(1), "publish", "UDR", move |engine| {
                publisher.publish(engine, udr_record("udr-1")).unwrap();
            })
            .unwrap();
        engine.run_until(SimTime::from_millis(5));
        assert_eq!(*order.borrow(), ["zone-2", "zone-3"]);
    }
}
