//! Diameter-style message model and routing service.
//!
//! The router dispatches by diameter application and balances across the
//! backends registered for that application in round-robin order, with an
//! independent cursor per application. Only request messages are modelled;
//! the answer leg is represented by the completion timestamp on the message.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimTime;

/// Diameter application the message belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Application {
    S6a,
    Cx,
}

impl Application {
    pub const ALL: [Application; 2] = [Application::S6a, Application::Cx];

    pub fn as_str(&self) -> &'static str {
        match self {
            Application::S6a => "S6a",
            Application::Cx => "Cx",
        }
    }
}

impl fmt::Display for Application {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Application {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S6a" | "s6a" => Ok(Application::S6a),
            "Cx" | "cx" => Ok(Application::Cx),
            other => Err(format!("unknown diameter application '{other}'")),
        }
    }
}

/// Request command codes, three on S6a and four on Cx.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Command {
    /// Authentication Information Request (S6a).
    Air,
    /// Purge UE Request (S6a).
    Pur,
    /// Update Location Request (S6a).
    Ulr,
    /// Location Info Request (Cx).
    Lir,
    /// Multimedia Authentication Request (Cx).
    Mar,
    /// Server Assignment Request (Cx).
    Sar,
    /// User Authorization Request (Cx).
    Uar,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Air,
        Command::Pur,
        Command::Ulr,
        Command::Lir,
        Command::Mar,
        Command::Sar,
        Command::Uar,
    ];

    pub fn application(&self) -> Application {
        match self {
            Command::Air | Command::Pur | Command::Ulr => Application::S6a,
            Command::Lir | Command::Mar | Command::Sar | Command::Uar => Application::Cx,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Air => "AIR",
            Command::Pur => "PUR",
            Command::Ulr => "ULR",
            Command::Lir => "LIR",
            Command::Mar => "MAR",
            Command::Sar => "SAR",
            Command::Uar => "UAR",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "AIR" => Ok(Command::Air),
            "PUR" => Ok(Command::Pur),
            "ULR" => Ok(Command::Ulr),
            "LIR" => Ok(Command::Lir),
            "MAR" => Ok(Command::Mar),
            "SAR" => Ok(Command::Sar),
            "UAR" => Ok(Command::Uar),
            other => Err(format!("unknown diameter command '{other}'")),
        }
    }
}

/// One signaling request as it moves through the system. Timestamps are
/// filled in as the message progresses and are non-decreasing in field order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiameterMessage {
    pub message_id: u64,
    pub session_id: String,
    pub application: Application,
    pub command: Command,
    pub created_at: SimTime,
    pub enqueued_at: Option<SimTime>,
    pub service_start: Option<SimTime>,
    pub completed_at: Option<SimTime>,
}

impl DiameterMessage {
    pub fn new(message_id: u64, command: Command, created_at: SimTime) -> Self {
        DiameterMessage {
            message_id,
            session_id: format!("session-{message_id}"),
            application: command.application(),
            command,
            created_at,
            enqueued_at: None,
            service_start: None,
            completed_at: None,
        }
    }

    /// Response time in milliseconds, once the message has completed.
    pub fn response_time_ms(&self) -> Option<f64> {
        self.completed_at
            .map(|done| done.since(self.created_at).as_millis_f64())
    }
}

/// A completed request measurement, as pushed from the data plane to the
/// zone's orchestration agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasuredResponse {
    pub instance_id: String,
    pub message_id: u64,
    pub interface: Application,
    pub command: Command,
    pub created_at: SimTime,
    pub completed_at: SimTime,
}

impl MeasuredResponse {
    pub fn from_message(message: &DiameterMessage, instance_id: impl Into<String>) -> Self {
        MeasuredResponse {
            instance_id: instance_id.into(),
            message_id: message.message_id,
            interface: message.application,
            command: message.command,
            created_at: message.created_at,
            completed_at: message
                .completed_at
                .expect("measured message must be completed"),
        }
    }

    pub fn response_time_ms(&self) -> f64 {
        self.completed_at.since(self.created_at).as_millis_f64()
    }
}

/// A connection point published for or configured on a VNF instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionPoint {
    pub address: String,
    pub port: u16,
    pub protocol: String,
}

impl ConnectionPoint {
    pub fn diameter(address: impl Into<String>) -> Self {
        ConnectionPoint {
            address: address.into(),
            port: 3868,
            protocol: "diameter".to_string(),
        }
    }
}

/// A backend's registration with the routing service.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendRegistration {
    pub backend_id: String,
    pub applications: Vec<Application>,
    pub endpoint: ConnectionPoint,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RoutingError {
    #[error("backend '{0}' is already registered")]
    DuplicateBackend(String),
    #[error("backend '{0}' is not registered")]
    UnknownBackend(String),
    #[error("backend registration must name at least one application")]
    EmptyApplications,
    #[error("no backend registered for application {0}")]
    NoBackend(Application),
}

/// One line of the routing audit log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteRecord {
    pub message_id: u64,
    pub application: Application,
    pub command: Command,
    pub backend_id: String,
}

/// Round-robin diameter router. Mutated only from event handlers.
#[derive(Default)]
pub struct DiameterRouter {
    backends: BTreeMap<String, BackendRegistration>,
    rotations: BTreeMap<Application, Vec<String>>,
    cursors: BTreeMap<Application, usize>,
    audit: Option<Vec<RouteRecord>>,
}

impl DiameterRouter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keep an audit log of every routed message.
    pub fn enable_audit(&mut self) {
        if self.audit.is_none() {
            self.audit = Some(Vec::new());
        }
    }

    pub fn audit_log(&self) -> &[RouteRecord] {
        self.audit.as_deref().unwrap_or(&[])
    }

    /// Audit log rendered as tab-separated lines.
    pub fn audit_dump(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for record in self.audit_log() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                record.message_id, record.application, record.command, record.backend_id
            );
        }
        out
    }

    pub fn register_backend(&mut self, registration: BackendRegistration) -> Result<(), RoutingError> {
        if registration.applications.is_empty() {
            return Err(RoutingError::EmptyApplications);
        }
        if self.backends.contains_key(&registration.backend_id) {
            return Err(RoutingError::DuplicateBackend(registration.backend_id));
        }
        for application in &registration.applications {
            self.rotations
                .entry(*application)
                .or_default()
                .push(registration.backend_id.clone());
        }
        self.backends
            .insert(registration.backend_id.clone(), registration);
        Ok(())
    }

    pub fn deregister_backend(&mut self, backend_id: &str) -> Result<(), RoutingError> {
        let registration = self
            .backends
            .remove(backend_id)
            .ok_or_else(|| RoutingError::UnknownBackend(backend_id.to_string()))?;
        for application in &registration.applications {
            if let Some(rotation) = self.rotations.get_mut(application) {
                if let Some(pos) = rotation.iter().position(|id| id == backend_id) {
                    rotation.remove(pos);
                    let cursor = self.cursors.entry(*application).or_insert(0);
                    // Keep the cursor pointing at the same next backend where
                    // possible; clamp when it ran off the end.
                    if *cursor > pos {
                        *cursor -= 1;
                    }
                    if rotation.is_empty() {
                        *cursor = 0;
                    } else {
                        *cursor %= rotation.len();
                    }
                }
            }
        }
        Ok(())
    }

    pub fn backend(&self, backend_id: &str) -> Option<&BackendRegistration> {
        self.backends.get(backend_id)
    }

    pub fn rotation(&self, application: Application) -> &[String] {
        self.rotations
            .get(&application)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Pick the backend for a message and advance that application's cursor.
    pub fn route(&mut self, message: &DiameterMessage) -> Result<String, RoutingError> {
        let rotation = self
            .rotations
            .get(&message.application)
            .filter(|rotation| !rotation.is_empty())
            .ok_or(RoutingError::NoBackend(message.application))?;
        let cursor = self.cursors.entry(message.application).or_insert(0);
        let backend_id = rotation[*cursor % rotation.len()].clone();
        *cursor = (*cursor + 1) % rotation.len();
        if let Some(audit) = &mut self.audit {
            audit.push(RouteRecord {
                message_id: message.message_id,
                application: message.application,
                command: message.command,
                backend_id: backend_id.clone(),
            });
        }
        Ok(backend_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registration(id: &str, applications: &[Application]) -> BackendRegistration {
        BackendRegistration {
            backend_id: id.to_string(),
            applications: applications.to_vec(),
            endpoint: ConnectionPoint::diameter(format!("{id}.sim")),
        }
    }

    fn message(id: u64, command: Command) -> DiameterMessage {
        DiameterMessage::new(id, command, SimTime::ZERO)
    }

    #[test]
    fn commands_belong_to_their_application() {
        for command in [Command::Air, Command::Pur, Command::Ulr] {
            assert_eq!(command.application(), Application::S6a);
        }
        for command in [Command::Lir, Command::Mar, Command::Sar, Command::Uar] {
            assert_eq!(command.application(), Application::Cx);
        }
    }

    #[test]
    fn register_two_dual_backends_fills_both_rotations() {
        let mut router = DiameterRouter::new();
        router
            .register_backend(registration("fe-1", &[Application::S6a, Application::Cx]))
            .unwrap();
        router
            .register_backend(registration("fe-2", &[Application::S6a, Application::Cx]))
            .unwrap();
        assert_eq!(router.rotation(Application::S6a).len(), 2);
        assert_eq!(router.rotation(Application::Cx).len(), 2);
    }

    #[test]
    fn single_application_backend_leaves_other_rotation_untouched() {
        let mut router = DiameterRouter::new();
        router
            .register_backend(registration("s6a-only", &[Application::S6a]))
            .unwrap();
        assert_eq!(router.rotation(Application::Cx).len(), 0);
        assert_eq!(router.rotation(Application::S6a).len(), 1);
    }

    #[test]
    fn duplicate_registration_is_rejected() {
        let mut router = DiameterRouter::new();
        router
            .register_backend(registration("fe-1", &[Application::S6a]))
            .unwrap();
        assert_eq!(
            router.register_backend(registration("fe-1", &[Application::Cx])),
            Err(RoutingError::DuplicateBackend("fe-1".to_string()))
        );
    }

    #[test]
    fn split_setup_routes_each_application_to_its_backend() {
        let mut router = DiameterRouter::new();
        router
            .register_backend(registration("s6a-fe", &[Application::S6a]))
            .unwrap();
        router
            .register_backend(registration("cx-fe", &[Application::Cx]))
            .unwrap();
        for id in 0..6 {
            assert_eq!(router.route(&message(id, Command::Lir)).unwrap(), "cx-fe");
        }
        for id in 6..12 {
            assert_eq!(router.route(&message(id, Command::Ulr)).unwrap(), "s6a-fe");
        }
    }

    #[test]
    fn full_setup_round_robins_within_the_application() {
        let mut router = DiameterRouter::new();
        router
            .register_backend(registration("fe-1", &[Application::S6a, Application::Cx]))
            .unwrap();
        router
            .register_backend(registration("fe-2", &[Application::S6a, Application::Cx]))
            .unwrap();
        let picks: Vec<String> = (0..4)
            .map(|id| router.route(&message(id, Command::Lir)).unwrap())
            .collect();
        assert_eq!(picks, ["fe-1", "fe-2", "fe-1", "fe-2"]);
    }

    #[test]
    fn cursors_are_independent_per_application() {
        let mut router = DiameterRouter::new();
        router
            .register_backend(registration("fe-1", &[Application::S6a, Application::Cx]))
            .unwrap();
        router
            .register_backend(registration("fe-2", &[Application::S6a, Application::Cx]))
            .unwrap();
        // Interleave: S6a traffic must not advance the Cx cursor.
        assert_eq!(router.route(&message(0, Command::Lir)).unwrap(), "fe-1");
        assert_eq!(router.route(&message(1, Command::Air)).unwrap(), "fe-1");
        assert_eq!(router.route(&message(2, Command::Air)).unwrap(), "fe-2");
        assert_eq!(router.route(&message(3, Command::Lir)).unwrap(), "fe-2");
    }

    #[test]
    fn empty_rotation_is_a_routing_error() {
        let mut router = DiameterRouter::new();
        router
            .register_backend(registration("cx-fe", &[Application::Cx]))
            .unwrap();
        assert_eq!(
            router.route(&message(0, Command::Air)),
            Err(RoutingError::NoBackend(Application::S6a))
        );
    }

    #[test]
    fn deregister_leaves_survivor_taking_all_traffic() {
        let mut router = DiameterRouter::new();
        router
            .register_backend(registration("fe-1", &[Application::Cx]))
            .unwrap();
        router
            .register_backend(registration("fe-2", &[Application::Cx]))
            .unwrap();
        router.deregister_backend("fe-1").unwrap();
        for id in 0..3 {
            assert_eq!(router.route(&message(id, Command::Uar)).unwrap(), "fe-2");
        }
    }

    #[test]
    fn deregister_unknown_backend_is_an_error() {
        let mut router = DiameterRouter::new();
        assert_eq!(
            router.deregister_backend("ghost"),
            Err(RoutingError::UnknownBackend("ghost".to_string()))
        );
    }

    #[test]
    fn reregistered_backend_joins_at_the_rotation_end() {
        let mut router = DiameterRouter::new();
        for id in ["fe-1", "fe-2", "fe-3"] {
            router
                .register_backend(registration(id, &[Application::Cx]))
                .unwrap();
        }
        router.deregister_backend("fe-1").unwrap();
        router
            .register_backend(registration("fe-1", &[Application::Cx]))
            .unwrap();
        assert_eq!(router.rotation(Application::Cx), ["fe-2", "fe-3", "fe-1"]);
        let picks: Vec<String> = (0..6)
            .map(|id| router.route(&message(id, Command::Sar)).unwrap())
            .collect();
        assert_eq!(picks, ["fe-2", "fe-3", "fe-1", "fe-2", "fe-3", "fe-1"]);
    }

    #[test]
    fn audit_log_records_every_route() {
        let mut router = DiameterRouter::new();
        router.enable_audit();
        router
            .register_backend(registration("fe-1", &[Application::Cx]))
            .unwrap();
        router.route(&message(9, Command::Mar)).unwrap();
        assert_eq!(router.audit_dump(), "9\tCx\tMAR\tfe-1\n");
    }

    #[test]
    fn fairness_over_full_cycles_is_exact() {
        let mut router = DiameterRouter::new();
        for id in ["a", "b", "c"] {
            router
                .register_backend(registration(id, &[Application::S6a]))
                .unwrap();
        }
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for id in 0..3 * 40 {
            let backend = router.route(&message(id, Command::Pur)).unwrap();
            *counts.entry(backend).or_default() += 1;
        }
        assert!(counts.values().all(|&n| n == 40), "{counts:?}");
    }
}
