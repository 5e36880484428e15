//! Global control plane: zone registry, template decomposition, discovery
//! configuration, deployment fan-out to the zone agents, advisory zone
//! management, and the dependency graph tying it all together.
//!
//! Decomposition splits a service template along a placement map. Intra-zone
//! relationships are kept as-is; every cross-zone relationship A -> B turns
//! into a discoverable node for B's type next to A, a record node attached
//! to B in its home zone, and an allow-list rule connecting the two zones.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, SubserviceReport};
use crate::discovery::{Discovery, DiscoveryError, DiscoveryRule};
use crate::sim::{Engine, SimSpan};
use crate::template::{NodeKind, NodeTemplate, Relationship, Resources, ServiceTemplate, TemplateDoc};

/// A zone as the orchestrator sees it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneConfig {
    pub zone_id: String,
    pub capacity: Resources,
    pub location_tag: String,
}

/// Node-to-zone assignment, total over the VNF nodes of the input template.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlacementMap {
    pub assignments: BTreeMap<String, String>,
}

impl PlacementMap {
    pub fn new(assignments: impl IntoIterator<Item = (String, String)>) -> Self {
        PlacementMap {
            assignments: assignments.into_iter().collect(),
        }
    }

    /// Trivial helper for tests and demos: assigns every VNF node to the
    /// zones in the given order, round-robin.
    pub fn round_robin(template: &ServiceTemplate, zones: &[String]) -> Self {
        let assignments = template
            .nodes
            .iter()
            .filter(|node| node.kind == NodeKind::Vnf)
            .enumerate()
            .map(|(i, node)| (node.id.clone(), zones[i % zones.len()].clone()))
            .collect();
        PlacementMap { assignments }
    }
}

/// A placement document: the zone universe plus the assignment map.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSpec {
    pub zones: Vec<String>,
    pub assignments: BTreeMap<String, String>,
}

impl PlacementSpec {
    pub fn parse(text: &str) -> Result<PlacementSpec, DecomposeError> {
        toml::from_str(text).map_err(|e| DecomposeError::BadPlacementDoc(e.to_string()))
    }

    pub fn placement(&self) -> PlacementMap {
        PlacementMap {
            assignments: self.assignments.clone(),
        }
    }

    pub fn zone_set(&self) -> BTreeSet<String> {
        self.zones.iter().cloned().collect()
    }
}

/// The decomposition result: one subservice per zone plus the allow-list
/// rules that stitch them back together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeploymentPlan {
    pub ns_instance_id: String,
    pub subservices: BTreeMap<String, ServiceTemplate>,
    pub discovery_rules: Vec<DiscoveryRule>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecomposeError {
    #[error("input template is invalid: {0}")]
    InvalidTemplate(String),
    #[error("decomposition input must contain only vnf nodes, found '{node}' of kind {kind}")]
    NonVnfNode { node: String, kind: String },
    #[error("placement misses vnf node '{0}'")]
    PlacementMissing(String),
    #[error("placement names unknown node '{0}'")]
    PlacementForUnknownNode(String),
    #[error("node '{node}' is placed in unknown zone '{zone}'")]
    UnknownZone { node: String, zone: String },
    #[error("placement document is not valid: {0}")]
    BadPlacementDoc(String),
    #[error("plan document is not valid: {0}")]
    BadPlanDoc(String),
}

/// Split `template` into per-zone subservices along `placement`.
pub fn decompose(
    template: &ServiceTemplate,
    placement: &PlacementMap,
    zones: &BTreeSet<String>,
) -> Result<DeploymentPlan, DecomposeError> {
    let violations = template.validate();
    if let Some(first) = violations.first() {
        return Err(DecomposeError::InvalidTemplate(first.to_string()));
    }
    for node in &template.nodes {
        if node.kind != NodeKind::Vnf {
            return Err(DecomposeError::NonVnfNode {
                node: node.id.clone(),
                kind: node.kind.to_string(),
            });
        }
        match placement.assignments.get(&node.id) {
            None => return Err(DecomposeError::PlacementMissing(node.id.clone())),
            Some(zone) if !zones.contains(zone) => {
                return Err(DecomposeError::UnknownZone {
                    node: node.id.clone(),
                    zone: zone.clone(),
                })
            }
            Some(_) => {}
        }
    }
    for node_id in placement.assignments.keys() {
        if template.node(node_id).is_none() {
            return Err(DecomposeError::PlacementForUnknownNode(node_id.clone()));
        }
    }

    struct ZoneDraft {
        nodes: Vec<NodeTemplate>,
        specials: Vec<NodeTemplate>,
        relationships: Vec<Relationship>,
    }
    let mut drafts: BTreeMap<&str, ZoneDraft> = BTreeMap::new();
    for node in &template.nodes {
        let zone = placement.assignments[&node.id].as_str();
        drafts
            .entry(zone)
            .or_insert_with(|| ZoneDraft {
                nodes: Vec::new(),
                specials: Vec::new(),
                relationships: Vec::new(),
            })
            .nodes
            .push(node.clone());
    }

    let mut rules: Vec<DiscoveryRule> = Vec::new();
    let mut records_created: BTreeSet<&str> = BTreeSet::new();
    let mut discoverables_created: BTreeSet<(&str, &str)> = BTreeSet::new();
    for rel in &template.relationships {
        let source_zone = placement.assignments[&rel.source].as_str();
        let target_zone = placement.assignments[&rel.target].as_str();
        if source_zone == target_zone {
            drafts
                .get_mut(source_zone)
                .expect("zone has nodes")
                .relationships
                .push(rel.clone());
            continue;
        }
        let target = template.node(&rel.target).expect("validated endpoint");

        // Record node next to the target, once per target.
        if records_created.insert(rel.target.as_str()) {
            let record_id = format!("{}-record", rel.target);
            let draft = drafts.get_mut(target_zone).expect("zone has nodes");
            draft
                .specials
                .push(NodeTemplate::record(record_id.clone(), target.vnf_type.clone()));
            draft
                .relationships
                .push(Relationship::connects_to(record_id, rel.target.clone()));
        }
        // Discoverable node next to the consumer, once per (target, zone).
        let discoverable_id = format!("{}-discoverable", rel.target);
        if discoverables_created.insert((rel.target.as_str(), source_zone)) {
            let draft = drafts.get_mut(source_zone).expect("zone has nodes");
            draft
                .specials
                .push(NodeTemplate::discoverable(
                    discoverable_id.clone(),
                    target.vnf_type.clone(),
                ));
        }
        drafts
            .get_mut(source_zone)
            .expect("zone has nodes")
            .relationships
            .push(Relationship::connects_to(rel.source.clone(), discoverable_id));

        // Allow-list rule: publisher is the target's zone, consumer the
        // source's; same (publisher, type) pairs merge their consumers.
        match rules
            .iter_mut()
            .find(|rule| rule.publisher_zone == target_zone && rule.vnf_type == target.vnf_type)
        {
            Some(rule) => {
                if !rule.consumer_zones.iter().any(|z| z == source_zone) {
                    rule.consumer_zones.push(source_zone.to_string());
                }
            }
            None => rules.push(DiscoveryRule {
                publisher_zone: target_zone.to_string(),
                vnf_type: target.vnf_type.clone(),
                consumer_zones: vec![source_zone.to_string()],
            }),
        }
    }

    let subservices: BTreeMap<String, ServiceTemplate> = drafts
        .into_iter()
        .map(|(zone, draft)| {
            let mut nodes = draft.nodes;
            nodes.extend(draft.specials);
            (
                zone.to_string(),
                ServiceTemplate {
                    name: format!("{}-{zone}", template.name),
                    nodes,
                    relationships: draft.relationships,
                },
            )
        })
        .collect();
    debug_assert!(subservices
        .values()
        .all(|sub| sub.validate().is_empty()));

    Ok(DeploymentPlan {
        ns_instance_id: template.name.clone(),
        subservices,
        discovery_rules: rules,
    })
}

// --- plan document ----------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDoc {
    ns_instance_id: String,
    #[serde(default)]
    discovery_rules: Vec<RuleDoc>,
    #[serde(default)]
    subservices: Vec<SubserviceDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc {
    publisher_zone: String,
    vnf_type: String,
    consumer_zones: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubserviceDoc {
    zone: String,
    template: TemplateDoc,
}

impl DeploymentPlan {
    /// Canonical serialization in the template-document schema plus a
    /// `discovery_rules` section.
    pub fn serialize(&self) -> String {
        let doc = PlanDoc {
            ns_instance_id: self.ns_instance_id.clone(),
            discovery_rules: self
                .discovery_rules
                .iter()
                .map(|rule| RuleDoc {
                    publisher_zone: rule.publisher_zone.clone(),
                    vnf_type: rule.vnf_type.clone(),
                    consumer_zones: rule.consumer_zones.clone(),
                })
                .collect(),
            subservices: self
                .subservices
                .iter()
                .map(|(zone, template)| SubserviceDoc {
                    zone: zone.clone(),
                    template: template.to_doc(),
                })
                .collect(),
        };
        toml::to_string(&doc).expect("plan serialization cannot fail")
    }

    pub fn parse(text: &str) -> Result<DeploymentPlan, DecomposeError> {
        let doc: PlanDoc =
            toml::from_str(text).map_err(|e| DecomposeError::BadPlanDoc(e.to_string()))?;
        let mut subservices = BTreeMap::new();
        for sub in doc.subservices {
            let template = ServiceTemplate::from_doc(sub.template)
                .map_err(|e| DecomposeError::BadPlanDoc(e.to_string()))?;
            subservices.insert(sub.zone, template);
        }
        Ok(DeploymentPlan {
            ns_instance_id: doc.ns_instance_id,
            subservices,
            discovery_rules: doc
                .discovery_rules
                .into_iter()
                .map(|rule| DiscoveryRule {
                    publisher_zone: rule.publisher_zone,
                    vnf_type: rule.vnf_type,
                    consumer_zones: rule.consumer_zones,
                })
                .collect(),
        })
    }
}

// --- dependency graph -------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Vertex {
    Zone(String),
    Agent(String),
    NsInstance(String),
    VnfInstance(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeKind {
    Manages,
    Hosts,
    PartOf,
}

/// Relations among zones, agents, and instances. Edges may only reference
/// existing vertices; removing a vertex removes its edges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DependencyGraph {
    vertices: BTreeSet<Vertex>,
    edges: BTreeSet<(Vertex, EdgeKind, Vertex)>,
}

impl DependencyGraph {
    pub fn add_vertex(&mut self, vertex: Vertex) {
        self.vertices.insert(vertex);
    }

    pub fn add_edge(&mut self, from: Vertex, kind: EdgeKind, to: Vertex) {
        assert!(
            self.vertices.contains(&from) && self.vertices.contains(&to),
            "edges must reference existing vertices"
        );
        self.edges.insert((from, kind, to));
    }

    pub fn remove_vertex(&mut self, vertex: &Vertex) {
        self.vertices.remove(vertex);
        self.edges
            .retain(|(from, _, to)| from != vertex && to != vertex);
    }

    pub fn contains(&self, vertex: &Vertex) -> bool {
        self.vertices.contains(vertex)
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter()
    }

    pub fn edges(&self) -> impl Iterator<Item = &(Vertex, EdgeKind, Vertex)> {
        self.edges.iter()
    }

    pub fn vnf_instance_count(&self) -> usize {
        self.vertices
            .iter()
            .filter(|v| matches!(v, Vertex::VnfInstance(_)))
            .count()
    }
}

// --- zone management --------------------------------------------------------

/// The one KPI policy implemented: an upper bound on the mean agent-to-VIM
/// operation delay per zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZonePolicy {
    pub max_mean_vim_delay_ms: f64,
}

/// Advisory zone actions; reported, never executed.
#[derive(Debug, Clone, PartialEq)]
pub enum ZoneAction {
    None {
        zone: String,
    },
    FlagOverThreshold {
        zone: String,
        mean_delay_ms: f64,
        bound_ms: f64,
    },
}

// --- orchestrator -----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStatus {
    Deploying,
    Deployed,
    Failed,
    TornDown,
}

/// Everything the orchestrator tracks about one NS instance.
#[derive(Clone)]
pub struct PlanRecord {
    pub plan: DeploymentPlan,
    pub status: PlanStatus,
    pub zone_reports: BTreeMap<String, SubserviceReport>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OrchestratorError {
    #[error("zone '{0}' is already registered")]
    DuplicateZone(String),
    #[error("zone '{0}' must have positive capacity")]
    ZeroCapacity(String),
    #[error("plan references unregistered zone '{0}'")]
    UnregisteredZone(String),
    #[error("ns instance '{0}' is unknown")]
    UnknownInstance(String),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error("discovery configuration failed: {0}")]
    Discovery(#[from] DiscoveryError),
}

struct ZoneEntry {
    config: ZoneConfig,
    agent: Agent,
}

struct OrchestratorState {
    discovery: Discovery,
    zones: BTreeMap<String, ZoneEntry>,
    graph: DependencyGraph,
    plans: BTreeMap<String, PlanRecord>,
}

#[derive(Clone)]
pub struct Orchestrator {
    inner: Rc<RefCell<OrchestratorState>>,
}

impl Orchestrator {
    pub fn new(discovery: Discovery) -> Orchestrator {
        Orchestrator {
            inner: Rc::new(RefCell::new(OrchestratorState {
                discovery,
                zones: BTreeMap::new(),
                graph: DependencyGraph::default(),
                plans: BTreeMap::new(),
            })),
        }
    }

    pub fn register_zone(&self, config: ZoneConfig, agent: Agent) -> Result<(), OrchestratorError> {
        let mut state = self.inner.borrow_mut();
        if config.capacity.cpu == 0 || config.capacity.memory_mib == 0 {
            return Err(OrchestratorError::ZeroCapacity(config.zone_id));
        }
        if state.zones.contains_key(&config.zone_id) {
            return Err(OrchestratorError::DuplicateZone(config.zone_id));
        }
        let zone_id = config.zone_id.clone();
        state.graph.add_vertex(Vertex::Zone(zone_id.clone()));
        state.graph.add_vertex(Vertex::Agent(zone_id.clone()));
        state.graph.add_edge(
            Vertex::Agent(zone_id.clone()),
            EdgeKind::Manages,
            Vertex::Zone(zone_id.clone()),
        );
        state.zones.insert(zone_id, ZoneEntry { config, agent });
        Ok(())
    }

    pub fn zone_ids(&self) -> BTreeSet<String> {
        self.inner.borrow().zones.keys().cloned().collect()
    }

    pub fn agent(&self, zone_id: &str) -> Option<Agent> {
        self.inner
            .borrow()
            .zones
            .get(zone_id)
            .map(|entry| entry.agent.clone())
    }

    pub fn zone_config(&self, zone_id: &str) -> Option<ZoneConfig> {
        self.inner
            .borrow()
            .zones
            .get(zone_id)
            .map(|entry| entry.config.clone())
    }

    /// Decompose against the registered zones.
    pub fn decompose(
        &self,
        template: &ServiceTemplate,
        placement: &PlacementMap,
    ) -> Result<DeploymentPlan, OrchestratorError> {
        let zones = self.zone_ids();
        Ok(decompose(template, placement, &zones)?)
    }

    /// Install the plan's allow-list into the discovery engine.
    pub fn configure_discovery(&self, plan: &DeploymentPlan) -> Result<(), OrchestratorError> {
        let discovery = self.inner.borrow().discovery.clone();
        discovery.add_rules(&plan.discovery_rules)?;
        Ok(())
    }

    /// Instruct every zone's agent to deploy its subservice, all at the
    /// current instant. Completion is observed through `plan_status`.
    /// Re-issuing a known plan is a no-op returning the existing status.
    pub fn deploy(
        &self,
        engine: &mut Engine,
        plan: DeploymentPlan,
    ) -> Result<PlanStatus, OrchestratorError> {
        {
            let state = self.inner.borrow();
            if let Some(existing) = state.plans.get(&plan.ns_instance_id) {
                return Ok(existing.status);
            }
            for zone in plan.subservices.keys() {
                if !state.zones.contains_key(zone) {
                    return Err(OrchestratorError::UnregisteredZone(zone.clone()));
                }
            }
        }
        let ns_id = plan.ns_instance_id.clone();
        let subservices = plan.subservices.clone();
        {
            let mut state = self.inner.borrow_mut();
            state.graph.add_vertex(Vertex::NsInstance(ns_id.clone()));
            state.plans.insert(
                ns_id.clone(),
                PlanRecord {
                    plan,
                    status: PlanStatus::Deploying,
                    zone_reports: BTreeMap::new(),
                },
            );
        }
        for (zone, subservice) in subservices {
            let agent = self
                .agent(&zone)
                .expect("zone registration checked above");
            let this = self.clone();
            let ns = ns_id.clone();
            engine.schedule_in(
                SimSpan::ZERO,
                "instruct-agent",
                format!("{ns_id}/{zone}"),
                move |engine| {
                    let reporter = this.clone();
                    let ns_for_report = ns.clone();
                    agent.deploy_subservice(
                        engine,
                        subservice,
                        Box::new(move |engine, report| {
                            reporter.on_zone_report(engine, ns_for_report, report)
                        }),
                    );
                },
            );
        }
        Ok(PlanStatus::Deploying)
    }

    fn on_zone_report(&self, engine: &mut Engine, ns_id: String, report: SubserviceReport) {
        let mut state = self.inner.borrow_mut();
        let zone = report.zone.clone();
        // Record created instances, even for failed zones: teardown needs them.
        for instance in &report.instances {
            let vertex = Vertex::VnfInstance(instance.instance_id.clone());
            state.graph.add_vertex(vertex.clone());
            state.graph.add_edge(
                Vertex::Zone(zone.clone()),
                EdgeKind::Hosts,
                vertex.clone(),
            );
            state
                .graph
                .add_edge(vertex, EdgeKind::PartOf, Vertex::NsInstance(ns_id.clone()));
        }
        let record = state.plans.get_mut(&ns_id).expect("reported plan exists");
        record.zone_reports.insert(zone, report);
        if record.zone_reports.len() == record.plan.subservices.len() {
            let all_ok = record
                .zone_reports
                .values()
                .all(|report| report.outcome.is_ok());
            record.status = if all_ok {
                PlanStatus::Deployed
            } else {
                PlanStatus::Failed
            };
            let status = record.status;
            engine.mark(
                "ns-deploy-done",
                format!("{ns_id}/{}", if status == PlanStatus::Deployed { "ok" } else { "failed" }),
            );
        }
    }

    pub fn plan_status(&self, ns_instance_id: &str) -> Option<PlanStatus> {
        self.inner
            .borrow()
            .plans
            .get(ns_instance_id)
            .map(|record| record.status)
    }

    pub fn plan_record(&self, ns_instance_id: &str) -> Option<PlanRecord> {
        self.inner.borrow().plans.get(ns_instance_id).cloned()
    }

    /// Stop every instance of the NS in reverse zone order, unpublish its
    /// records, and prune the dependency graph.
    pub fn teardown(&self, engine: &mut Engine, ns_instance_id: &str) -> Result<(), OrchestratorError> {
        let zone_instances: Vec<(Agent, Vec<String>)> = {
            let state = self.inner.borrow();
            let record = state
                .plans
                .get(ns_instance_id)
                .ok_or_else(|| OrchestratorError::UnknownInstance(ns_instance_id.to_string()))?;
            record
                .zone_reports
                .iter()
                .rev()
                .map(|(zone, report)| {
                    let agent = state.zones[zone].agent.clone();
                    let ids = report
                        .instances
                        .iter()
                        .map(|instance| instance.instance_id.clone())
                        .collect();
                    (agent, ids)
                })
                .collect()
        };
        for (agent, instance_ids) in &zone_instances {
            agent.stop_subservice(engine, instance_ids);
        }
        let mut state = self.inner.borrow_mut();
        for (_, instance_ids) in zone_instances {
            for instance_id in instance_ids {
                state.graph.remove_vertex(&Vertex::VnfInstance(instance_id));
            }
        }
        state
            .graph
            .remove_vertex(&Vertex::NsInstance(ns_instance_id.to_string()));
        let record = state
            .plans
            .get_mut(ns_instance_id)
            .expect("checked above");
        record.status = PlanStatus::TornDown;
        engine.mark("ns-teardown", ns_instance_id.to_string());
        Ok(())
    }

    /// Compare per-zone KPI samples against the policy and report which zones
    /// breach the delay bound. Actions are advisory only.
    pub fn manage_zones(
        &self,
        kpi_report: &BTreeMap<String, Vec<f64>>,
        policy: &ZonePolicy,
    ) -> Vec<ZoneAction> {
        let state = self.inner.borrow();
        kpi_report
            .iter()
            .filter(|(zone, _)| state.zones.contains_key(*zone))
            .map(|(zone, delays)| {
                let mean = if delays.is_empty() {
                    0.0
                } else {
                    delays.iter().sum::<f64>() / delays.len() as f64
                };
                if mean > policy.max_mean_vim_delay_ms {
                    ZoneAction::FlagOverThreshold {
                        zone: zone.clone(),
                        mean_delay_ms: mean,
                        bound_ms: policy.max_mean_vim_delay_ms,
                    }
                } else {
                    ZoneAction::None { zone: zone.clone() }
                }
            })
            .collect()
    }

    pub fn graph(&self) -> DependencyGraph {
        self.inner.borrow().graph.clone()
    }

    pub fn discovery(&self) -> Discovery {
        self.inner.borrow().discovery.clone()
    }
}
