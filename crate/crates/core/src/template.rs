//! Service template data model and parser.
//!
//! A template is a declarative topology: VNF nodes plus `connects-to`
//! relationships. Two special node kinds carry cross-zone composition:
//! a *VNF record* node publishes the instance information of the node it
//! connects to, and a *discoverable VNF* node stands in for an instance
//! deployed in another zone and is resolved through the discovery engine.
//!
//! The document format is a restricted TOML schema (`service`, `nodes`,
//! `relationships`) with one canonical serialization that preserves the
//! stored node and relationship order.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Node role within a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Vnf,
    VnfRecord,
    DiscoverableVnf,
}

impl NodeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::Vnf => "vnf",
            NodeKind::VnfRecord => "vnf-record",
            NodeKind::DiscoverableVnf => "discoverable-vnf",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a VNF node is realized. Special nodes are not deployed at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum DeploymentKind {
    Container,
    Vm,
    #[default]
    None,
}

impl DeploymentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeploymentKind::Container => "container",
            DeploymentKind::Vm => "vm",
            DeploymentKind::None => "none",
        }
    }
}

impl fmt::Display for DeploymentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Requested compute resources for one instance of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Resources {
    pub cpu: u32,
    pub memory_mib: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeTemplate {
    pub id: String,
    pub kind: NodeKind,
    pub deployment: DeploymentKind,
    pub resources: Resources,
    /// Functional type label, e.g. "UDR", "S6a", "Cx".
    pub vnf_type: String,
    pub properties: BTreeMap<String, String>,
}

impl NodeTemplate {
    pub fn vnf(id: impl Into<String>, vnf_type: impl Into<String>, deployment: DeploymentKind, resources: Resources) -> Self {
        NodeTemplate {
            id: id.into(),
            kind: NodeKind::Vnf,
            deployment,
            resources,
            vnf_type: vnf_type.into(),
            properties: BTreeMap::new(),
        }
    }

    pub fn record(id: impl Into<String>, vnf_type: impl Into<String>) -> Self {
        NodeTemplate {
            id: id.into(),
            kind: NodeKind::VnfRecord,
            deployment: DeploymentKind::None,
            resources: Resources::default(),
            vnf_type: vnf_type.into(),
            properties: BTreeMap::new(),
        }
    }

    pub fn discoverable(id: impl Into<String>, vnf_type: impl Into<String>) -> Self {
        NodeTemplate {
            id: id.into(),
            kind: NodeKind::DiscoverableVnf,
            deployment: DeploymentKind::None,
            resources: Resources::default(),
            vnf_type: vnf_type.into(),
            properties: BTreeMap::new(),
        }
    }

    /// Number of instances to create for this node (property `replicas`,
    /// default 1).
    pub fn replicas(&self) -> u32 {
        self.properties
            .get("replicas")
            .and_then(|value| value.parse().ok())
            .filter(|&n| n >= 1)
            .unwrap_or(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelationshipKind {
    #[default]
    ConnectsTo,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relationship {
    pub source: String,
    pub target: String,
    pub kind: RelationshipKind,
}

impl Relationship {
    pub fn connects_to(source: impl Into<String>, target: impl Into<String>) -> Self {
        Relationship {
            source: source.into(),
            target: target.into(),
            kind: RelationshipKind::ConnectsTo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceTemplate {
    pub name: String,
    pub nodes: Vec<NodeTemplate>,
    pub relationships: Vec<Relationship>,
}

/// A single broken template invariant. `validate` returns all of them,
/// not just the first.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("duplicate node id '{0}'")]
    DuplicateNodeId(String),
    #[error("relationship {index} references unknown {side} node '{id}'")]
    UnknownEndpoint {
        index: usize,
        side: &'static str,
        id: String,
    },
    #[error("relationship {index} is a self-loop on node '{id}'")]
    SelfLoop { index: usize, id: String },
    #[error("node '{id}' of kind {kind} must not carry a deployment ({deployment})")]
    SpecialNodeDeployed {
        id: String,
        kind: NodeKind,
        deployment: DeploymentKind,
    },
    #[error("vnf node '{id}' needs a deployment of container or vm")]
    VnfWithoutDeployment { id: String },
    #[error("relationship cycle: {}", cycle.join(" -> "))]
    Cycle { cycle: Vec<String> },
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template document is not valid: {0}")]
    Syntax(String),
    #[error("template '{name}' violates {} invariant(s): {}", violations.len(),
            violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid {
        name: String,
        violations: Vec<Violation>,
    },
    #[error("relationship cycle: {}", cycle.join(" -> "))]
    Cycle { cycle: Vec<String> },
}

// --- document schema -------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct TemplateDoc {
    service: String,
    #[serde(default)]
    nodes: Vec<NodeDoc>,
    #[serde(default)]
    relationships: Vec<RelationshipDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deployment: Option<String>,
    vnf_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cpu: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    memory_mib: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    properties: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelationshipDoc {
    source: String,
    target: String,
    kind: String,
}

impl ServiceTemplate {
    /// Parse and validate a template document. All invariants hold on the
    /// returned value.
    pub fn parse(text: &str) -> Result<ServiceTemplate, TemplateError> {
        let doc: TemplateDoc =
            toml::from_str(text).map_err(|e| TemplateError::Syntax(e.to_string()))?;
        Self::from_doc(doc)
    }

    pub(crate) fn from_doc(doc: TemplateDoc) -> Result<ServiceTemplate, TemplateError> {
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for node in doc.nodes {
            let kind = match node.kind.as_str() {
                "vnf" => NodeKind::Vnf,
                "vnf-record" => NodeKind::VnfRecord,
                "discoverable-vnf" => NodeKind::DiscoverableVnf,
                other => {
                    return Err(TemplateError::Syntax(format!(
                        "node '{}': unknown kind '{other}'",
                        node.id
                    )))
                }
            };
            let deployment = match node.deployment.as_deref() {
                Some("container") => DeploymentKind::Container,
                Some("vm") => DeploymentKind::Vm,
                Some("none") | None => DeploymentKind::None,
                Some(other) => {
                    return Err(TemplateError::Syntax(format!(
                        "node '{}': unknown deployment '{other}'",
                        node.id
                    )))
                }
            };
            nodes.push(NodeTemplate {
                id: node.id,
                kind,
                deployment,
                resources: Resources {
                    cpu: node.cpu.unwrap_or(0),
                    memory_mib: node.memory_mib.unwrap_or(0),
                },
                vnf_type: node.vnf_type,
                properties: node.properties,
            });
        }
        let mut relationships = Vec::with_capacity(doc.relationships.len());
        for (index, rel) in doc.relationships.into_iter().enumerate() {
            if rel.kind != "connects-to" {
                return Err(TemplateError::Syntax(format!(
                    "relationship {index}: unknown kind '{}'",
                    rel.kind
                )));
            }
            relationships.push(Relationship {
                source: rel.source,
                target: rel.target,
                kind: RelationshipKind::ConnectsTo,
            });
        }
        let template = ServiceTemplate {
            name: doc.service,
            nodes,
            relationships,
        };
        let violations = template.validate();
        if violations.is_empty() {
            Ok(template)
        } else {
            Err(TemplateError::Invalid {
                name: template.name,
                violations,
            })
        }
    }

    /// Canonical serialization; `parse` of the result reproduces the value.
    pub fn serialize(&self) -> String {
        toml::to_string(&self.to_doc()).expect("template serialization cannot fail")
    }

    pub(crate) fn to_doc(&self) -> TemplateDoc {
        TemplateDoc {
            service: self.name.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|node| NodeDoc {
                    id: node.id.clone(),
                    kind: node.kind.as_str().to_string(),
                    deployment: match node.deployment {
                        DeploymentKind::None => None,
                        other => Some(other.as_str().to_string()),
                    },
                    vnf_type: node.vnf_type.clone(),
                    cpu: (node.resources.cpu > 0).then_some(node.resources.cpu),
                    memory_mib: (node.resources.memory_mib > 0).then_some(node.resources.memory_mib),
                    properties: node.properties.clone(),
                })
                .collect(),
            relationships: self
                .relationships
                .iter()
                .map(|rel| RelationshipDoc {
                    source: rel.source.clone(),
                    target: rel.target.clone(),
                    kind: "connects-to".to_string(),
                })
                .collect(),
        }
    }

    /// Check every invariant, collecting all violations.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let mut seen: HashSet<&str> = HashSet::new();
        for node in &self.nodes {
            if !seen.insert(node.id.as_str()) {
                violations.push(Violation::DuplicateNodeId(node.id.clone()));
            }
            match node.kind {
                NodeKind::Vnf => {
                    if node.deployment == DeploymentKind::None {
                        violations.push(Violation::VnfWithoutDeployment {
                            id: node.id.clone(),
                        });
                    }
                }
                NodeKind::VnfRecord | NodeKind::DiscoverableVnf => {
                    if node.deployment != DeploymentKind::None {
                        violations.push(Violation::SpecialNodeDeployed {
                            id: node.id.clone(),
                            kind: node.kind,
                            deployment: node.deployment,
                        });
                    }
                }
            }
        }
        let ids: HashSet<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        for (index, rel) in self.relationships.iter().enumerate() {
            if rel.source == rel.target {
                violations.push(Violation::SelfLoop {
                    index,
                    id: rel.source.clone(),
                });
                continue;
            }
            for (side, id) in [("source", &rel.source), ("target", &rel.target)] {
                if !ids.contains(id.as_str()) {
                    violations.push(Violation::UnknownEndpoint {
                        index,
                        side,
                        id: id.clone(),
                    });
                }
            }
        }
        // Cycle detection only makes sense once endpoints resolve.
        if violations.is_empty() {
            if let Err(cycle) = self.topological_order() {
                violations.push(Violation::Cycle { cycle });
            }
        }
        violations
    }

    pub fn node(&self, id: &str) -> Option<&NodeTemplate> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_ids(&self) -> BTreeSet<&str> {
        self.nodes.iter().map(|n| n.id.as_str()).collect()
    }

    /// Targets a node connects to, in relationship order.
    pub fn targets_of(&self, id: &str) -> Vec<&str> {
        self.relationships
            .iter()
            .filter(|rel| rel.source == id)
            .map(|rel| rel.target.as_str())
            .collect()
    }

    /// Lifecycle (topological) order: every `connects-to` target precedes its
    /// source; ties break lexicographically by node id. Errors list the
    /// offending cycle.
    pub fn lifecycle_order(&self) -> Result<Vec<String>, TemplateError> {
        self.topological_order()
            .map_err(|cycle| TemplateError::Cycle { cycle })
    }

    fn topological_order(&self) -> Result<Vec<String>, Vec<String>> {
        // A source depends on each of its targets.
        let mut pending_deps: HashMap<&str, usize> = HashMap::new();
        let mut dependents: HashMap<&str, Vec<&str>> = HashMap::new();
        for node in &self.nodes {
            pending_deps.insert(node.id.as_str(), 0);
        }
        for rel in &self.relationships {
            *pending_deps.entry(rel.source.as_str()).or_insert(0) += 1;
            dependents
                .entry(rel.target.as_str())
                .or_default()
                .push(rel.source.as_str());
        }
        let mut ready: BTreeSet<&str> = pending_deps
            .iter()
            .filter(|(_, &deps)| deps == 0)
            .map(|(&id, _)| id)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(&next) = ready.iter().next() {
            ready.remove(next);
            order.push(next.to_string());
            if let Some(sources) = dependents.get(next) {
                for &source in sources {
                    let deps = pending_deps.get_mut(source).expect("known node");
                    *deps -= 1;
                    if *deps == 0 {
                        ready.insert(source);
                    }
                }
            }
        }
        if order.len() == self.nodes.len() {
            return Ok(order);
        }
        Err(self.find_cycle(&order))
    }

    fn find_cycle(&self, resolved: &[String]) -> Vec<String> {
        let done: HashSet<&str> = resolved.iter().map(String::as_str).collect();
        let start = self
            .nodes
            .iter()
            .map(|n| n.id.as_str())
            .find(|id| !done.contains(id))
            .expect("a cycle implies an unresolved node");
        // Follow unresolved dependencies until a node repeats.
        let mut path: Vec<&str> = vec![start];
        let mut seen: HashMap<&str, usize> = HashMap::new();
        seen.insert(start, 0);
        let mut current = start;
        loop {
            let next = self
                .relationships
                .iter()
                .find(|rel| rel.source == current && !done.contains(rel.target.as_str()))
                .map(|rel| rel.target.as_str())
                .expect("unresolved node has an unresolved dependency");
            if let Some(&at) = seen.get(next) {
                let mut cycle: Vec<String> =
                    path[at..].iter().map(|s| s.to_string()).collect();
                cycle.push(next.to_string());
                return cycle;
            }
            seen.insert(next, path.len());
            path.push(next);
            current = next;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HSS_TEMPLATE: &str = r#"
service = "hssaas"

[[nodes]]
id = "S6a"
kind = "vnf"
deployment = "container"
vnf_type = "S6a"
cpu = 1
memory_mib = 1024

[[nodes]]
id = "Cx"
kind = "vnf"
deployment = "container"
vnf_type = "Cx"
cpu = 1
memory_mib = 1024

[[nodes]]
id = "UDR"
kind = "vnf"
deployment = "vm"
vnf_type = "UDR"
cpu = 16
memory_mib = 32768

[[relationships]]
source = "S6a"
target = "UDR"
kind = "connects-to"

[[relationships]]
source = "Cx"
target = "UDR"
kind = "connects-to"
"#;

    #[test]
    fn parses_the_three_node_hss_topology() {
        let template = ServiceTemplate::parse(HSS_TEMPLATE).unwrap();
        assert_eq!(template.name, "hssaas");
        assert_eq!(template.nodes.len(), 3);
        assert!(template
            .nodes
            .iter()
            .all(|node| node.kind == NodeKind::Vnf));
        let ids: Vec<&str> = template.nodes.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["S6a", "Cx", "UDR"]);
        assert_eq!(
            template.relationships,
            vec![
                Relationship::connects_to("S6a", "UDR"),
                Relationship::connects_to("Cx", "UDR"),
            ]
        );
        assert_eq!(template.node("UDR").unwrap().deployment, DeploymentKind::Vm);
        assert_eq!(template.node("UDR").unwrap().resources.cpu, 16);
    }

    #[test]
    fn empty_nodes_list_is_a_valid_template() {
        let template = ServiceTemplate::parse("service = \"empty\"\n").unwrap();
        assert!(template.nodes.is_empty());
        assert!(template.relationships.is_empty());
        assert!(template.validate().is_empty());
    }

    #[test]
    fn self_loop_is_rejected() {
        let text = r#"
service = "loop"

[[nodes]]
id = "A"
kind = "vnf"
deployment = "container"
vnf_type = "A"

[[relationships]]
source = "A"
target = "A"
kind = "connects-to"
"#;
        let err = ServiceTemplate::parse(text).unwrap_err();
        match err {
            TemplateError::Invalid { violations, .. } => {
                assert!(matches!(&violations[0], Violation::SelfLoop { id, .. } if id == "A"));
            }
            other => panic!("expected Invalid, got {other:?}"),
        }
    }

    #[test]
    fn dangling_endpoint_names_the_node_and_side() {
        let text = r#"
service = "dangling"

[[nodes]]
id = "A"
kind = "vnf"
deployment = "vm"
vnf_type = "A"

[[relationships]]
source = "A"
target = "missing"
kind = "connects-to"
"#;
        let err = ServiceTemplate::parse(text).unwrap_err().to_string();
        assert!(err.contains("missing") && err.contains("target"), "{err}");
    }

    #[test]
    fn syntax_error_carries_location_information() {
        let err = ServiceTemplate::parse("service = \"x\"\n[[nodes]]\nid = 42\n").unwrap_err();
        let message = err.to_string();
        assert!(message.contains("line"), "{message}");
    }

    #[test]
    fn validate_reports_all_violations_not_just_the_first() {
        let template = ServiceTemplate {
            name: "bad".to_string(),
            nodes: vec![
                NodeTemplate::vnf("A", "A", DeploymentKind::None, Resources::default()),
                {
                    let mut record = NodeTemplate::record("R", "A");
                    record.deployment = DeploymentKind::Container;
                    record
                },
                NodeTemplate::vnf("A", "A", DeploymentKind::Vm, Resources::default()),
            ],
            relationships: vec![],
        };
        let violations = template.validate();
        assert_eq!(violations.len(), 3, "{violations:?}");
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::DuplicateNodeId(id) if id == "A")));
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::SpecialNodeDeployed { id, .. } if id == "R")));
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::VnfWithoutDeployment { id } if id == "A")));
    }

    #[test]
    fn record_node_with_deployment_is_a_violation() {
        let mut record = NodeTemplate::record("UDR-record", "UDR");
        record.deployment = DeploymentKind::Container;
        let template = ServiceTemplate {
            name: "t".to_string(),
            nodes: vec![record],
            relationships: vec![],
        };
        assert_eq!(template.validate().len(), 1);
    }

    #[test]
    fn lifecycle_order_of_single_node() {
        let template = ServiceTemplate {
            name: "one".to_string(),
            nodes: vec![NodeTemplate::vnf(
                "only",
                "X",
                DeploymentKind::Container,
                Resources::default(),
            )],
            relationships: vec![],
        };
        assert_eq!(template.lifecycle_order().unwrap(), ["only"]);
    }

    #[test]
    fn lifecycle_order_reverses_a_chain() {
        let template = ServiceTemplate {
            name: "chain".to_string(),
            nodes: ["A", "B", "C"]
                .map(|id| NodeTemplate::vnf(id, id, DeploymentKind::Container, Resources::default()))
                .to_vec(),
            relationships: vec![
                Relationship::connects_to("A", "B"),
                Relationship::connects_to("B", "C"),
            ],
        };
        assert_eq!(template.lifecycle_order().unwrap(), ["C", "B", "A"]);
    }

    // Hand-derived from the deployment sequence of subservice-1: the recorded
    // VNF must run before both its consumer and its record node; the record
    // node publishes only after the instance exists.
    #[test]
    fn lifecycle_order_puts_recorded_vnf_before_consumer_and_record() {
        let template = ServiceTemplate {
            name: "subservice-1".to_string(),
            nodes: vec![
                NodeTemplate::vnf("S6a", "S6a", DeploymentKind::Container, Resources::default()),
                NodeTemplate::vnf("UDR", "UDR", DeploymentKind::Vm, Resources::default()),
                NodeTemplate::record("UDR-record", "UDR"),
            ],
            relationships: vec![
                Relationship::connects_to("S6a", "UDR"),
                Relationship::connects_to("UDR-record", "UDR"),
            ],
        };
        let order = template.lifecycle_order().unwrap();
        let position = |id: &str| order.iter().position(|x| x == id).unwrap();
        assert!(position("UDR") < position("S6a"));
        assert!(position("UDR") < position("UDR-record"));
        assert_eq!(order, ["UDR", "S6a", "UDR-record"]);
    }

    #[test]
    fn cycle_error_lists_the_cycle() {
        let template = ServiceTemplate {
            name: "cyclic".to_string(),
            nodes: ["A", "B", "C"]
                .map(|id| NodeTemplate::vnf(id, id, DeploymentKind::Container, Resources::default()))
                .to_vec(),
            relationships: vec![
                Relationship::connects_to("A", "B"),
                Relationship::connects_to("B", "C"),
                Relationship::connects_to("C", "A"),
            ],
        };
        let violations = template.validate();
        assert_eq!(violations.len(), 1);
        match &violations[0] {
            Violation::Cycle { cycle } => {
                assert_eq!(cycle.len(), 4);
                assert_eq!(cycle.first(), cycle.last());
                for id in ["A", "B", "C"] {
                    assert!(cycle.contains(&id.to_string()));
                }
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn serialization_round_trips_the_hss_template() {
        let template = ServiceTemplate::parse(HSS_TEMPLATE).unwrap();
        let text = template.serialize();
        let reparsed = ServiceTemplate::parse(&text).unwrap();
        assert_eq!(reparsed, template);
    }

    #[test]
    fn replicas_property_defaults_to_one() {
        let mut node = NodeTemplate::vnf("fe", "FE", DeploymentKind::Container, Resources::default());
        assert_eq!(node.replicas(), 1);
        node.properties.insert("replicas".to_string(), "3".to_string());
        assert_eq!(node.replicas(), 3);
        node.properties.insert("replicas".to_string(), "0".to_string());
        assert_eq!(node.replicas(), 1);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arbitrary_template() -> impl Strategy<Value = ServiceTemplate> {
            // Up to 8 uniquely named vnf nodes with edges only from lower to
            // higher index, which keeps the graph acyclic by construction.
            (2usize..8).prop_flat_map(|n| {
                let edges = proptest::collection::btree_set((0..n, 0..n), 0..n * 2);
                edges.prop_map(move |edges| {
                    let nodes: Vec<NodeTemplate> = (0..n)
                        .map(|i| {
                            NodeTemplate::vnf(
                                format!("node-{i}"),
                                format!("T{i}"),
                                if i % 2 == 0 {
                                    DeploymentKind::Container
                                } else {
                                    DeploymentKind::Vm
                                },
                                Resources {
                                    cpu: (i as u32 % 4) + 1,
                                    memory_mib: 256 * (i as u64 + 1),
                                },
                            )
                        })
                        .collect();
                    let relationships = edges
                        .into_iter()
                        .filter(|(a, b)| a != b)
                        .map(|(a, b)| {
                            let (low, high) = if a < b { (a, b) } else { (b, a) };
                            Relationship::connects_to(
                                format!("node-{low}"),
                                format!("node-{high}"),
                            )
                        })
                        .collect::<Vec<_>>();
                    let mut seen = HashSet::new();
                    let relationships: Vec<Relationship> = relationships
                        .into_iter()
                        .filter(|r| seen.insert((r.source.clone(), r.target.clone())))
                        .collect();
                    ServiceTemplate {
                        name: "generated".to_string(),
                        nodes,
                        relationships,
                    }
                })
            })
        }

        proptest! {
            #[test]
            fn parse_of_serialize_is_identity(template in arbitrary_template()) {
                prop_assert!(template.validate().is_empty());
                let text = template.serialize();
                let reparsed = ServiceTemplate::parse(&text).unwrap();
                prop_assert_eq!(reparsed, template);
            }

            #[test]
            fn lifecycle_order_is_a_permutation_respecting_edges(template in arbitrary_template()) {
                let order = template.lifecycle_order().unwrap();
                let expected: BTreeSet<String> =
                    template.nodes.iter().map(|n| n.id.clone()).collect();
                let got: BTreeSet<String> = order.iter().cloned().collect();
                prop_assert_eq!(got, expected);
                prop_assert_eq!(order.len(), template.nodes.len());
                let position: HashMap<&str, usize> = order
                    .iter()
                    .enumerate()
                    .map(|(i, id)| (id.as_str(), i))
                    .collect();
                for rel in &template.relationships {
                    prop_assert!(
                        position[rel.target.as_str()] < position[rel.source.as_str()],
                        "target {} must precede source {}", rel.target, rel.source
                    );
                }
            }
        }
    }
}
