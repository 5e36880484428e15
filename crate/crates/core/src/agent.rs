//! Per-zone orchestration agent.
//!
//! An agent executes a subservice template under instruction from the
//! orchestrator: it walks the nodes in lifecycle order, allocates zone
//! resources and simulates create delays for VNF nodes, publishes records
//! for record nodes, resolves discoverable nodes through the discovery
//! engine (parking the deployment until the information arrives), and
//! configures each instance with the endpoints of everything it connects to.
//! It also aggregates response metrics pushed from the data plane.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use thiserror::Error;

use crate::diameter::{ConnectionPoint, MeasuredResponse};
use crate::discovery::{Discovery, DiscoveryError, VnfRecordEntry};
use crate::sim::{Engine, SimSpan};
use crate::template::{DeploymentKind, NodeKind, Resources, ServiceTemplate};

/// Default simulated create delay for a VM-deployed VNF.
pub const DEFAULT_VM_CREATE_MS: u64 = 2_000;
/// Default simulated create delay for a container-deployed VNF.
pub const DEFAULT_CONTAINER_CREATE_MS: u64 = 200;
/// Default discover timeout for discoverable nodes.
pub const DEFAULT_DISCOVER_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceState {
    Creating,
    Configuring,
    Running,
    Stopped,
    Failed,
}

impl InstanceState {
    pub fn as_str(&self) -> &'static str {
        match self {
            InstanceState::Creating => "creating",
            InstanceState::Configuring => "configuring",
            InstanceState::Running => "running",
            InstanceState::Stopped => "stopped",
            InstanceState::Failed => "failed",
        }
    }

    fn may_transition_to(self, next: InstanceState) -> bool {
        matches!(
            (self, next),
            (InstanceState::Creating, InstanceState::Configuring)
                | (InstanceState::Configuring, InstanceState::Running)
                | (InstanceState::Running, InstanceState::Stopped)
                | (_, InstanceState::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VnfInstance {
    pub instance_id: String,
    pub node_id: String,
    pub vnf_type: String,
    pub zone: String,
    pub deployment: DeploymentKind,
    pub resources: Resources,
    pub state: InstanceState,
    pub endpoints: Vec<ConnectionPoint>,
    pub properties: BTreeMap<String, String>,
}

/// Reserved versus available compute in one zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZoneResources {
    pub total: Resources,
    pub allocated: Resources,
}

impl ZoneResources {
    fn fits(&self, extra_cpu: u32, extra_memory: u64) -> bool {
        self.allocated.cpu + extra_cpu <= self.total.cpu
            && self.allocated.memory_mib + extra_memory <= self.total.memory_mib
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeployFailure {
    #[error("zone '{zone}' lacks capacity for node '{node}'")]
    CapacityExhausted { zone: String, node: String },
    #[error("discovery of '{vnf_type}' for node '{node}' failed: {cause}")]
    DiscoveryFailed {
        node: String,
        vnf_type: String,
        cause: String,
    },
    #[error("publishing record node '{node}' failed: {cause}")]
    PublishRejected { node: String, cause: String },
    #[error("subservice template is not usable: {0}")]
    InvalidSubservice(String),
    #[error("agent is already executing a deployment")]
    Busy,
}

/// What an agent reports back once a subservice deployment finishes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubserviceReport {
    pub zone: String,
    pub outcome: Result<(), DeployFailure>,
    /// Instances created so far, in creation order; partial on failure.
    pub instances: Vec<VnfInstance>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AgentError {
    #[error("instance '{0}' is not managed by this agent")]
    UnknownInstance(String),
}

/// A response sample as stored by the agent, tagged with its zone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredSample {
    pub zone: String,
    pub instance_id: String,
    pub sample: MeasuredResponse,
}

pub type ReportCallback = Box<dyn FnOnce(&mut Engine, SubserviceReport)>;
pub type InstanceHook = Rc<dyn Fn(&mut Engine, &VnfInstance)>;

struct ActiveDeployment {
    template: ServiceTemplate,
    order: Vec<String>,
    position: usize,
    pending_creates: usize,
    created: Vec<String>,
    on_done: Option<ReportCallback>,
}

struct AgentState {
    zone_id: String,
    resources: ZoneResources,
    vm_create_delay: SimSpan,
    container_create_delay: SimSpan,
    discover_timeout: SimSpan,
    instances: BTreeMap<String, VnfInstance>,
    creation_order: Vec<String>,
    published: Vec<(String, String)>,
    discovered: BTreeMap<String, Vec<VnfRecordEntry>>,
    metrics: Vec<StoredSample>,
    rejected_metrics: u64,
    vim_op_delays_ms: Vec<f64>,
    deployment: Option<ActiveDeployment>,
    on_running: Option<InstanceHook>,
    on_stopped: Option<InstanceHook>,
}

/// Clonable handle to one zone's agent.
#[derive(Clone)]
pub struct Agent {
    discovery: Discovery,
    inner: Rc<RefCell<AgentState>>,
}

impl Agent {
    pub fn new(zone_id: impl Into<String>, capacity: Resources, discovery: Discovery) -> Agent {
        Agent {
            discovery,
            inner: Rc::new(RefCell::new(AgentState {
                zone_id: zone_id.into(),
                resources: ZoneResources {
                    total: capacity,
                    allocated: Resources::default(),
                },
                vm_create_delay: SimSpan::from_millis(DEFAULT_VM_CREATE_MS),
                container_create_delay: SimSpan::from_millis(DEFAULT_CONTAINER_CREATE_MS),
                discover_timeout: SimSpan::from_millis(DEFAULT_DISCOVER_TIMEOUT_MS),
                instances: BTreeMap::new(),
                creation_order: Vec::new(),
                published: Vec::new(),
                discovered: BTreeMap::new(),
                metrics: Vec::new(),
                rejected_metrics: 0,
                vim_op_delays_ms: Vec::new(),
                deployment: None,
                on_running: None,
                on_stopped: None,
            })),
        }
    }

    pub fn zone_id(&self) -> String {
        self.inner.borrow().zone_id.clone()
    }

    pub fn set_create_delays(&self, vm: SimSpan, container: SimSpan) {
        let mut state = self.inner.borrow_mut();
        state.vm_create_delay = vm;
        state.container_create_delay = container;
    }

    pub fn set_discover_timeout(&self, timeout: SimSpan) {
        self.inner.borrow_mut().discover_timeout = timeout;
    }

    /// Hook invoked whenever an instance reaches the running state. The data
    /// plane uses this to bring up front-end actors and register backends.
    pub fn on_instance_running(&self, hook: InstanceHook) {
        self.inner.borrow_mut().on_running = Some(hook);
    }

    pub fn on_instance_stopped(&self, hook: InstanceHook) {
        self.inner.borrow_mut().on_stopped = Some(hook);
    }

    pub fn allocated(&self) -> Resources {
        self.inner.borrow().resources.allocated
    }

    pub fn instances(&self) -> Vec<VnfInstance> {
        self.inner.borrow().instances.values().cloned().collect()
    }

    pub fn instance(&self, instance_id: &str) -> Option<VnfInstance> {
        self.inner.borrow().instances.get(instance_id).cloned()
    }

    /// Agent-to-VIM operation delays observed so far (create operations),
    /// the KPI the orchestrator's zone policy watches.
    pub fn vim_op_delays_ms(&self) -> Vec<f64> {
        self.inner.borrow().vim_op_delays_ms.clone()
    }

    /// Deploy a subservice; the callback fires when the deployment has
    /// finished (successfully or not).
    pub fn deploy_subservice(
        &self,
        engine: &mut Engine,
        template: ServiceTemplate,
        on_done: ReportCallback,
    ) {
        let failure = {
            let violations = template.validate();
            if !violations.is_empty() {
                Some(DeployFailure::InvalidSubservice(
                    violations[0].to_string(),
                ))
            } else if self.inner.borrow().deployment.is_some() {
                Some(DeployFailure::Busy)
            } else {
                None
            }
        };
        if let Some(failure) = failure {
            let zone = self.zone_id();
            on_done(
                engine,
                SubserviceReport {
                    zone,
                    outcome: Err(failure),
                    instances: Vec::new(),
                },
            );
            return;
        }
        let order = template.lifecycle_order().expect("validated template");
        {
            let mut state = self.inner.borrow_mut();
            state.deployment = Some(ActiveDeployment {
                template,
                order,
                position: 0,
                pending_creates: 0,
                created: Vec::new(),
                on_done: Some(on_done),
            });
        }
        let this = self.clone();
        let zone = self.zone_id();
        engine.schedule_in(SimSpan::ZERO, "agent-deploy", zone, move |engine| {
            this.advance(engine)
        });
    }

    /// Process the next node of the active deployment.
    fn advance(&self, engine: &mut Engine) {
        enum Step {
            Finished,
            Vnf {
                node_id: String,
                replicas: u32,
                deployment: DeploymentKind,
                resources: Resources,
                vnf_type: String,
                properties: BTreeMap<String, String>,
            },
            Record {
                node_id: String,
                target: Option<String>,
            },
            Discoverable {
                node_id: String,
                vnf_type: String,
            },
        }

        let step = {
            let mut state = self.inner.borrow_mut();
            let zone = state.zone_id.clone();
            let active = match &mut state.deployment {
                Some(active) => active,
                None => return,
            };
            if active.position >= active.order.len() {
                Step::Finished
            } else {
                let node_id = active.order[active.position].clone();
                let node = active
                    .template
                    .node(&node_id)
                    .expect("ordered node exists")
                    .clone();
                engine.mark("deploy-node", format!("{zone}/{node_id}"));
                match node.kind {
                    NodeKind::Vnf => Step::Vnf {
                        node_id,
                        replicas: node.replicas(),
                        deployment: node.deployment,
                        resources: node.resources,
                        vnf_type: node.vnf_type.clone(),
                        properties: node.properties.clone(),
                    },
                    NodeKind::VnfRecord => Step::Record {
                        target: active
                            .template
                            .targets_of(&node_id)
                            .first()
                            .map(|t| t.to_string()),
                        node_id,
                    },
                    NodeKind::DiscoverableVnf => Step::Discoverable {
                        vnf_type: node.vnf_type.clone(),
                        node_id,
                    },
                }
            }
        };

        match step {
            Step::Finished => self.finish(engine, Ok(())),
            Step::Vnf {
                node_id,
                replicas,
                deployment,
                resources,
                vnf_type,
                properties,
            } => self.start_vnf_node(
                engine, node_id, replicas, deployment, resources, vnf_type, properties,
            ),
            Step::Record { node_id, target } => self.publish_record_node(engine, node_id, target),
            Step::Discoverable { node_id, vnf_type } => {
                self.start_discover_node(engine, node_id, vnf_type)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn start_vnf_node(
        &self,
        engine: &mut Engine,
        node_id: String,
        replicas: u32,
        deployment: DeploymentKind,
        resources: Resources,
        vnf_type: String,
        properties: BTreeMap<String, String>,
    ) {
        let create_delay = {
            let mut state = self.inner.borrow_mut();
            let needed_cpu = resources.cpu * replicas;
            let needed_memory = resources.memory_mib * replicas as u64;
            if !state.resources.fits(needed_cpu, needed_memory) {
                let zone = state.zone_id.clone();
                drop(state);
                self.finish(
                    engine,
                    Err(DeployFailure::CapacityExhausted {
                        zone,
                        node: node_id,
                    }),
                );
                return;
            }
            state.resources.allocated.cpu += needed_cpu;
            state.resources.allocated.memory_mib += needed_memory;
            let delay = match deployment {
                DeploymentKind::Vm => state.vm_create_delay,
                _ => state.container_create_delay,
            };
            let zone = state.zone_id.clone();
            for replica in 1..=replicas {
                let instance_id = format!("{node_id}-{replica}");
                let endpoint = ConnectionPoint::diameter(format!("{instance_id}.{zone}.sim"));
                state.instances.insert(
                    instance_id.clone(),
                    VnfInstance {
                        instance_id: instance_id.clone(),
                        node_id: node_id.clone(),
                        vnf_type: vnf_type.clone(),
                        zone: zone.clone(),
                        deployment,
                        resources,
                        state: InstanceState::Creating,
                        endpoints: vec![endpoint],
                        properties: properties.clone(),
                    },
                );
                state.creation_order.push(instance_id.clone());
                let active = state.deployment.as_mut().expect("active deployment");
                active.created.push(instance_id);
                active.pending_creates += 1;
            }
            delay
        };
        for replica in 1..=replicas {
            let instance_id = format!("{node_id}-{replica}");
            let this = self.clone();
            engine.schedule_in(
                create_delay,
                "vnf-created",
                instance_id.clone(),
                move |engine| this.configure_instance(engine, instance_id, create_delay),
            );
        }
    }

    /// Create finished: configure the instance with the endpoints of every
    /// node it connects to, then mark it running.
    fn configure_instance(&self, engine: &mut Engine, instance_id: String, create_delay: SimSpan) {
        let (running_instance, node_done) = {
            let mut state = self.inner.borrow_mut();
            state.vim_op_delays_ms.push(create_delay.as_millis_f64());
            let zone = state.zone_id.clone();
            engine.mark("vnf-configure", format!("{zone}/{instance_id}"));

            // Resolve peer endpoints before mutating the instance.
            let mut peer_properties: Vec<(String, String)> = Vec::new();
            {
                let active = state.deployment.as_ref().expect("active deployment");
                let node_id = state.instances[&instance_id].node_id.clone();
                for target_id in active.template.targets_of(&node_id) {
                    let target = active.template.node(target_id).expect("valid template");
                    let endpoints: Vec<String> = match target.kind {
                        NodeKind::Vnf => state
                            .instances
                            .values()
                            .filter(|instance| instance.node_id == target_id)
                            .flat_map(|instance| instance.endpoints.iter())
                            .map(|cp| format!("{}:{}", cp.address, cp.port))
                            .collect(),
                        NodeKind::DiscoverableVnf => state
                            .discovered
                            .get(&target.vnf_type)
                            .map(|records| {
                                records
                                    .iter()
                                    .flat_map(|record| record.connection_points.iter())
                                    .map(|cp| format!("{}:{}", cp.address, cp.port))
                                    .collect()
                            })
                            .unwrap_or_default(),
                        NodeKind::VnfRecord => Vec::new(),
                    };
                    peer_properties.push((format!("peer.{target_id}"), endpoints.join(",")));
                }
            }

            let instance = state
                .instances
                .get_mut(&instance_id)
                .expect("created instance");
            debug_assert!(instance.state.may_transition_to(InstanceState::Configuring));
            instance.state = InstanceState::Configuring;
            for (key, value) in peer_properties {
                instance.properties.insert(key, value);
            }
            instance.state = InstanceState::Running;
            let running_instance = instance.clone();
            engine.mark("vnf-running", format!("{zone}/{instance_id}"));

            let active = state.deployment.as_mut().expect("active deployment");
            active.pending_creates -= 1;
            let node_done = active.pending_creates == 0;
            if node_done {
                active.position += 1;
            }
            (running_instance, node_done)
        };
        if let Some(hook) = self.inner.borrow().on_running.clone() {
            hook(engine, &running_instance);
        }
        if node_done {
            let this = self.clone();
            engine.schedule_in(SimSpan::ZERO, "deploy-continue", "", move |engine| {
                this.advance(engine)
            });
        }
    }

    /// Publish a record for every instance of the node the record connects to.
    fn publish_record_node(&self, engine: &mut Engine, node_id: String, target: Option<String>) {
        let target = match target {
            Some(target) => target,
            None => {
                self.finish(
                    engine,
                    Err(DeployFailure::InvalidSubservice(format!(
                        "record node '{node_id}' has no connects-to target"
                    ))),
                );
                return;
            }
        };
        let (zone, records) = {
            let state = self.inner.borrow();
            let records: Vec<VnfRecordEntry> = state
                .instances
                .values()
                .filter(|instance| {
                    instance.node_id == target && instance.state == InstanceState::Running
                })
                .map(|instance| VnfRecordEntry {
                    vnf_type: instance.vnf_type.clone(),
                    instance_id: instance.instance_id.clone(),
                    zone: state.zone_id.clone(),
                    connection_points: instance.endpoints.clone(),
                    metadata: BTreeMap::new(),
                    published_at: engine.now(),
                })
                .collect();
            (state.zone_id.clone(), records)
        };
        if records.is_empty() {
            self.finish(
                engine,
                Err(DeployFailure::InvalidSubservice(format!(
                    "record node '{node_id}' found no running instances of '{target}'"
                ))),
            );
            return;
        }
        for record in records {
            let instance_id = record.instance_id.clone();
            let vnf_type = record.vnf_type.clone();
            engine.mark("publish", format!("{zone}/{vnf_type}/{instance_id}"));
            match self.discovery.publish(engine, record) {
                Ok(()) => {
                    self.inner
                        .borrow_mut()
                        .published
                        .push((vnf_type, instance_id));
                }
                Err(cause) => {
                    self.finish(
                        engine,
                        Err(DeployFailure::PublishRejected {
                            node: node_id,
                            cause: cause.to_string(),
                        }),
                    );
                    return;
                }
            }
        }
        {
            let mut state = self.inner.borrow_mut();
            if let Some(active) = state.deployment.as_mut() {
                active.position += 1;
            }
        }
        let this = self.clone();
        engine.schedule_in(SimSpan::ZERO, "deploy-continue", "", move |engine| {
            this.advance(engine)
        });
    }

    /// Block the deployment on a discovery request for the node's type.
    fn start_discover_node(&self, engine: &mut Engine, node_id: String, vnf_type: String) {
        let (zone, timeout) = {
            let state = self.inner.borrow();
            (state.zone_id.clone(), state.discover_timeout)
        };
        engine.mark("discover-request", format!("{zone}<-{vnf_type}"));
        let this = self.clone();
        let lookup_type = vnf_type.clone();
        self.discovery.discover(
            engine,
            &lookup_type,
            &zone,
            timeout,
            Box::new(move |engine, result| match result {
                Ok(records) => {
                    {
                        let mut state = this.inner.borrow_mut();
                        state.discovered.insert(vnf_type.clone(), records);
                        if let Some(active) = state.deployment.as_mut() {
                            active.position += 1;
                        }
                    }
                    this.advance(engine);
                }
                Err(cause @ DiscoveryError::Timeout { .. }) => {
                    this.finish(
                        engine,
                        Err(DeployFailure::DiscoveryFailed {
                            node: node_id,
                            vnf_type,
                            cause: cause.to_string(),
                        }),
                    );
                }
                Err(cause) => {
                    this.finish(
                        engine,
                        Err(DeployFailure::DiscoveryFailed {
                            node: node_id,
                            vnf_type,
                            cause: cause.to_string(),
                        }),
                    );
                }
            }),
        );
    }

    fn finish(&self, engine: &mut Engine, outcome: Result<(), DeployFailure>) {
        let (report, on_done) = {
            let mut state = self.inner.borrow_mut();
            let zone = state.zone_id.clone();
            let mut active = state.deployment.take().expect("active deployment");
            let instances: Vec<VnfInstance> = active
                .created
                .iter()
                .map(|id| state.instances[id].clone())
                .collect();
            engine.mark(
                "deploy-done",
                format!(
                    "{zone}/{}",
                    if outcome.is_ok() { "ok" } else { "failed" }
                ),
            );
            (
                SubserviceReport {
                    zone,
                    outcome,
                    instances,
                },
                active.on_done.take().expect("unreported deployment"),
            )
        };
        on_done(engine, report);
    }

    /// Stop instances in reverse lifecycle order, releasing resources and
    /// unpublishing their records. Idempotent: already-stopped or unknown
    /// instances are skipped.
    pub fn stop_subservice(&self, engine: &mut Engine, instance_ids: &[String]) {
        let mut ordered: Vec<String> = {
            let state = self.inner.borrow();
            state
                .creation_order
                .iter()
                .filter(|id| instance_ids.contains(id))
                .cloned()
                .collect()
        };
        ordered.reverse();
        for instance_id in ordered {
            let (stopped_instance, records) = {
                let mut state = self.inner.borrow_mut();
                let instance = match state.instances.get_mut(&instance_id) {
                    Some(instance) => instance,
                    None => continue,
                };
                if !matches!(
                    instance.state,
                    InstanceState::Creating | InstanceState::Configuring | InstanceState::Running
                ) {
                    continue;
                }
                instance.state = InstanceState::Stopped;
                let resources = instance.resources;
                let stopped_instance = instance.clone();
                state.resources.allocated.cpu -= resources.cpu;
                state.resources.allocated.memory_mib -= resources.memory_mib;
                let records: Vec<(String, String)> = state
                    .published
                    .iter()
                    .filter(|(_, id)| *id == instance_id)
                    .cloned()
                    .collect();
                state
                    .published
                    .retain(|(_, id)| *id != instance_id);
                (stopped_instance, records)
            };
            for (vnf_type, record_instance) in records {
                // The record may already be gone if discovery was reset.
                let _ = self.discovery.unpublish(&vnf_type, &record_instance);
            }
            let zone = stopped_instance.zone.clone();
            engine.mark("vnf-stopped", format!("{zone}/{instance_id}"));
            if let Some(hook) = self.inner.borrow().on_stopped.clone() {
                hook(engine, &stopped_instance);
            }
        }
    }

    /// Store a pushed metric sample, tagged with this agent's zone. Samples
    /// for instances this agent does not manage are counted and rejected.
    pub fn ingest_metric(&self, sample: MeasuredResponse) -> Result<(), AgentError> {
        let mut state = self.inner.borrow_mut();
        if !state.instances.contains_key(&sample.instance_id) {
            state.rejected_metrics += 1;
            return Err(AgentError::UnknownInstance(sample.instance_id));
        }
        let stored = StoredSample {
            zone: state.zone_id.clone(),
            instance_id: sample.instance_id.clone(),
            sample,
        };
        state.metrics.push(stored);
        Ok(())
    }

    pub fn metrics(&self) -> Vec<StoredSample> {
        self.inner.borrow().metrics.clone()
    }

    pub fn metric_count(&self) -> usize {
        self.inner.borrow().metrics.len()
    }

    pub fn rejected_metric_count(&self) -> u64 {
        self.inner.borrow().rejected_metrics
    }

    /// Checks the resource-conservation invariant: allocated equals the sum
    /// over live instances.
    pub fn resources_consistent(&self) -> bool {
        let state = self.inner.borrow();
        let mut cpu = 0u32;
        let mut memory = 0u64;
        for instance in state.instances.values() {
            if matches!(
                instance.state,
                InstanceState::Creating | InstanceState::Configuring | InstanceState::Running
            ) {
                cpu += instance.resources.cpu;
                memory += instance.resources.memory_mib;
            }
        }
        state.resources.allocated.cpu == cpu && state.resources.allocated.memory_mib == memory
    }
}
