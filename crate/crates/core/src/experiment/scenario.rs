//! Scenario assembly: templates, placements, zones, and the data-plane
//! wiring for the two HSS deployment variants.
//!
//! In the split variant the S6a front end and the repository live in zone-1
//! and the Cx front end in zone-2, one single-CPU container per interface.
//! In the full variant two single-CPU containers each serve both interfaces
//! behind the round-robin proxy. The repository is over-provisioned and the
//! proxy adds no delay unless configured to.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use crate::agent::{Agent, VnfInstance};
use crate::analysis::Setup;
use crate::diameter::{Application, BackendRegistration, DiameterMessage, DiameterRouter};
use crate::discovery::Discovery;
use crate::hss::{FrontEnd, FrontEndConfig, ServiceTimeTable, Udr};
use crate::orchestrator::{Orchestrator, PlacementMap, ZoneConfig};
use crate::sim::{Engine, SimSpan};
use crate::template::{DeploymentKind, NodeTemplate, Relationship, Resources, ServiceTemplate};
use crate::workload::Ledger;

/// The diameter applications a VNF type serves, if it is a front end.
pub fn applications_for(vnf_type: &str) -> Option<Vec<Application>> {
    match vnf_type {
        "S6a" => Some(vec![Application::S6a]),
        "Cx" => Some(vec![Application::Cx]),
        "HSS-FE" => Some(vec![Application::S6a, Application::Cx]),
        _ => None,
    }
}

/// The service template of the split deployment: one VNF per interface plus
/// the repository.
pub fn split_template() -> ServiceTemplate {
    ServiceTemplate {
        name: "hssaas".to_string(),
        nodes: vec![
            NodeTemplate::vnf(
                "S6a",
                "S6a",
                DeploymentKind::Container,
                Resources { cpu: 1, memory_mib: 1024 },
            ),
            NodeTemplate::vnf(
                "Cx",
                "Cx",
                DeploymentKind::Container,
                Resources { cpu: 1, memory_mib: 1024 },
            ),
            NodeTemplate::vnf(
                "UDR",
                "UDR",
                DeploymentKind::Vm,
                Resources { cpu: 16, memory_mib: 32768 },
            ),
        ],
        relationships: vec![
            Relationship::connects_to("S6a", "UDR"),
            Relationship::connects_to("Cx", "UDR"),
        ],
    }
}

pub fn split_placement() -> PlacementMap {
    PlacementMap::new([
        ("S6a".to_string(), "zone-1".to_string()),
        ("UDR".to_string(), "zone-1".to_string()),
        ("Cx".to_string(), "zone-2".to_string()),
    ])
}

/// The full deployment: two dual-interface front ends plus the repository,
/// all in one zone.
pub fn full_template() -> ServiceTemplate {
    ServiceTemplate {
        name: "hssaas-full".to_string(),
        nodes: vec![
            NodeTemplate::vnf(
                "fe-1",
                "HSS-FE",
                DeploymentKind::Container,
                Resources { cpu: 1, memory_mib: 1024 },
            ),
            NodeTemplate::vnf(
                "fe-2",
                "HSS-FE",
                DeploymentKind::Container,
                Resources { cpu: 1, memory_mib: 1024 },
            ),
            NodeTemplate::vnf(
                "UDR",
                "UDR",
                DeploymentKind::Vm,
                Resources { cpu: 16, memory_mib: 32768 },
            ),
        ],
        relationships: vec![
            Relationship::connects_to("fe-1", "UDR"),
            Relationship::connects_to("fe-2", "UDR"),
        ],
    }
}

pub fn full_placement() -> PlacementMap {
    PlacementMap::new([
        ("fe-1".to_string(), "zone-1".to_string()),
        ("fe-2".to_string(), "zone-1".to_string()),
        ("UDR".to_string(), "zone-1".to_string()),
    ])
}

/// Everything a run needs besides the engine.
pub struct Scenario {
    pub setup: Setup,
    pub template: ServiceTemplate,
    pub placement: PlacementMap,
    pub orchestrator: Orchestrator,
    pub discovery: Discovery,
    pub router: Rc<RefCell<DiameterRouter>>,
    pub udr: Udr,
    pub frontends: Rc<RefCell<BTreeMap<String, FrontEnd>>>,
    pub ledger: Ledger,
    pub proxy_delay: SimSpan,
}

impl Scenario {
    /// Live (queued or in-service) message counts per cell across all
    /// front ends, for the conservation audit.
    pub fn in_flight(&self) -> BTreeMap<(Application, crate::diameter::Command), u64> {
        let mut live = BTreeMap::new();
        for fe in self.frontends.borrow().values() {
            for key in fe.live_messages() {
                *live.entry(key).or_insert(0) += 1;
            }
        }
        live
    }

    /// Deliver one message through the proxy: route by application, then
    /// hand it to the chosen backend's queue.
    pub fn deliver(&self, engine: &mut Engine, message: DiameterMessage) {
        let routed = self.router.borrow_mut().route(&message);
        match routed {
            Ok(backend_id) => {
                let fe = self.frontends.borrow()[&backend_id].clone();
                if self.proxy_delay.is_zero() {
                    fe.enqueue(engine, message);
                } else {
                    let delay = self.proxy_delay;
                    engine.schedule_in(delay, "proxy-forward", backend_id, move |engine| {
                        fe.enqueue(engine, message);
                    });
                }
            }
            Err(_) => self.ledger.count_dropped(message.command),
        }
    }

    pub fn deliverer(scenario: &Rc<Scenario>) -> Rc<dyn Fn(&mut Engine, DiameterMessage)> {
        let scenario = scenario.clone();
        Rc::new(move |engine, message| scenario.deliver(engine, message))
    }
}

pub struct ScenarioParams {
    pub table: Rc<ServiceTimeTable>,
    pub fe_config: FrontEndConfig,
    pub proxy_delay: SimSpan,
    pub udr_servers: usize,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            table: Rc::new(ServiceTimeTable::default()),
            fe_config: FrontEndConfig::default(),
            proxy_delay: SimSpan::ZERO,
            udr_servers: Udr::DEFAULT_SERVER_COUNT,
        }
    }
}

/// Assemble the control and data planes for one deployment variant.
pub fn build_scenario(setup: Setup, params: ScenarioParams) -> Scenario {
    let discovery = Discovery::new();
    let orchestrator = Orchestrator::new(discovery.clone());
    let router = Rc::new(RefCell::new(DiameterRouter::new()));
    let udr = Udr::new(params.udr_servers);
    let frontends: Rc<RefCell<BTreeMap<String, FrontEnd>>> =
        Rc::new(RefCell::new(BTreeMap::new()));
    let ledger = Ledger::new();

    let (template, placement, zones) = match setup {
        Setup::Split => (split_template(), split_placement(), vec!["zone-1", "zone-2"]),
        Setup::Full => (full_template(), full_placement(), vec!["zone-1"]),
    };

    for zone in zones {
        let capacity = Resources { cpu: 64, memory_mib: 1 << 20 };
        let agent = Agent::new(zone, capacity, discovery.clone());

        // Bring up a front-end actor and register it with the proxy whenever
        // a front-end instance reaches running.
        let hook_router = router.clone();
        let hook_frontends = frontends.clone();
        let hook_table = params.table.clone();
        let hook_udr = udr.clone();
        let hook_ledger = ledger.clone();
        let hook_agent = agent.clone();
        let fe_config = params.fe_config.clone();
        agent.on_instance_running(Rc::new(move |_engine, instance: &VnfInstance| {
            let Some(applications) = applications_for(&instance.vnf_type) else {
                return;
            };
            let fe = FrontEnd::new(
                instance.instance_id.clone(),
                applications.clone(),
                hook_table.clone(),
                hook_udr.clone(),
                fe_config.clone(),
            );
            let sink_agent = hook_agent.clone();
            let sink_ledger = hook_ledger.clone();
            fe.set_sample_sink(Rc::new(move |_, measured| {
                sink_ledger.count_completed(measured.command);
                sink_agent
                    .ingest_metric(measured)
                    .expect("front ends report to their own zone agent");
            }));
            let drop_ledger = hook_ledger.clone();
            fe.set_drop_sink(Rc::new(move |_, message| {
                drop_ledger.count_dropped(message.command);
            }));
            hook_router
                .borrow_mut()
                .register_backend(BackendRegistration {
                    backend_id: instance.instance_id.clone(),
                    applications,
                    endpoint: instance.endpoints[0].clone(),
                })
                .expect("instance ids are unique");
            hook_frontends
                .borrow_mut()
                .insert(instance.instance_id.clone(), fe);
        }));

        let stop_router = router.clone();
        let stop_frontends = frontends.clone();
        agent.on_instance_stopped(Rc::new(move |engine, instance: &VnfInstance| {
            if applications_for(&instance.vnf_type).is_none() {
                return;
            }
            if let Some(fe) = stop_frontends.borrow().get(&instance.instance_id) {
                fe.stop(engine);
            }
            let _ = stop_router
                .borrow_mut()
                .deregister_backend(&instance.instance_id);
        }));

        orchestrator
            .register_zone(
                ZoneConfig {
                    zone_id: zone.to_string(),
                    capacity,
                    location_tag: format!("site-{zone}"),
                },
                agent,
            )
            .expect("zones are registered once");
    }

    Scenario {
        setup,
        template,
        placement,
        orchestrator,
        discovery,
        router,
        udr,
        frontends,
        ledger,
        proxy_delay: params.proxy_delay,
    }
}
