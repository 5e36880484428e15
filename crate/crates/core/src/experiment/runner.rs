//! End-to-end experiment execution: calibrate arrival rates per interface
//! and utilization level, deploy the scenario through the orchestrator,
//! generate traffic, audit conservation, and collect response samples.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use thiserror::Error;

use crate::analysis::{ResponseSample, Setup};
use crate::diameter::Application;
use crate::hss::{
    calibrate_arrival_rate, CalibrationError, CalibrationSettings, FrontEndConfig,
};
use crate::orchestrator::PlanStatus;
use crate::sim::{Engine, SimSpan};
use crate::workload::{
    reference_mix, spawn_generator, ArrivalProcess, AuditViolation, GenerationMode,
    TrafficProfile,
};

use super::config::ExperimentConfig;
use super::scenario::{build_scenario, Scenario, ScenarioParams};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("calibration for {interface} at R={r} failed: {source}")]
    Calibration {
        interface: Application,
        r: f64,
        source: CalibrationError,
    },
    #[error("deployment of '{ns}' did not complete: {detail}")]
    Deployment { ns: String, detail: String },
    #[error("conservation audit failed: {}", violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Conservation { violations: Vec<AuditViolation> },
}

/// One cell of the run matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub setup: Setup,
    pub r: f64,
    pub rep: u32,
}

impl RunSpec {
    pub fn run_id(&self) -> String {
        format!("{}-r{:.2}-rep{}", self.setup, self.r, self.rep)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub spec: RunSpec,
    pub run_id: String,
    pub seed: u64,
    pub duration_s: u64,
    pub rates: BTreeMap<Application, f64>,
    /// Post-warm-up samples, ordered by completion then message id.
    pub samples: Vec<ResponseSample>,
    pub generated: u64,
    pub audit_ok: bool,
}

/// Calibrated arrival rates per (interface, utilization level).
pub type RateTable = BTreeMap<(Application, u64), f64>;

fn r_key(r: f64) -> u64 {
    (r * 1_000.0).round() as u64
}

/// Calibrate every (interface, R) pair of the config, reusing nothing across
/// pairs; results are deterministic in the config seed.
pub fn calibrate_rates(config: &ExperimentConfig) -> Result<RateTable, RunError> {
    let settings = CalibrationSettings {
        window: SimSpan::from_secs(config.calibration_window_s),
        warmup_fraction: config.warmup_fraction,
        tolerance: config.calibration_tolerance,
        seed: config.seed,
        max_iterations: 60,
    };
    let mut rates = RateTable::new();
    for &r in &config.r_levels {
        for interface in [Application::S6a, Application::Cx] {
            let mix = reference_mix(interface);
            let result = calibrate_arrival_rate(r, &config.table, &mix, &settings)
                .map_err(|source| RunError::Calibration { interface, r, source })?;
            rates.insert((interface, r_key(r)), result.rate_per_s);
        }
    }
    Ok(rates)
}

/// Execute one run: deploy, generate traffic for the configured duration,
/// drain, audit, and collect samples.
pub fn run_single(
    config: &ExperimentConfig,
    rates: &RateTable,
    spec: RunSpec,
) -> Result<RunResult, RunError> {
    let run_id = spec.run_id();
    let mut engine = Engine::new();
    let params = ScenarioParams {
        table: Rc::new(config.table.clone()),
        fe_config: FrontEndConfig {
            cpu_capacity: 1,
            blocks_on_db: config.fe_blocks_on_db,
            service_jitter: config.service_jitter,
            jitter_seed: config.seed ^ (spec.rep as u64) << 32 ^ r_key(spec.r),
        },
        proxy_delay: SimSpan::from_millis_f64(config.proxy_delay_ms),
        udr_servers: crate::hss::Udr::DEFAULT_SERVER_COUNT,
    };
    let scenario = Rc::new(build_scenario(spec.setup, params));

    // Control plane first: decompose, configure discovery, deploy, settle.
    let ns = scenario.template.name.clone();
    let deployment_error = |detail: String| RunError::Deployment { ns: ns.clone(), detail };
    let plan = scenario
        .orchestrator
        .decompose(&scenario.template, &scenario.placement)
        .map_err(|e| deployment_error(e.to_string()))?;
    scenario
        .orchestrator
        .configure_discovery(&plan)
        .map_err(|e| deployment_error(e.to_string()))?;
    scenario
        .orchestrator
        .deploy(&mut engine, plan)
        .map_err(|e| deployment_error(e.to_string()))?;
    engine.run_to_completion();
    let status = scenario.orchestrator.plan_status(&ns);
    if status != Some(PlanStatus::Deployed) {
        return Err(deployment_error(format!("status {status:?}")));
    }

    // Data plane: both interfaces generate over the same horizon.
    let t0 = engine.now();
    let message_ids = Rc::new(RefCell::new(0_u64));
    let deliver = Scenario::deliverer(&scenario);
    for interface in [Application::S6a, Application::Cx] {
        let rate = rates[&(interface, r_key(spec.r))];
        let profile = TrafficProfile {
            interface,
            mix: reference_mix(interface),
            mode: GenerationMode::Rate {
                per_s: rate,
                duration: config.duration(),
            },
            arrival_process: ArrivalProcess::Poisson,
            seed: config.seed,
            stream_tag: format!("{interface}-{run_id}"),
        };
        spawn_generator(
            &mut engine,
            &profile,
            t0,
            message_ids.clone(),
            scenario.ledger.clone(),
            deliver.clone(),
        );
    }
    engine.run_to_completion();

    let audit = scenario.ledger.audit(&scenario.in_flight());
    let audit_ok = audit.is_ok();
    if let Err(violations) = audit {
        return Err(RunError::Conservation { violations });
    }

    Ok(RunResult {
        samples: collect_samples(&scenario, &run_id, spec, config.warmup_fraction),
        run_id,
        spec,
        seed: config.seed,
        duration_s: config.duration_s,
        rates: [Application::S6a, Application::Cx]
            .into_iter()
            .map(|interface| (interface, rates[&(interface, r_key(spec.r))]))
            .collect(),
        generated: scenario.ledger.total_generated(),
        audit_ok,
    })
}

/// Gather agent metrics into response samples, dropping each interface's
/// leading warm-up fraction.
fn collect_samples(
    scenario: &Scenario,
    run_id: &str,
    spec: RunSpec,
    warmup_fraction: f64,
) -> Vec<ResponseSample> {
    let mut stored: Vec<crate::agent::StoredSample> = Vec::new();
    for zone in scenario.orchestrator.zone_ids() {
        let agent = scenario.orchestrator.agent(&zone).expect("registered zone");
        stored.extend(agent.metrics());
    }
    stored.sort_by_key(|s| (s.sample.completed_at, s.sample.message_id));

    let mut samples = Vec::with_capacity(stored.len());
    for interface in [Application::S6a, Application::Cx] {
        let of_interface: Vec<&crate::agent::StoredSample> = stored
            .iter()
            .filter(|s| s.sample.interface == interface)
            .collect();
        let skip = (of_interface.len() as f64 * warmup_fraction).floor() as usize;
        for stored_sample in of_interface.into_iter().skip(skip) {
            samples.push(ResponseSample {
                message_id: stored_sample.sample.message_id,
                interface: stored_sample.sample.interface,
                command: stored_sample.sample.command,
                response_time_ms: stored_sample.sample.response_time_ms(),
                run_id: run_id.to_string(),
                setup: spec.setup,
                target_utilization: spec.r,
            });
        }
    }
    samples.sort_by(|a, b| {
        a.message_id.cmp(&b.message_id)
    });
    samples
}

/// Execute the full matrix in a deterministic order.
pub fn run_matrix(config: &ExperimentConfig) -> Result<(RateTable, Vec<RunResult>), RunError> {
    let rates = calibrate_rates(config)?;
    let mut results = Vec::new();
    for &setup in &config.setups {
        for &r in &config.r_levels {
            for rep in 1..=config.repetitions {
                results.push(run_single(config, &rates, RunSpec { setup, r, rep })?);
            }
        }
    }
    Ok((rates, results))
}

/// Deploy a scenario with tracing enabled and return the settled engine,
/// for inspecting the causal order of the deployment.
pub fn deployment_trace(setup: Setup) -> (Engine, Rc<Scenario>) {
    let mut engine = Engine::new();
    engine.enable_trace();
    let scenario = Rc::new(build_scenario(setup, ScenarioParams::default()));
    let plan = scenario
        .orchestrator
        .decompose(&scenario.template, &scenario.placement)
        .expect("reference templates decompose");
    scenario
        .orchestrator
        .configure_discovery(&plan)
        .expect("reference rules are conflict-free");
    scenario
        .orchestrator
        .deploy(&mut engine, plan)
        .expect("zones are registered");
    engine.run_to_completion();
    (engine, scenario)
}
