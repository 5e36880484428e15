//! Experiment configuration: the run matrix, timing, seeds, and the
//! service-time table, loadable from a TOML file.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::Setup;
use crate::diameter::Command;
use crate::hss::{CommandCost, ServiceTimeTable};
use crate::sim::SimSpan;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub setups: Vec<Setup>,
    pub r_levels: Vec<f64>,
    pub repetitions: u32,
    pub duration_s: u64,
    pub seed: u64,
    pub warmup_fraction: f64,
    pub grubbs_alpha: f64,
    pub proxy_delay_ms: f64,
    pub service_jitter: bool,
    pub fe_blocks_on_db: bool,
    pub calibration_window_s: u64,
    pub calibration_tolerance: f64,
    pub table: ServiceTimeTable,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            setups: vec![Setup::Full, Setup::Split],
            r_levels: vec![0.25, 0.50, 0.70, 0.90],
            repetitions: 3,
            duration_s: 60,
            seed: 214,
            warmup_fraction: 0.10,
            grubbs_alpha: 0.05,
            proxy_delay_ms: 0.0,
            service_jitter: false,
            fe_blocks_on_db: true,
            calibration_window_s: 120,
            calibration_tolerance: 0.01,
            table: ServiceTimeTable::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file is not valid: {0}")]
    Parse(String),
    #[error("config invariant broken: {0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    setups: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    repetitions: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duration_s: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warmup_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grubbs_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    proxy_delay_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    service_jitter: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fe_blocks_on_db: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    calibration_window_s: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    calibration_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    service_times: BTreeMap<String, CommandCost>,
}

impl ExperimentConfig {
    /// Parse a config document; absent keys keep their defaults.
    pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let doc: ConfigDoc = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut config = ExperimentConfig::default();
        if let Some(setups) = doc.setups {
            config.setups = setups
                .iter()
                .map(|s| Setup::from_str(s).map_err(ConfigError::Invalid))
                .collect::<Result<_, _>>()?;
        }
        if let Some(r_levels) = doc.r_levels {
            config.r_levels = r_levels;
        }
        if let Some(repetitions) = doc.repetitions {
            config.repetitions = repetitions;
        }
        if let Some(duration_s) = doc.duration_s {
            config.duration_s = duration_s;
        }
        if let Some(seed) = doc.seed {
            config.seed = seed;
        }
        if let Some(warmup) = doc.warmup_fraction {
            config.warmup_fraction = warmup;
        }
        if let Some(alpha) = doc.grubbs_alpha {
            config.grubbs_alpha = alpha;
        }
        if let Some(delay) = doc.proxy_delay_ms {
            config.proxy_delay_ms = delay;
        }
        if let Some(jitter) = doc.service_jitter {
            config.service_jitter = jitter;
        }
        if let Some(blocks) = doc.fe_blocks_on_db {
            config.fe_blocks_on_db = blocks;
        }
        if let Some(window) = doc.calibration_window_s {
            config.calibration_window_s = window;
        }
        if let Some(tolerance) = doc.calibration_tolerance {
            config.calibration_tolerance = tolerance;
        }
        for (name, cost) in doc.service_times {
            let command = Command::from_str(&name).map_err(ConfigError::Invalid)?;
            config.table.set_cost(command, cost);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn serialize(&self) -> String {
        let doc = ConfigDoc {
            setups: Some(self.setups.iter().map(|s| s.to_string()).collect()),
            r_levels: Some(self.r_levels.clone()),
            repetitions: Some(self.repetitions),
            duration_s: Some(self.duration_s),
            seed: Some(self.seed),
            warmup_fraction: Some(self.warmup_fraction),
            grubbs_alpha: Some(self.grubbs_alpha),
            proxy_delay_ms: Some(self.proxy_delay_ms),
            service_jitter: Some(self.service_jitter),
            fe_blocks_on_db: Some(self.fe_blocks_on_db),
            calibration_window_s: Some(self.calibration_window_s),
            calibration_tolerance: Some(self.calibration_tolerance),
            service_times: self
                .table
                .costs()
                .iter()
                .map(|(command, cost)| (command.to_string(), *cost))
                .collect(),
        };
        toml::to_string(&doc).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.setups.is_empty() {
            return Err(ConfigError::Invalid("at least one setup required".into()));
        }
        for &r in &self.r_levels {
            if !(r > 0.0 && r < 1.0) {
                return Err(ConfigError::Invalid(format!(
                    "utilization level must lie strictly between 0 and 1, got {r}"
                )));
            }
        }
        if self.repetitions < 1 {
            return Err(ConfigError::Invalid("repetitions must be >= 1".into()));
        }
        if self.duration_s == 0 {
            return Err(ConfigError::Invalid("duration must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.warmup_fraction) {
            return Err(ConfigError::Invalid(format!(
                "warmup fraction must lie in [0, 0.5), got {}",
                self.warmup_fraction
            )));
        }
        if !(self.grubbs_alpha > 0.0 && self.grubbs_alpha <= 0.2) {
            return Err(ConfigError::Invalid(format!(
                "grubbs alpha must lie in (0, 0.2], got {}",
                self.grubbs_alpha
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> SimSpan {
        SimSpan::from_secs(self.duration_s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_the_reference_matrix() {
        let config = ExperimentConfig::default();
        assert_eq!(config.setups, vec![Setup::Full, Setup::Split]);
        assert_eq!(config.r_levels, vec![0.25, 0.50, 0.70, 0.90]);
        assert_eq!(config.repetitions, 3);
        assert_eq!(config.duration_s, 60);
        assert!(config.validate().is_ok());
    }

    #[test]
    fn round_trips_through_toml() {
        let config = ExperimentConfig::default();
        let text = config.serialize();
        let reparsed = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(reparsed, config);
    }

    #[test]
    fn partial_documents_keep_defaults() {
        let config = ExperimentConfig::parse("seed = 7\nr_levels = [0.9]\n").unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.r_levels, vec![0.9]);
        assert_eq!(config.repetitions, 3);
    }

    #[test]
    fn service_time_overrides_apply() {
        let text = "[service_times.ULR]\ncpu_ms = 4.0\ndb_ms = 120.0\ndb_contention_factor = 0.3\n";
        let config = ExperimentConfig::parse(text).unwrap();
        let cost = config.table.cost(Command::Ulr);
        assert_eq!(cost.db_ms, 120.0);
        assert_eq!(cost.db_contention_factor, 0.3);
        // Untouched commands keep the default table.
        assert_eq!(config.table.cost(Command::Air).cpu_ms, 3.0);
    }

    #[test]
    fn invalid_r_level_is_rejected() {
        assert!(ExperimentConfig::parse("r_levels = [1.5]").is_err());
        assert!(ExperimentConfig::parse("r_levels = [0.0]").is_err());
    }

    #[test]
    fn unknown_setup_is_rejected() {
        assert!(ExperimentConfig::parse("setups = [\"hybrid\"]").is_err());
    }
}
