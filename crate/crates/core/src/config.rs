//! Harness configuration, loaded from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nieon::{ManeuverLimits, ResponseTimeModel};
use crate::policies::AebConfig;
use crate::scenario::{RoadUserGroup, SafetyGroupRegistry};
use crate::severity::SeverityConfig;
use crate::sim::{LatencyConfig, SimConfig, VehicleLimits, DEFAULT_STEP, MAX_STEP};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub step: f64,
    /// Observation jitter of up to this many steps either way; 0 disables it.
    pub jitter_steps: u32,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            jitter_steps: 0,
        }
    }
}

/// Response-time models per road-user group plus the shared maneuver limits.
/// The default coefficients are placeholders, not calibrated values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NieonSection {
    pub vehicle: ResponseTimeModel,
    pub vru: ResponseTimeModel,
    pub maneuver: ManeuverLimits,
}

impl Default for NieonSection {
    fn default() -> Self {
        Self {
            vehicle: ResponseTimeModel {
                intercept: 0.6,
                slope: 0.6,
                floor: 0.25,
            },
            vru: ResponseTimeModel {
                intercept: 0.4,
                slope: 0.6,
                floor: 0.25,
            },
            maneuver: ManeuverLimits::default(),
        }
    }
}

impl NieonSection {
    pub fn model_for(&self, group: RoadUserGroup) -> &ResponseTimeModel {
        match group {
            RoadUserGroup::Vehicle => &self.vehicle,
            RoadUserGroup::Vru => &self.vru,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceptanceSection {
    /// ADS counts may exceed reference counts by this many and still pass.
    pub slack: u32,
}

impl Default for AcceptanceSection {
    fn default() -> Self {
        Self { slack: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZTestSection {
    pub alpha: f64,
    /// Intercept shifts, s.
    pub deltas: Vec<f64>,
}

impl Default for ZTestSection {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            deltas: vec![-0.2, 0.0, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Worker threads; 0 uses every core.
    pub parallelism: usize,
    pub seed: u64,
    pub database: Option<PathBuf>,
    pub policy: String,
    /// Runs for the repeatability analysis.
    pub repeat_runs: usize,
    /// Jitter used by the repeatability analysis.
    pub repeat_jitter_steps: u32,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            parallelism: 0,
            seed: 0,
            database: None,
            policy: "aeb".into(),
            repeat_runs: 10,
            repeat_jitter_steps: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupsSection {
    /// Road-user group that motorcyclist safety groups roll up into.
    pub motorcyclist: RoadUserGroup,
}

impl Default for GroupsSection {
    fn default() -> Self {
        Self {
            motorcyclist: RoadUserGroup::Vehicle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub sim: SimSection,
    pub latency: LatencyConfig,
    pub limits: VehicleLimits,
    pub nieon: NieonSection,
    pub severity: SeverityConfig,
    pub acceptance: AcceptanceSection,
    pub ztest: ZTestSection,
    pub run: RunSection,
    pub aeb: AebConfig,
    pub groups: GroupsSection,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            perception_delay: 0.1,
            planning_delay: 0.05,
            actuation_delay: 0.05,
        }
    }
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            sim: SimSection::default(),
            latency: LatencyConfig::default(),
            limits: VehicleLimits::default(),
            nieon: NieonSection::default(),
            severity: SeverityConfig::default(),
            acceptance: AcceptanceSection::default(),
            ztest: ZTestSection::default(),
            run: RunSection::default(),
            aeb: AebConfig::default(),
            groups: GroupsSection::default(),
        }
    }
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: HarnessConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            step: self.sim.step,
            limits: self.limits,
            jitter_steps: self.sim.jitter_steps,
        }
    }

    pub fn registry(&self) -> SafetyGroupRegistry {
        SafetyGroupRegistry::bundled(self.groups.motorcyclist)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(self.sim.step > 0.0 && self.sim.step <= MAX_STEP) {
            return invalid(format!(
                "sim.step {} must lie in (0, {MAX_STEP}]",
                self.sim.step
            ));
        }
        if let Err(e) = self.latency.steps(self.sim.step) {
            return invalid(e.to_string());
        }
        if !(self.limits.max_brake > 0.0 && self.limits.max_accel >= 0.0) {
            return invalid("limits must be positive".into());
        }
        for m in [&self.nieon.vehicle, &self.nieon.vru] {
            m.validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        self.nieon
            .maneuver
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.nieon.vru.intercept > self.nieon.vehicle.intercept {
            return invalid(format!(
                "VRU intercept {} exceeds the vehicle intercept {}",
                self.nieon.vru.intercept, self.nieon.vehicle.intercept
            ));
        }
        if !self.severity.thresholds.is_valid() {
            return invalid("serious-injury thresholds must lie in (0, 1]".into());
        }
        if !(self.severity.restitution >= 0.0 && self.severity.restitution <= 1.0) {
            return invalid("restitution must lie in [0, 1]".into());
        }
        let m = &self.severity.masses;
        if !(m.ego > 0.0 && m.passenger_vehicle > 0.0 && m.heavy_vehicle > 0.0) {
            return invalid("masses must be positive".into());
        }
        if !(self.ztest.alpha > 0.0 && self.ztest.alpha < 1.0) {
            return invalid("ztest.alpha must lie in (0, 1)".into());
        }
        if self.ztest.deltas.iter().any(|d| !d.is_finite()) {
            return invalid("ztest.deltas must be finite".into());
        }
        if !(self.aeb.ttc_threshold > 0.0
            && self.aeb.horizon_step > 0.0
            && self.aeb.jerk_limit > 0.0)
        {
            return invalid("aeb parameters must be positive".into());
        }
        Ok(())
    }
}
