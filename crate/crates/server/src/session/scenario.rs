use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gridops_core::clock::deserialize_clock;
use gridops_core::grid::{parse_case_json, NetworkCase};
use gridops_core::powerflow::{EngineConfig, GmdConfig, LoadProfile, ScoreWeights};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gateway::{Role, RoleTable};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("case: {0}")]
    Case(#[from] gridops_core::grid::CaseError),
    #[error("scenario names no case file and none was given")]
    NoCase,
}

fn schema(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Schema { path: path.into(), message: message.into() }
}

fn default_timescale() -> f64 {
    60.0
}

fn default_dt() -> f64 {
    2.0
}

fn default_beta() -> f64 {
    1000.0
}

fn default_agc_gain() -> f64 {
    0.5
}

/// Everything needed to run one exercise besides the network itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Case file, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    #[serde(deserialize_with = "deserialize_clock")]
    pub sim_start: f64,
    /// Simulated seconds to run.
    pub sim_span: f64,
    /// Simulated seconds per wall second.
    #[serde(default = "default_timescale")]
    pub timescale: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub load_profile: LoadProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gmd_event: Option<GmdConfig>,
    #[serde(default)]
    pub roles: Vec<Role>,
    /// Access token to role name.
    #[serde(default)]
    pub tokens: BTreeMap<String, String>,
    #[serde(default = "default_beta")]
    pub beta_sys: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_agc_gain")]
    pub agc_gain: f64,
    #[serde(default)]
    pub weights: ScoreWeights,
    /// Buses streamed on the phasor side channel; empty picks the first few.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phasor_buses: Vec<u32>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| schema(&e.path().to_string(), e.inner().to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.sim_span > 0.0 && self.sim_span.is_finite()) {
            return Err(schema("sim_span", "must be positive"));
        }
        if !(self.timescale > 0.0 && self.timescale.is_finite()) {
            return Err(schema("timescale", "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(schema("dt", "must be positive"));
        }
        let steps = self.sim_span / self.dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(schema("sim_span", format!("must be a whole number of {} s steps", self.dt)));
        }
        self.load_profile.validate().map_err(|m| schema("load_profile", m))?;
        if let Some(g) = &self.gmd_event {
            g.event.validate().map_err(|m| schema("gmd_event.event", m))?;
        }
        let roles = RoleTable::new(&self.roles).map_err(|e| schema("roles", e.to_string()))?;
        for (token, role) in &self.tokens {
            if roles.get(role).is_none() {
                return Err(schema(&format!("tokens.{token}"), format!("unknown role `{role}`")));
            }
        }
        if !(self.beta_sys > 0.0) {
            return Err(schema("beta_sys", "must be positive"));
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.sim_span / self.dt).round() as u64
    }

    pub fn sim_end(&self) -> f64 {
        self.sim_start + self.steps() as f64 * self.dt
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            weights: self.weights,
            beta_sys: self.beta_sys,
            profile: self.load_profile.clone(),
            rng_seed: self.rng_seed,
            agc_gain: self.agc_gain,
            gmd: self.gmd_event.clone(),
            ..EngineConfig::default()
        }
    }

    pub fn role_table(&self) -> RoleTable {
        RoleTable::new(&self.roles).expect("validated scenario")
    }

    /// Wall seconds per step at `speed` times the scenario pace.
    pub fn wall_period(&self, speed: f64) -> f64 {
        self.dt / (self.timescale * speed)
    }
}

/// Reads a scenario and its case. An explicit `case_path` wins over the
/// scenario's own reference.
pub fn load_scenario(path: &Path, case_path: Option<&Path>) -> Result<(Scenario, NetworkCase), ScenarioError> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|source| ScenarioError::Io { path: p.into(), source });
    let scenario = Scenario::parse(&read(path)?)?;
    let case_file = match (case_path, &scenario.case) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(rel)) => path.parent().unwrap_or(Path::new(".")).join(rel),
        (None, None) => return Err(ScenarioError::NoCase),
    };
    let case = parse_case_json(&read(&case_file)?)?;
    Ok((scenario, case))
}

/// SHA-256 over the canonical JSON of the scenario and the case.
pub fn scenario_digest(scenario: &Scenario, case: &NetworkCase) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(scenario).expect("scenario serializes"));
    h.update([0u8]);
    h.update(serde_json::to_vec(case).expect("case serializes"));
    hex::encode(h.finalize())
}
