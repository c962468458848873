//! Run configuration files.
//!
//! A run config is TOML with three tables:
//!
//! ```toml
//! [run]
//! seeds = [0, 1, 2, 3, 4]
//! delay_seconds = 0.2      # optional; converted to whole steps of scenario.dt
//! precision = "f32"
//!
//! [scenario]
//! scenario = "coop_nav"
//!
//! [trainer]
//! variant = "dama"
//! episodes = 10000
//! ```
//!
//! [`RunConfig::resolve`] converts the delay, fills every default and drops
//! the fields that were only inputs to that process. Resolving a resolved
//! config is the identity.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use damarl_core::envs::{ScenarioConfig, ScenarioId};
use damarl_core::marl::TrainerConfig;
use serde::{Deserialize, Serialize};

/// Largest distance from a whole number a delay/dt ratio may have.
pub const DELAY_STEP_TOLERANCE: f64 = 1e-9;

/// Seeds when neither the config nor the command line lists any.
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct RunSection {
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Uniform delay for every agent, in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_seconds: Option<f64>,
    #[serde(default)]
    pub precision: Precision,
    /// Output root; runs go to `<out>/<scenario>_<variant>_k<k>/seed_<s>/`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub trainer: TrainerConfig,
}

/// Converts a delay in seconds to whole simulation steps of length `dt`.
pub fn delay_steps(delay_seconds: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        bail!("dt = {dt} s must be positive");
    }
    if !(delay_seconds >= 0.0 && delay_seconds.is_finite()) {
        bail!("delay_seconds = {delay_seconds} must be a non-negative number of seconds");
    }
    let ratio = delay_seconds / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > DELAY_STEP_TOLERANCE {
        bail!(
            "delay_seconds = {delay_seconds} s is not a whole number of dt = {dt} s steps \
             ({ratio} steps); action delays must be an integer number of simulation steps"
        );
    }
    Ok(steps as usize)
}

impl RunConfig {
    pub fn new(scenario: ScenarioId) -> Self {
        Self {
            run: RunSection::default(),
            scenario: ScenarioConfig::new(scenario),
            trainer: TrainerConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid run config: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Every default materialized, the delay converted to steps and the
    /// seed list filled.
    pub fn resolve(&self) -> Result<Self> {
        let mut out = self.clone();
        if let Some(seconds) = out.run.delay_seconds.take() {
            if !out.scenario.delay_steps.is_empty() {
                bail!("give either run.delay_seconds or scenario.delay_steps, not both");
            }
            out.scenario.delay_steps = vec![delay_steps(seconds, out.scenario.dt())?];
        }
        out.scenario = out.scenario.resolved().map_err(|e| anyhow::anyhow!("scenario: {e}"))?;
        out.trainer.validate().map_err(|e| anyhow::anyhow!("trainer.{e}"))?;
        let n = out.scenario.num_agents.unwrap_or_default();
        out.trainer.variants_for(n).map_err(|e| anyhow::anyhow!("trainer.{e}"))?;
        if out.run.seeds.is_empty() {
            out.run.seeds = DEFAULT_SEEDS.to_vec();
        }
        Ok(out)
    }

    /// Directory name shared by every seed of this configuration.
    pub fn group_name(&self) -> String {
        let variant = match &self.trainer.agent_variants {
            Some(v) => v.iter().map(|v| v.as_str()).collect::<Vec<_>>().join("-"),
            None => self.trainer.variant.as_str().to_string(),
        };
        let delays = &self.scenario.delay_steps;
        let k = if delays.iter().all(|&d| Some(&d) == delays.first()) {
            delays.first().copied().unwrap_or(0).to_string()
        } else {
            delays.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
        };
        format!("{}_{variant}_k{k}", self.scenario.scenario)
    }

    /// The single-seed config written next to a run's metrics.
    pub fn for_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.run.seeds = vec![seed];
        c.trainer.seed = seed;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use damarl_core::marl::Variant;

    #[test]
    fn delay_conversion() {
        assert_eq!(delay_steps(0.2, 0.2).unwrap(), 1);
        assert_eq!(delay_steps(0.8, 0.1).unwrap(), 8);
        assert_eq!(delay_steps(0.0, 0.1).unwrap(), 0);
        assert_eq!(delay_steps(1.0, 0.1).unwrap(), 10);
        let err = delay_steps(0.15, 0.1).unwrap_err().to_string();
        assert!(err.contains("integer number of simulation steps"), "{err}");
        assert!(delay_steps(-0.1, 0.1).is_err());
        assert!(delay_steps(0.1, 0.0).is_err());
    }

    #[test]
    fn resolved_snapshot_round_trips() {
        let text = r#"
[run]
delay_seconds = 0.8

[scenario]
scenario = "intersection"

[trainer]
variant = "ma"
episodes = 50
"#;
        let resolved = RunConfig::from_toml(text).unwrap().resolve().unwrap();
        assert_eq!(resolved.scenario.delay_steps, vec![8; 4]);
        assert_eq!(resolved.run.seeds, DEFAULT_SEEDS.to_vec());
        assert_eq!(resolved.trainer.variant, Variant::Ma);
        let snapshot = resolved.to_toml().unwrap();
        let again = RunConfig::from_toml(&snapshot).unwrap().resolve().unwrap();
        assert_eq!(again.to_toml().unwrap(), snapshot);
        assert_eq!(again, resolved);
    }

    #[test]
    fn unknown_field_named() {
        let err = RunConfig::from_toml("[scenario]\nscenario = \"coop_nav\"\n[trainer]\ngamam = 0.9\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("gamam"), "{err}");
    }

    #[test]
    fn invalid_values_name_the_field() {
        let mut c = RunConfig::new(ScenarioId::CoopNav);
        c.trainer.gamma = 1.5;
        assert!(c.resolve().unwrap_err().to_string().contains("gamma"));
        let mut c = RunConfig::new(ScenarioId::CoopNav);
        c.trainer.batch_size = c.trainer.buffer_capacity + 1;
        assert!(c.resolve().unwrap_err().to_string().contains("batch_size"));
    }

    #[test]
    fn group_names() {
        let mut c = RunConfig::new(ScenarioId::CoopNav);
        c.scenario.delay_steps = vec![1];
        assert_eq!(c.resolve().unwrap().group_name(), "coop_nav_dama_k1");
        let mut c = RunConfig::new(ScenarioId::PredatorPrey);
        c.scenario.prey = damarl_core::envs::PreyMode::Learned;
        c.scenario.delay_steps = vec![1, 1, 1, 0];
        c.trainer.agent_variants = Some(vec![Variant::Dama, Variant::Dama, Variant::Dama, Variant::Ddpg]);
        assert_eq!(c.resolve().unwrap().group_name(), "predator_prey_dama-dama-dama-ddpg_k1-1-1-0");
    }
}
