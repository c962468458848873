use serde::{Deserialize, Serialize};

use super::intersection::{IntersectionEnv, IntersectionParams};
use super::scenarios::ParticleEnv;
use super::{EnvError, MultiAgentEnv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    CoopComm,
    CoopNav,
    PredatorPrey,
    Intersection,
}

impl ScenarioId {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CoopComm => "coop_comm",
            Self::CoopNav => "coop_nav",
            Self::PredatorPrey => "predator_prey",
            Self::Intersection => "intersection",
        }
    }

    pub fn default_dt(self) -> f64 {
        match self {
            Self::CoopComm | Self::Intersection => 0.1,
            Self::CoopNav | Self::PredatorPrey => 0.2,
        }
    }

    pub fn default_episode_length(self) -> usize {
        match self {
            Self::Intersection => 100,
            _ => 25,
        }
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, EnvError> {
        match s {
            "coop_comm" => Ok(Self::CoopComm),
            "coop_nav" => Ok(Self::CoopNav),
            "predator_prey" => Ok(Self::PredatorPrey),
            "intersection" => Ok(Self::Intersection),
            other => Err(EnvError::Config(format!(
                "unknown scenario {other:?} (expected coop_comm, coop_nav, predator_prey or intersection)"
            ))),
        }
    }
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether the predator-prey prey follows the scripted flee rule or is a
/// learning agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreyMode {
    #[default]
    Scripted,
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardMagnitudes {
    /// Paid to each predator (and charged to the prey) per contact.
    pub touch: f64,
    /// Charged to each agent of an overlapping navigator pair.
    pub collision: f64,
    pub success: f64,
    pub crash: f64,
    pub step_penalty: f64,
}

impl Default for RewardMagnitudes {
    fn default() -> Self {
        Self {
            touch: 10.0,
            collision: 1.0,
            success: 10.0,
            crash: 10.0,
            step_penalty: 0.01,
        }
    }
}

/// Declarative scenario description. Unset fields take the scenario's
/// defaults; [`ScenarioConfig::resolved`] materializes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    /// Learning agents; checked against the scenario roster when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_agents: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode_length: Option<usize>,
    /// One entry per agent, or a single entry applied to all.
    #[serde(default)]
    pub delay_steps: Vec<usize>,
    #[serde(default)]
    pub prey: PreyMode,
    #[serde(default)]
    pub rewards: RewardMagnitudes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intersection: Option<IntersectionParams>,
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioId) -> Self {
        Self {
            scenario,
            num_agents: None,
            dt: None,
            episode_length: None,
            delay_steps: Vec::new(),
            prey: PreyMode::default(),
            rewards: RewardMagnitudes::default(),
            intersection: None,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or_else(|| self.scenario.default_dt())
    }

    pub fn episode_length(&self) -> usize {
        self.episode_length.unwrap_or_else(|| self.scenario.default_episode_length())
    }

    /// Per-agent delay steps for `num_agents` agents.
    pub fn delays_for(&self, num_agents: usize) -> Result<Vec<usize>, EnvError> {
        match self.delay_steps.len() {
            0 => Ok(vec![0; num_agents]),
            1 => Ok(vec![self.delay_steps[0]; num_agents]),
            n if n == num_agents => Ok(self.delay_steps.clone()),
            n => Err(EnvError::Config(format!("{n} delay steps for {num_agents} agents"))),
        }
    }

    /// Copy with every default filled in, validated by building the world.
    pub fn resolved(&self) -> Result<Self, EnvError> {
        let env = make_env(self)?;
        let n = env.num_agents();
        let mut out = self.clone();
        out.num_agents = Some(n);
        out.dt = Some(self.dt());
        out.episode_length = Some(self.episode_length());
        out.delay_steps = self.delays_for(n)?;
        if self.scenario == ScenarioId::Intersection {
            out.intersection = Some(self.intersection.unwrap_or_default());
        }
        Ok(out)
    }
}

/// Builds the world a config describes.
pub fn make_env(config: &ScenarioConfig) -> Result<Box<dyn MultiAgentEnv + Send>, EnvError> {
    let dt = config.dt();
    let t = config.episode_length();
    let env: Box<dyn MultiAgentEnv + Send> = match config.scenario {
        ScenarioId::Intersection => Box::new(IntersectionEnv::new(
            config.intersection.unwrap_or_default(),
            dt,
            t,
            config.rewards,
        )?),
        particle => Box::new(ParticleEnv::new(particle, dt, t, config.rewards, config.prey)?),
    };
    if let Some(n) = config.num_agents {
        if n != env.num_agents() {
            return Err(EnvError::Config(format!(
                "{} has {} learning agents, config says {n}",
                config.scenario,
                env.num_agents()
            )));
        }
    }
    config.delays_for(env.num_agents())?;
    Ok(env)
}
