//! Evaluation worlds behind one multi-agent stepping interface: a 2D particle
//! world with three scenarios and a four-vehicle unsignalized intersection.

mod config;
mod intersection;
mod particle;
mod scenarios;
mod trajectory;

pub use config::{make_env, PreyMode, RewardMagnitudes, ScenarioConfig, ScenarioId};
pub use intersection::{IntersectionEnv, IntersectionParams, Route, Vehicle};
pub use particle::{integrate, Entity, ParticleWorld, CONTACT_MARGIN, CONTACT_STIFFNESS, DAMPING};
pub use scenarios::{ParticleEnv, Role};
pub use trajectory::{TrajectoryRecord, TrajectoryWriter};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("agent {agent} sent a non-finite action")]
    NonFiniteAction { agent: usize },
    #[error("step called on a finished episode")]
    EpisodeOver,
}

/// Layout of one agent's continuous action vector: `movement` force or
/// acceleration components in `[-1, 1]`, followed by `message` symbol
/// weights (a one-hot or relaxed one-hot vector).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub movement: usize,
    pub message: usize,
}

impl ActionSpace {
    pub fn dim(&self) -> usize {
        self.movement + self.message
    }

    /// Zero force and silence.
    pub fn noop(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }
}

/// Terminal classification of an intersection episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Stuck,
    Crash,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Agent-agent contacts this step (each unordered pair counted once).
    pub collisions: usize,
    /// Predator-prey contacts this step.
    pub touches: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observations: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub done: bool,
    pub info: StepInfo,
}

/// Stepping interface shared by every world. Agents are the learning roster;
/// scripted entities (a fixed prey) are advanced inside `step`.
pub trait MultiAgentEnv {
    fn num_agents(&self) -> usize;
    fn observation_dims(&self) -> Vec<usize>;
    fn action_spaces(&self) -> Vec<ActionSpace>;
    /// Steps per episode, `T`.
    fn episode_length(&self) -> usize;
    fn dt(&self) -> f64;
    /// Re-seeds the world layout and returns initial observations.
    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>>;
    fn step(&mut self, actions: &[Vec<f64>]) -> Result<StepResult, EnvError>;
    fn observe(&self, agent: usize) -> Vec<f64>;
    /// JSON view of the full world state for trajectory dumps.
    fn snapshot(&self) -> serde_json::Value;
}

impl<E: MultiAgentEnv + ?Sized> MultiAgentEnv for Box<E> {
    fn num_agents(&self) -> usize {
        (**self).num_agents()
    }
    fn observation_dims(&self) -> Vec<usize> {
        (**self).observation_dims()
    }
    fn action_spaces(&self) -> Vec<ActionSpace> {
        (**self).action_spaces()
    }
    fn episode_length(&self) -> usize {
        (**self).episode_length()
    }
    fn dt(&self) -> f64 {
        (**self).dt()
    }
    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        (**self).reset(seed)
    }
    fn step(&mut self, actions: &[Vec<f64>]) -> Result<StepResult, EnvError> {
        (**self).step(actions)
    }
    fn observe(&self, agent: usize) -> Vec<f64> {
        (**self).observe(agent)
    }
    fn snapshot(&self) -> serde_json::Value {
        (**self).snapshot()
    }
}

/// Checks agent count, per-agent dimension and finiteness of a joint action.
pub(crate) fn check_actions(actions: &[Vec<f64>], spaces: &[ActionSpace]) -> Result<(), EnvError> {
    if actions.len() != spaces.len() {
        return Err(EnvError::Shape(format!(
            "{} actions for {} agents",
            actions.len(),
            spaces.len()
        )));
    }
    for (agent, (action, space)) in actions.iter().zip(spaces).enumerate() {
        if action.len() != space.dim() {
            return Err(EnvError::Shape(format!(
                "agent {agent} action has {} components, expected {}",
                action.len(),
                space.dim()
            )));
        }
        if action.iter().any(|v| !v.is_finite()) {
            return Err(EnvError::NonFiniteAction { agent });
        }
    }
    Ok(())
}
