use crate::envs::{EnvError, MultiAgentEnv, StepInfo};

use super::{ActionBuffer, AugmentedObservation, DelaySpec, GameError};

/// Result of one delayed step.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedStep {
    /// Augmented observations for the next tick.
    pub observations: Vec<AugmentedObservation<f64>>,
    pub rewards: Vec<f64>,
    pub done: bool,
    pub info: StepInfo,
    /// Actions the environment executed this tick.
    pub executed: Vec<Vec<f64>>,
}

/// A continuous-action environment seen through per-agent action buffers.
///
/// Each agent's observation carries its own pending actions, so a policy over
/// [`AugmentedObservation`] acts in the delay-aware game.
pub struct DelayedEnv<E> {
    env: E,
    spec: DelaySpec<Vec<f64>>,
    buffer: ActionBuffer<Vec<f64>>,
    last_obs: Vec<Vec<f64>>,
}

impl<E: MultiAgentEnv> DelayedEnv<E> {
    /// Wraps `env` with buffers pre-filled with each agent's no-op action.
    pub fn new(env: E, delay_steps: &[usize]) -> Result<Self, GameError> {
        let spaces = env.action_spaces();
        let spec = DelaySpec::with_noop(delay_steps, |agent| {
            spaces.get(agent).map(|s| s.noop()).unwrap_or_default()
        });
        Self::with_spec(env, spec)
    }

    pub fn with_spec(env: E, spec: DelaySpec<Vec<f64>>) -> Result<Self, GameError> {
        let spaces = env.action_spaces();
        if spec.num_agents() != env.num_agents() {
            return Err(GameError::Config(format!(
                "delay spec for {} agents, environment has {}",
                spec.num_agents(),
                env.num_agents()
            )));
        }
        for (agent, space) in spaces.iter().enumerate() {
            if let Some(bad) = spec.initial_actions(agent).iter().find(|a| a.len() != space.dim()) {
                return Err(GameError::Config(format!(
                    "agent {agent}: initial action of length {} for action dimension {}",
                    bad.len(),
                    space.dim()
                )));
            }
        }
        let buffer = ActionBuffer::new(&spec);
        let last_obs = vec![Vec::new(); env.num_agents()];
        Ok(Self { env, spec, buffer, last_obs })
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn env_mut(&mut self) -> &mut E {
        &mut self.env
    }

    pub fn into_inner(self) -> E {
        self.env
    }

    pub fn delays(&self) -> Vec<usize> {
        self.spec.steps()
    }

    pub fn buffer(&self) -> &ActionBuffer<Vec<f64>> {
        &self.buffer
    }

    /// Width of each agent's augmented observation.
    pub fn augmented_dims(&self) -> Vec<usize> {
        let spaces = self.env.action_spaces();
        self.env
            .observation_dims()
            .into_iter()
            .enumerate()
            .map(|(i, d)| d + self.spec.step(i) * spaces[i].dim())
            .collect()
    }

    /// Resets the world and refills the buffers with the initial sequences.
    pub fn reset(&mut self, seed: u64) -> Vec<AugmentedObservation<f64>> {
        self.last_obs = self.env.reset(seed);
        self.buffer = ActionBuffer::new(&self.spec);
        self.augmented()
    }

    /// Queues `chosen`, executes the buffer heads and returns the next
    /// augmented observations.
    pub fn step(&mut self, chosen: &[Vec<f64>]) -> Result<DelayedStep, EnvError> {
        let spaces = self.env.action_spaces();
        if chosen.len() != spaces.len() {
            return Err(EnvError::Shape(format!(
                "{} actions for {} agents",
                chosen.len(),
                spaces.len()
            )));
        }
        for (agent, (a, space)) in chosen.iter().zip(&spaces).enumerate() {
            if a.len() != space.dim() {
                return Err(EnvError::Shape(format!(
                    "agent {agent}: action of length {} for action dimension {}",
                    a.len(),
                    space.dim()
                )));
            }
        }
        let executed = self
            .buffer
            .step(chosen.to_vec())
            .map_err(|e| EnvError::Shape(e.to_string()))?;
        let result = self.env.step(&executed)?;
        self.last_obs = result.observations;
        Ok(DelayedStep {
            observations: self.augmented(),
            rewards: result.rewards,
            done: result.done,
            info: result.info,
            executed,
        })
    }

    fn augmented(&self) -> Vec<AugmentedObservation<f64>> {
        self.last_obs
            .iter()
            .enumerate()
            .map(|(agent, obs)| AugmentedObservation {
                obs: obs.clone(),
                act: self.buffer.pending_vec(agent),
            })
            .collect()
    }
}
