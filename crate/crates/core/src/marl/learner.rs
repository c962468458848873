use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::envs::ActionSpace;
use crate::nn::{Matrix, Mlp, MlpSpec, OptimizerKind, OptimizerState};
use crate::Scalar;

use super::gumbel::{gumbel_softmax_with_noise, sample_gumbel};
use super::{MarlError, Result, Variant};

/// What one agent observes and emits, and how long its actions wait.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentLayout {
    pub obs_dim: usize,
    pub delay: usize,
    pub space: ActionSpace,
}

impl AgentLayout {
    pub fn action_dim(&self) -> usize {
        self.space.dim()
    }

    /// Width of the observation followed by the pending actions.
    pub fn augmented_dim(&self) -> usize {
        self.obs_dim + self.delay * self.action_dim()
    }

    pub fn view_dim(&self, delay_aware: bool) -> usize {
        if delay_aware {
            self.augmented_dim()
        } else {
            self.obs_dim
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerParams {
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub gumbel_temperature: f64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            optimizer: OptimizerKind::default(),
            gumbel_temperature: 1.0,
        }
    }
}

/// Actor, critic, their target copies and optimizer states for one agent.
#[derive(Debug, Clone)]
pub struct AgentLearner<T> {
    pub index: usize,
    pub variant: Variant,
    /// Layouts of every agent in the game, this one included.
    pub layouts: Vec<AgentLayout>,
    pub actor: Mlp<T>,
    pub critic: Mlp<T>,
    pub target_actor: Mlp<T>,
    pub target_critic: Mlp<T>,
    pub actor_opt: OptimizerState<T>,
    pub critic_opt: OptimizerState<T>,
    pub temperature: T,
}

impl<T: Scalar> AgentLearner<T> {
    /// Fresh learner; targets start as copies of the online networks.
    pub fn new<R: Rng + ?Sized>(
        index: usize,
        variant: Variant,
        layouts: Vec<AgentLayout>,
        params: &LearnerParams,
        rng: &mut R,
    ) -> Result<Self> {
        let own = *layouts
            .get(index)
            .ok_or_else(|| MarlError::Config(format!("agent {index} of {}", layouts.len())))?;
        if !(params.gumbel_temperature > 0.0) {
            return Err(MarlError::Config(format!(
                "Gumbel-Softmax temperature {} must be positive",
                params.gumbel_temperature
            )));
        }
        let actor_spec = MlpSpec::actor(own.view_dim(variant.delay_aware()), own.space.movement, own.space.message);
        let actor = Mlp::new(&actor_spec, rng)?;
        let critic = Mlp::new(&MlpSpec::critic(Self::critic_width(index, variant, &layouts)), rng)?;
        Ok(Self {
            index,
            variant,
            actor_opt: OptimizerState::new(&actor, params.optimizer, params.learning_rate),
            critic_opt: OptimizerState::new(&critic, params.optimizer, params.learning_rate),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            layouts,
            temperature: T::lit(params.gumbel_temperature),
        })
    }

    fn critic_width(index: usize, variant: Variant, layouts: &[AgentLayout]) -> usize {
        let aware = variant.delay_aware();
        if variant.centralized() {
            layouts.iter().map(|l| l.view_dim(aware) + l.action_dim()).sum()
        } else {
            layouts[index].view_dim(aware) + layouts[index].action_dim()
        }
    }

    pub fn layout(&self) -> &AgentLayout {
        &self.layouts[self.index]
    }

    /// Width the actor expects.
    pub fn actor_input_dim(&self) -> usize {
        self.layout().view_dim(self.variant.delay_aware())
    }

    pub fn critic_input_dim(&self) -> usize {
        Self::critic_width(self.index, self.variant, &self.layouts)
    }

    /// This learner's view of agent `agent`'s augmented observations: all of
    /// it when delay-aware, the environment part alone otherwise.
    pub fn view(&self, agent: usize, augmented: &Matrix<T>) -> Result<Matrix<T>> {
        let width = self.layouts[agent].view_dim(self.variant.delay_aware());
        if width == augmented.cols() {
            Ok(augmented.clone())
        } else {
            Ok(augmented.columns(0, width)?)
        }
    }

    /// Critic input from every agent's augmented observations and actions.
    pub fn critic_input(&self, obs: &[Matrix<T>], actions: &[&Matrix<T>]) -> Result<Matrix<T>> {
        if self.variant.centralized() {
            let views = (0..obs.len()).map(|j| self.view(j, &obs[j])).collect::<Result<Vec<_>>>()?;
            let mut parts: Vec<&Matrix<T>> = views.iter().collect();
            parts.extend(actions.iter().copied());
            Ok(Matrix::hstack(&parts)?)
        } else {
            let own = self.view(self.index, &obs[self.index])?;
            Ok(Matrix::hstack(&[&own, actions[self.index]])?)
        }
    }

    /// Column where this agent's own action starts in the critic input.
    pub fn own_action_offset(&self) -> usize {
        let aware = self.variant.delay_aware();
        if self.variant.centralized() {
            let obs: usize = self.layouts.iter().map(|l| l.view_dim(aware)).sum();
            obs + self.layouts[..self.index].iter().map(|l| l.action_dim()).sum::<usize>()
        } else {
            self.layout().view_dim(aware)
        }
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.actor_input_dim() {
            return Err(MarlError::Shape(format!(
                "agent {} ({}) got an observation of width {}, its actor takes {}",
                self.index,
                self.variant,
                input.len(),
                self.actor_input_dim()
            )));
        }
        Ok(())
    }

    /// Exploratory action: actor output plus Gaussian noise of scale
    /// `noise_scale` on the movement part, clipped to `[-1, 1]`; the message
    /// part is a Gumbel-Softmax sample of the actor's logits.
    pub fn act<R: Rng + ?Sized>(&self, input: &[T], noise_scale: T, rng: &mut R) -> Result<Vec<T>> {
        self.check_input(input)?;
        let out = self.actor.forward(input)?;
        let m = self.layout().space.movement;
        let mut action: Vec<T> = out[..m]
            .iter()
            .map(|&a| {
                let noisy = if noise_scale > T::zero() {
                    let n: f64 = StandardNormal.sample(rng);
                    a + noise_scale * T::lit(n)
                } else {
                    a
                };
                noisy.max(-T::one()).min(T::one())
            })
            .collect();
        if out.len() > m {
            let noise = sample_gumbel(out.len() - m, rng);
            action.extend(gumbel_softmax_with_noise(&out[m..], &noise, self.temperature)?);
        }
        Ok(action)
    }

    /// Noise-free action with the message discretized to a one-hot argmax.
    pub fn act_greedy(&self, input: &[T]) -> Result<Vec<T>> {
        self.check_input(input)?;
        let out = self.actor.forward(input)?;
        Ok(greedy_action(&out, self.layout().space.movement))
    }

    /// Target-actor actions for a batch of this learner's own views, message
    /// parts sampled with fresh Gumbel noise.
    pub fn target_actions<R: Rng + ?Sized>(&self, own_view: &Matrix<T>, rng: &mut R) -> Result<Matrix<T>> {
        let out = self.target_actor.forward_batch(own_view)?.output;
        self.relax_messages(out, rng).map(|(a, _)| a)
    }

    /// Replaces the logit columns of actor outputs with Gumbel-Softmax
    /// samples; returns the actions and the samples' noise.
    pub fn relax_messages<R: Rng + ?Sized>(
        &self,
        mut out: Matrix<T>,
        rng: &mut R,
    ) -> Result<(Matrix<T>, Option<Matrix<T>>)> {
        let m = self.layout().space.movement;
        let k = out.cols() - m;
        if k == 0 {
            return Ok((out, None));
        }
        let mut noise = Matrix::zeros(out.rows(), k);
        for r in 0..out.rows() {
            let g = sample_gumbel(k, rng);
            let y = gumbel_softmax_with_noise(&out.row(r)[m..], &g, self.temperature)?;
            out.row_mut(r)[m..].copy_from_slice(&y);
            noise.row_mut(r).copy_from_slice(&g);
        }
        Ok((out, Some(noise)))
    }
}

/// Movement outputs as-is, message logits replaced by a one-hot argmax.
pub(crate) fn greedy_action<T: Scalar>(out: &[T], movement: usize) -> Vec<T> {
    let mut action = out[..movement].to_vec();
    let logits = &out[movement..];
    if !logits.is_empty() {
        let best = logits
            .iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v > logits[b] { i } else { b });
        action.extend((0..logits.len()).map(|i| if i == best { T::one() } else { T::zero() }));
    }
    action
}
