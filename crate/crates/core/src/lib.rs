//! Delay-aware multi-agent reinforcement learning.
//!
//! - [`game`]: Markov games, per-agent action buffers, delay augmentation and
//!   the tabular reward-process constructions that check it.
//! - [`envs`]: particle scenarios and the intersection world.
//! - [`nn`]: networks, gradients and optimizers for actors and critics.
//! - [`marl`]: the four actor-critic trainers, replay, training loop and
//!   evaluation.

pub mod envs;
pub mod game;
pub mod marl;
pub mod nn;
pub mod scalar;

pub use scalar::Scalar;

pub type TabularMarkovGame32 = game::TabularMarkovGame<f32>;
pub type TabularMarkovGame64 = game::TabularMarkovGame<f64>;
pub type Mlp32 = nn::Mlp<f32>;
pub type Mlp64 = nn::Mlp<f64>;
pub type AgentLearner32 = marl::AgentLearner<f32>;
pub type AgentLearner64 = marl::AgentLearner<f64>;
