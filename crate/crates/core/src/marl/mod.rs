//! Actor-critic learners for delayed multi-agent games: decentralized or
//! centralized critics, with or without the pending-action part of each
//! agent's observation.

mod config;
mod eval;
mod gumbel;
mod learner;
mod replay;
mod train;
mod update;

pub use config::{NoiseSchedule, TrainerConfig, Variant};
pub use eval::{
    evaluate, ActorPolicy, ConstantPolicy, EvalSummary, FnPolicy, Policy, ScriptedChaser,
};
pub use gumbel::{gumbel_softmax, gumbel_softmax_backward, gumbel_softmax_with_noise, sample_gumbel, softmax};
pub use learner::{AgentLayout, AgentLearner, LearnerParams};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use train::{
    load_actors, save_learners, split_seed, train, EpisodeRecord, MetricsHeader, TimingRecord, Trainer,
    METRICS_FORMAT,
};
pub use update::{
    actor_gradient, actor_objective, actor_update, actor_update_agent, critic_update, critic_update_agent, soft_update_targets,
};

use thiserror::Error;

use crate::envs::EnvError;
use crate::game::GameError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum MarlError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("replay buffer holds {have} transitions, {need} needed before sampling")]
    NotReady { have: usize, need: usize },
    #[error("episode {episode}, step {step}: {source}")]
    Run {
        episode: usize,
        step: usize,
        #[source]
        source: Box<MarlError>,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = MarlError> = std::result::Result<T, E>;
