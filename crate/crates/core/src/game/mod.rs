//! Markov games, delay augmentation through per-agent action buffers, and the
//! tabular Markov-reward-process constructions used to check that augmenting
//! a game and delaying its actions induce the same process.

mod buffer;
mod delayed;
mod mrp;
mod tabular;
pub mod text;

pub use buffer::{ActionBuffer, AugmentedObservation, AugmentedSpace, AugmentedState, DelaySpec};
pub use delayed::{DelayedEnv, DelayedStep};
pub use mrp::{
    compare_mrps, damrp_kernel, mrp_of_damg, mrp_of_game, verify_theorem1, verify_theorem1_with_cap,
    MrpDiff, MrpKernel, PolicyTable, Theorem1Report, DEFAULT_ENUMERATION_CAP,
};
pub use tabular::{
    augment_game, random_instance, DelayAwareGame, JointActions, MarkovGame, RandomInstance,
    RandomLimits, TabularMarkovGame,
};

use thiserror::Error;

/// Tolerance for probability vectors of a tabular game.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;
/// Tolerance for a policy row to count as a distribution.
pub const POLICY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("invalid policy for agent {agent}: row {observation} sums to {sum}")]
    InvalidPolicy {
        agent: usize,
        observation: usize,
        sum: f64,
    },
    #[error("augmented state count {product} = {formula} exceeds enumeration cap {cap}")]
    Size {
        product: u128,
        formula: String,
        cap: usize,
    },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = GameError> = std::result::Result<T, E>;
