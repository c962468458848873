//! Fixed-topology feed-forward networks with analytic gradients, first-order
//! optimizers and target-network tracking.

mod checkpoint;
mod gradcheck;
mod matrix;
mod mlp;
mod optim;

pub use checkpoint::{checkpoint_to_text, read_checkpoint, write_checkpoint, MAGIC, VERSION};
pub use gradcheck::{grad_check, grad_check_with, relative_error, GradCheckReport, RELATIVE_ERROR_FLOOR};
pub use matrix::Matrix;
pub use mlp::{
    Activation, ForwardCache, GradientSet, Layer, Mlp, MlpParams, MlpSpec, OutputActivation, HIDDEN_UNITS,
};
pub use optim::{clip_global_norm, optimizer_step, soft_update, OptimizerKind, OptimizerState, DEFAULT_CLIP_NORM};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
