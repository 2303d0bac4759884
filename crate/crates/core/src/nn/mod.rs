//! Dense tensors, reverse-mode differentiation and the graph Q-network.

pub(crate) mod checkpoint;
mod graph;
mod matrix;
mod model;
mod optim;
mod params;
mod tape;

pub use checkpoint::{load_params, params_from_bytes, params_to_bytes, save_params};
pub use graph::{GraphInput, GraphSchema};
pub use matrix::Matrix;
pub use model::{
    forward, push_dueling_head, q_head, q_values, rgcn_forward, rgcn_forward_with, HeadIndex, ModelConfig, ModelParams, Noise,
    HIDDEN_WIDTH, N_ACTIONS, SIGMA_INIT,
};
pub use optim::{Adam, DEFAULT_CLIP_NORM, DEFAULT_LEARNING_RATE};
pub use params::{Gradients, ParamSet};
pub use tape::{Tape, Var};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("tape was already differentiated")]
    StaleTape,
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("model mode mismatch: expected {expected}, found {found}")]
    ModeMismatch { expected: String, found: String },
    #[error("invalid model file: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests;
