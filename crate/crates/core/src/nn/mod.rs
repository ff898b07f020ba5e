//! Minimal CPU neural-network engine: conv/dense/pool layers with
//! backpropagation, dueling heads, freeze masks, checkpoints and cost
//! accounting.

pub mod accounting;
pub mod checkpoint;
pub mod layers;
mod network;
pub mod spec;
mod tensor;

pub use accounting::{count_flops, count_trainable_weights, FlopReport, LayerCost};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use layers::ParamGrads;
pub use network::{LayerParams, Network, Optimizer, StepStats, HUBER_DELTA};
pub use spec::{
    build_desk_network, build_linear_network, build_reference_network, LayerKind, LayerSpec, NetworkSpec, Stream,
    TrainType,
};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { context: String, expected: Vec<usize>, actual: Vec<usize> },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("training diverged (loss = {loss})")]
    Divergence { loss: f32 },
    #[error("spec digest mismatch: expected {expected:016x}, checkpoint has {actual:016x}")]
    SpecMismatch { expected: u64, actual: u64 },
    #[error("unsupported checkpoint version '{found}' (expected '{expected}')")]
    Version { found: char, expected: char },
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("checkpoint truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
