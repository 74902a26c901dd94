//! Minimal reverse-mode differentiation kernel for the four detector
//! architectures.

mod model;
mod tape;
mod tensor;
mod train;

pub use model::{
    bce_logit_grad, bce_loss, layout, sigmoid, Architecture, Gradients, Model, ParamSpec,
    PROB_CLAMP,
};
pub use tape::{LstmCell, LstmGrads, LstmStep, NodeId, Tape, TapeGrads};
pub use tensor::Tensor;
pub use train::{train, EpochLog, OptimizerKind, TrainConfig};
