//! Differentiable fully-connected networks, optimizers and gradient checks.

mod checkpoint;
mod finite_diff;
mod network;
mod optim;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, ModelRole,
    FORMAT_VERSION, MAGIC,
};
pub use finite_diff::{finite_diff_grad, forward_difference, l2_distance, FdMode, DEFAULT_FD_STEP};
pub(crate) use finite_diff::squared_distance;
pub use network::{
    backward, backward_into, forward, forward_into, init_params, predict, Activation, Gradients,
    NetworkSpec, ParamVector, Tape,
};
pub use optim::{adam_step, clip_weights, AdamState, Optimizer, OptimizerKind};
