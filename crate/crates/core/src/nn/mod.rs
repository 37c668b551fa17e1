//! Tensor tape, layers, loss and optimizer.

pub mod gradcheck;
mod layers;
mod optim;
mod tape;

pub use layers::{
    cross_entropy, dropout, gcn_forward, gcn_residual_forward, glorot_uniform, linear_forward, mean_nodes, Activation,
    LayerParams, ParamId, ParamStore,
};
pub use optim::{AdamConfig, AdamState};
pub use tape::{Gradients, Tape, Var};
