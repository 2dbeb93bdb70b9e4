//! Differentiable building blocks with hand-derived backward passes.
//!
//! Every layer exposes `forward` (returning an output plus whatever it needs
//! to remember) and `backward` (accumulating into [`Parameter::grad`] and
//! returning the gradient of its input). All arithmetic is `f64`.

mod conv;
mod gradcheck;
mod layers;
mod lstm;
mod optim;
mod param;
mod tensor;

pub use conv::{conv1d_stack, Conv1d, ConvCache, ConvStack};
pub use gradcheck::{grad_check, grad_check_report, GradCheckConfig, GradCheckReport, Objective};
pub use layers::{
    affine, affine_backward, dropout, relu, sigmoid, softmax_rows, weighted_bce,
    weighted_bce_logit_grad, Linear, Mlp, MlpCache, PROB_CLAMP,
};
pub use lstm::{
    bilstm_encode, lstm_cell, lstm_cell_backward, BiLstm, BiLstmCache, BiLstmLayer, LstmStep,
    LstmWeights,
};
pub use optim::{adam_step, clip_gradients, global_grad_norm, AdamConfig};
pub use param::{Module, Parameter};
pub use tensor::{active_rows, Tensor2D};
