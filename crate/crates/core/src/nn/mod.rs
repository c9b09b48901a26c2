//! Differentiable building blocks: dense tensors, layer normalization, a
//! layer-normalized LSTM cell with recurrent dropout, Xavier initialization,
//! Adam, gradient clipping and a finite-difference gradient checker.
//!
//! Gradients are computed by hand-written backward passes. A model and its
//! gradient share one type: the gradient is a zeroed clone of the model whose
//! tensors are accumulated into.

mod checkpoint;
mod gradcheck;
mod init;
mod layer_norm;
mod lstm;
mod optim;
mod params;
mod tensor;

pub use checkpoint::{export_tensors, import_tensors, TensorRecord};
pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use init::xavier_init;
pub use layer_norm::{layer_norm, layer_norm_backward, LayerNormCache, LN_EPS};
pub use lstm::{lstm_backward, lstm_forward, lstm_step, LstmCache, LstmParams};
pub use optim::{adam_update, clip_gradients, AdamConfig, OptimizerState};
pub use params::Parameters;
pub(crate) use params::prefixed;
pub use tensor::Tensor;
