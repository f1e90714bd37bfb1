//! Minimal dense linear algebra and neural-network building blocks:
//! fully connected layers, ReLU, temperature softmax, cross-entropy,
//! hand-written gradients and SGD with weight decay.

pub mod gradcheck;
mod layers;
mod optim;
mod params;
mod tensor;

pub use layers::{
    cross_entropy_loss, dense_backward_batch, dense_forward, dense_forward_batch, relu,
    relu_backward_in_place, relu_in_place, sigmoid, softmax_cross_entropy_batch,
    softmax_temperature, DenseLayerParams, SoftmaxCrossEntropy,
};
pub(crate) use layers::glorot_matrix;
pub use optim::{sgd_step, SgdConfig};
pub use params::{ParamRole, ParamView, ParamViewMut, Parameters};
pub(crate) use params::join;
pub use tensor::{dot, gemm, matmul, Matrix, Op, Vector};
