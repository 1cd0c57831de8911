//! Neural-network building blocks: exactly the layers the autoencoder needs,
//! each with a hand-written gradient rule, plus Adam and a finite-difference
//! gradient-check harness.

mod activation;
mod adam;
mod batchnorm;
mod conv;
mod dropout;
pub(crate) mod gemm;
mod gradcheck;
mod init;
mod linear;
mod pool;

pub use activation::{relu, relu_backward, tanh_act, tanh_backward};
pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use batchnorm::{BatchNorm2d, BnCtx, Mode, BN_EPS, BN_MOMENTUM};
pub use conv::{
    conv2d, conv2d_grads, conv_transpose2d, conv_transpose2d_grads, Conv2d, ConvTranspose2d,
};
pub use dropout::{Dropout, DropoutMask};
pub use gradcheck::{grad_check, max_relative_error, numeric_gradient};
pub use init::kaiming_uniform;
pub use linear::{fully_connected, fully_connected_grads, Linear};
pub use pool::{maxpool2d, maxunpool2d, PoolRecord};
