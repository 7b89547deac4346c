//! Small reverse-mode differentiation engine with the fused kernels the
//! localizer needs, plus parameter storage, initialisers and Adam.

mod activation;
pub mod adam;
mod attention;
pub mod checkpoint;
mod gru;
pub mod init;
mod linear;
pub mod params;
mod tape;
mod tensor;

pub use activation::{gelu_scalar, normal_cdf, sigmoid_scalar};
pub use adam::{Adam, AdamConfig};
pub use attention::Neighborhoods;
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_FORMAT_VERSION};
pub use params::{Param, ParamStore};
pub use tape::{Gradients, Tape, Unary, Var, PROB_EPS};
pub use tensor::Tensor;
