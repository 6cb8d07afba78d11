//! Convolutional encoder, ConvLSTM and decoder with hand-written gradients.

pub mod activation;
pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod convlstm;
pub mod loss;
pub mod model;
pub mod tensor;
pub mod train;

pub use loss::LossKind;
pub use model::{ModelConfig, SurrogateModel};
pub use tensor::Tensor;
pub use train::{Sequence, TrainConfig, Trainer};
