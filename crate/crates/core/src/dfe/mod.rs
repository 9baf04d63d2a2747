//! Convolutional autoencoder whose bottleneck codes serve as descriptors.
//!
//! A 31×31×3 LAB01 crop is encoded by a stack of valid convolutions, each
//! followed by batch normalization and a rectifier, down to a 1×1×128 code.
//! A mirrored stack of transposed convolutions ending in a sigmoid decodes
//! it back. Training minimizes the mean squared reconstruction error with
//! Adamax; gradients are derived by hand.
//!
//! Layers are generic over [`Real`] so the same code runs in `f32` for
//! production and `f64` for gradient checking. Saved weights are always
//! `f32`.

mod adamax;
mod config;
mod describe;
mod io;
mod layers;
mod model;
mod train;

pub use adamax::{Adamax, AdamaxConfig};
pub use config::{BlockSpec, CaeConfig, DecoderLayer, TensorShape};
pub use describe::DfeEncoder;
pub use io::{load_checkpoint, load_history, load_model, load_model_for, save_checkpoint, save_model, save_with_history, MAGIC};
pub use layers::{
    conv_backward, conv_forward, tconv_backward, tconv_forward, BatchNorm, ConvWeights, Real, Tensor, BN_EPSILON,
    BN_MOMENTUM,
};
pub use model::{mse, Cae, CaeModel, Gradients, Layer, TrainStep};
pub use train::{train, CropDataset, EpochRecord, TrainOptions, TrainState};
