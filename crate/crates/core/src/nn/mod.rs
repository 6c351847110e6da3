//! A small dense-prediction network engine: CNHW tensors, layers with
//! hand-written backward passes, the segmentation architectures, loss,
//! optimizer and on-disk formats.

use std::path::PathBuf;

use thiserror::Error;

mod checkpoint;
mod input;
pub mod layers;
mod loss;
mod model;
mod optim;
mod scalar;
mod tensor;
mod weights;

pub use checkpoint::{load_checkpoint, read_checkpoint_spec, save_checkpoint, Checkpoint};
pub use input::{argmax_masks, predict, prepare_batch};
pub use loss::{compute_loss, cross_entropy, CrossEntropy, LossSpec, LossValue};
pub use model::{
    build_decoder, build_encoder, build_model, Batch, Decoder, Encoder, EncoderScale, InputNorm, Mode, Model,
    ModelSpec, SkipFusion, Stream, Taps, Variant, FLOW_MEAN, INPUT_MULTIPLE, RGB_MEAN, STAGE_DEPTHS, VGG_WIDTHS,
};
pub use optim::{Adam, AdamConfig};
pub use scalar::{gemm, Scalar};
pub use tensor::{col2im, im2col, Tensor, Window};
pub use weights::WeightFile;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("pretrained weight `{name}` has shape {found:?}, expected {expected:?}")]
    WeightShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("pretrained weight `{0}` is missing")]
    MissingWeight(String),
    #[error("input modality `{0}` is required by this model but missing")]
    MissingModality(&'static str),
    #[error("bad input: {0}")]
    InputShape(String),
    #[error("every pixel of the batch is ignored")]
    AllPixelsIgnored,
    #[error("checkpoint spec does not match: expected {expected}, found {found}")]
    SpecMismatch { expected: String, found: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    BadFile { path: PathBuf, message: String },
    #[error(transparent)]
    Encode(#[from] crate::flow::EncodeError),
}
