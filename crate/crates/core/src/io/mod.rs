//! On-disk formats: Middlebury `.flo`, KITTI-style 16-bit PNG flow and
//! segmentation mask PNGs.

mod flo;
mod mask;
mod png16;

use std::path::PathBuf;

use thiserror::Error;

pub use flo::{read_flo, write_flo, FloFileHeader, FLO_MAGIC};
pub use mask::{read_mask, write_mask, write_mask_color};
pub use png16::{read_flow_png16, write_flow_png16};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a flow file (magic {found})")]
    BadMagic { path: PathBuf, found: f32 },
    #[error("{path}: invalid dimensions {width}x{height}")]
    BadDimensions { path: PathBuf, width: i32, height: i32 },
    #[error("{path}: truncated payload, expected {expected} bytes, found {found}")]
    Truncated { path: PathBuf, expected: usize, found: usize },
    #[error("{path}: expected 16-bit samples, found {found}-bit")]
    WrongBitDepth { path: PathBuf, found: u8 },
    #[error("{path}: expected {expected} channels, found {found}")]
    WrongChannelCount { path: PathBuf, expected: usize, found: usize },
    #[error("{path}: color {color:?} at ({x}, {y}) is not in the class map")]
    UnknownColor { path: PathBuf, x: usize, y: usize, color: [u8; 3] },
    #[error("{path}: {message}")]
    Png { path: PathBuf, message: String },
}

impl IoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io { path: path.into(), source }
    }

    pub(crate) fn png(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        IoError::Png { path: path.into(), message: e.to_string() }
    }
}
