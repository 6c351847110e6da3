//! Dataset ingestion and synthetic scene generation.

mod cityscapes;
mod classmap;
mod split;
mod synth;
mod vkitti;

use std::fmt;

use image::RgbImage;
use thiserror::Error;

use crate::estimate::EstimateError;
use crate::flow::FlowField;
use crate::io::IoError;
use crate::SegMask;

pub use cityscapes::{load_cityscapes, CityscapesOptions};
pub use classmap::{ClassEntry, ClassMap};
pub use split::split_train_test;
pub use synth::{
    generate_synthetic, scene_benchmark, BenchmarkConfig, ObjectShape, SceneKind, SynthObject, SynthSceneSpec,
    TextureMode,
};
pub use vkitti::load_vkitti;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("layout error: {0}")]
    Layout(String),
    #[error("class map: {0}")]
    ClassMap(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{path}: {message}")]
    Image { path: String, message: String },
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("sample {frame_id}: {message}")]
    InvalidSample { frame_id: String, message: String },
    #[error("object {index} leaves the {width}x{height} canvas at frame {frame}")]
    ObjectOutOfBounds { index: usize, frame: usize, width: usize, height: usize },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
}

/// Where the flow for a loaded frame comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowSource {
    /// Dataset-provided annotation (Virtual KITTI, synthetic scenes).
    GroundTruth,
    /// Computed from the predecessor frame with [`crate::estimate`].
    Estimate,
    /// Precomputed `.flo` files, e.g. from an external learned estimator.
    Precomputed,
    /// No flow attached.
    None,
}

impl std::str::FromStr for FlowSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ground_truth" | "gt" => Ok(FlowSource::GroundTruth),
            "estimate" => Ok(FlowSource::Estimate),
            "precomputed" => Ok(FlowSource::Precomputed),
            "none" => Ok(FlowSource::None),
            other => Err(format!("unknown flow source `{other}`")),
        }
    }
}

/// One annotated frame.
#[derive(Clone, Debug)]
pub struct Sample {
    pub rgb: RgbImage,
    pub flow: Option<FlowField>,
    pub mask: SegMask,
    pub frame_id: String,
    pub prev_frame_id: Option<String>,
    /// Grouping key for sequence-level splits.
    pub sequence_id: String,
}

impl Sample {
    /// Checks that all modalities share dimensions and every mask id is a
    /// class of `class_map` or its ignore id.
    pub fn new(
        rgb: RgbImage,
        flow: Option<FlowField>,
        mask: SegMask,
        frame_id: String,
        prev_frame_id: Option<String>,
        sequence_id: String,
        class_map: &ClassMap,
    ) -> Result<Self, DatasetError> {
        let invalid = |message: String| DatasetError::InvalidSample { frame_id: frame_id.clone(), message };
        let dims = (rgb.width() as usize, rgb.height() as usize);
        if (mask.width(), mask.height()) != dims {
            return Err(invalid(format!("mask is {}x{}, image is {}x{}", mask.width(), mask.height(), dims.0, dims.1)));
        }
        if let Some(f) = &flow {
            if (f.width(), f.height()) != dims {
                return Err(invalid(format!("flow is {}x{}, image is {}x{}", f.width(), f.height(), dims.0, dims.1)));
            }
        }
        if let Some(bad) = mask.ids().iter().find(|&&id| !class_map.accepts(id)) {
            return Err(invalid(format!("mask id {bad} is not a class id")));
        }
        Ok(Sample { rgb, flow, mask, frame_id, prev_frame_id, sequence_id })
    }

    pub fn width(&self) -> usize {
        self.rgb.width() as usize
    }

    pub fn height(&self) -> usize {
        self.rgb.height() as usize
    }
}

/// Non-fatal problems met while walking a dataset tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DatasetIssue {
    Layout(String),
    MissingModality { frame_id: String, modality: &'static str },
    FlowAbsent { frame_id: String, reason: String },
}

impl fmt::Display for DatasetIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetIssue::Layout(m) => write!(f, "layout: {m}"),
            DatasetIssue::MissingModality { frame_id, modality } => {
                write!(f, "frame {frame_id}: missing {modality}")
            }
            DatasetIssue::FlowAbsent { frame_id, reason } => write!(f, "frame {frame_id}: no flow ({reason})"),
        }
    }
}

/// Loaded samples in sorted frame order plus every skipped-frame warning.
#[derive(Debug, Default)]
pub struct LoadReport {
    pub samples: Vec<Sample>,
    pub issues: Vec<DatasetIssue>,
}

pub(crate) fn load_rgb(path: &std::path::Path) -> Result<RgbImage, DatasetError> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|e| DatasetError::Image { path: path.display().to_string(), message: e.to_string() })
}

pub(crate) fn sorted_dir(path: &std::path::Path) -> Result<Vec<std::path::PathBuf>, DatasetError> {
    let rd = std::fs::read_dir(path).map_err(|e| DatasetError::Layout(format!("{}: {e}", path.display())))?;
    let mut entries: Vec<_> = rd.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    Ok(entries)
}
