//! Experiment orchestration: configuration, training, evaluation,
//! multi-variant comparison and qualitative panels.

use std::path::PathBuf;

use thiserror::Error;

use crate::datasets::DatasetError;
use crate::metrics::MetricsError;
use crate::nn::ModelError;

mod compare;
mod config;
mod data;
mod eval;
mod panels;
mod train;

pub use compare::{run_comparison, Comparison};
pub use config::{parse_config, parse_scene_config, SceneConfig, TrainConfig, CONFIG_KEYS};
pub use data::{DatasetConfig, DatasetSource, LoadedData};
pub use eval::{evaluate, evaluate_model, Evaluation};
pub use panels::{render_report_panels, Panel, PanelIndex, Tile};
pub use train::{train, train_on, EpochLog, TrainOutcome};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("{0} set is empty")]
    EmptyDataset(&'static str),
    #[error("spec mismatch: {0}")]
    SpecMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }
}
