use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::datasets::{
    load_cityscapes, load_vkitti, scene_benchmark, split_train_test, BenchmarkConfig, CityscapesOptions, ClassMap,
    DatasetIssue, FlowSource, Sample,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DatasetSource {
    /// Generated in memory, split by sequence.
    Synthetic(BenchmarkConfig),
    /// Virtual KITTI style tree, split by sequence.
    Vkitti { root: PathBuf },
    /// Cityscapes tree; trains on `train`, evaluates on `eval_split`.
    Cityscapes { root: PathBuf, flow_source: FlowSource, resize: Option<(u32, u32)>, eval_split: String },
}

impl DatasetSource {
    pub fn kind(&self) -> &'static str {
        match self {
            DatasetSource::Synthetic(_) => "synthetic",
            DatasetSource::Vkitti { .. } => "vkitti",
            DatasetSource::Cityscapes { .. } => "cityscapes",
        }
    }

    pub fn default_classes(&self) -> &'static str {
        match self {
            DatasetSource::Synthetic(_) => "synthetic",
            DatasetSource::Vkitti { .. } => "vkitti14",
            DatasetSource::Cityscapes { .. } => "cityscapes12",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    /// Preset class-map name, used unless `class_map` is set.
    pub classes: String,
    /// CSV class map overriding the preset.
    pub class_map: Option<PathBuf>,
    pub split_fraction: f64,
    pub split_seed: u64,
}

impl DatasetConfig {
    pub fn new(source: DatasetSource) -> Self {
        DatasetConfig {
            classes: source.default_classes().to_string(),
            source,
            class_map: None,
            split_fraction: 0.8,
            split_seed: 0,
        }
    }

    pub fn class_map(&self) -> Result<ClassMap, HarnessError> {
        match &self.class_map {
            Some(path) => Ok(ClassMap::load(path)?),
            None => ClassMap::preset(&self.classes)
                .ok_or_else(|| HarnessError::Config(format!("unknown class preset `{}`", self.classes))),
        }
    }

    pub fn load(&self) -> Result<LoadedData, HarnessError> {
        let class_map = self.class_map()?;
        let (train, test, issues) = match &self.source {
            DatasetSource::Synthetic(bench) => {
                let (train, test) = split_train_test(scene_benchmark(bench)?, self.split_fraction, self.split_seed)?;
                (train, test, Vec::new())
            }
            DatasetSource::Vkitti { root } => {
                let report = load_vkitti(root, &class_map)?;
                let (train, test) = split_train_test(report.samples, self.split_fraction, self.split_seed)?;
                (train, test, report.issues)
            }
            DatasetSource::Cityscapes { root, flow_source, resize, eval_split } => {
                let opts = |split: &str| CityscapesOptions {
                    split: split.to_string(),
                    resize_to: *resize,
                    flow_source: *flow_source,
                    ..CityscapesOptions::default()
                };
                let train = load_cityscapes(root, &class_map, &opts("train"))?;
                let test = load_cityscapes(root, &class_map, &opts(eval_split))?;
                let mut issues = train.issues;
                issues.extend(test.issues);
                (train.samples, test.samples, issues)
            }
        };
        for issue in &issues {
            log::warn!("{issue}");
        }
        Ok(LoadedData { class_map, train, test, issues })
    }
}

#[derive(Debug)]
pub struct LoadedData {
    pub class_map: ClassMap,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub issues: Vec<DatasetIssue>,
}
