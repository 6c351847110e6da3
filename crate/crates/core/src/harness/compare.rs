use super::config::TrainConfig;
use super::eval::evaluate_model;
use super::train::{train_on, EpochLog};
use super::HarnessError;
use crate::datasets::ClassMap;
use crate::metrics::{render_iou_by_class, render_summary, EvalReport, TableFormat};
use crate::nn::ModelSpec;

#[derive(Debug)]
pub struct Comparison {
    pub class_map: ClassMap,
    /// One row per config, labelled by variant.
    pub rows: Vec<(String, EvalReport)>,
    pub logs: Vec<Vec<EpochLog>>,
}

impl Comparison {
    /// Mean IoU / precision / recall / F-score per variant.
    pub fn summary(&self, format: TableFormat) -> String {
        render_summary(&self.rows, format)
    }

    pub fn iou_by_class(&self) -> String {
        render_iou_by_class(&self.rows, &self.class_map)
    }
}

/// Trains and evaluates each config on one shared dataset load. Configs may
/// differ only in the model variant.
pub fn run_comparison(configs: &[TrainConfig]) -> Result<Comparison, HarnessError> {
    let first = configs.first().ok_or_else(|| HarnessError::Config("no configurations to compare".into()))?;
    for c in configs {
        c.validate()?;
        if c.model.num_classes != first.model.num_classes {
            return Err(HarnessError::SpecMismatch(format!(
                "num_classes differs: {} vs {}",
                first.model.num_classes, c.model.num_classes
            )));
        }
        let same_model = ModelSpec { variant: first.model.variant, ..c.model.clone() } == first.model;
        let same_rest = TrainConfig { model: first.model.clone(), output_dir: None, checkpoint_dir: None, ..c.clone() }
            == TrainConfig { output_dir: None, checkpoint_dir: None, ..first.clone() };
        if !same_model || !same_rest {
            return Err(HarnessError::Config(format!(
                "comparison configs may differ only in model.variant ({} vs {})",
                first.model.variant, c.model.variant
            )));
        }
    }
    let data = first.dataset.load()?;
    let mut rows = Vec::new();
    let mut logs = Vec::new();
    for c in configs {
        log::info!("training {}", c.model.variant);
        let mut outcome = train_on(c, &data.train, &data.test, &data.class_map, None)?;
        let report = evaluate_model(&mut outcome.model, &data.test, &data.class_map, c.batch_size)?;
        rows.push((c.model.variant.to_string(), report));
        logs.push(outcome.log);
    }
    Ok(Comparison { class_map: data.class_map, rows, logs })
}
