use std::path::Path;

use super::config::TrainConfig;
use super::HarnessError;
use crate::datasets::{ClassMap, Sample};
use crate::metrics::{render_iou_by_class, render_summary, render_table, ConfusionMatrix, EvalReport, TableFormat};
use crate::nn::{argmax_masks, load_checkpoint, prepare_batch, Mode, Model};

/// Predicts every sample and accumulates one confusion matrix.
pub fn evaluate_model(
    model: &mut Model<f32>,
    samples: &[Sample],
    class_map: &ClassMap,
    batch_size: usize,
) -> Result<EvalReport, HarnessError> {
    if samples.is_empty() {
        return Err(HarnessError::EmptyDataset("evaluation"));
    }
    let mut cm = ConfusionMatrix::new(model.spec.num_classes);
    for chunk in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let batch = prepare_batch(&model.spec, &refs)?;
        let logits = model.forward(&batch, &mut Mode::Eval)?;
        for (sample, pred) in chunk.iter().zip(argmax_masks(&logits)) {
            cm.accumulate(&sample.mask, &pred, class_map.ignore_id())?;
        }
    }
    Ok(cm.report())
}

#[derive(Debug)]
pub struct Evaluation {
    pub report: EvalReport,
    /// Per-class table (CSV).
    pub csv: String,
    /// Per-class table (Markdown).
    pub markdown: String,
    /// Mean metrics row, Markdown.
    pub summary: String,
    /// Per-class IoU as one row, Markdown.
    pub iou_by_class: String,
}

/// Evaluates a checkpoint on the held-out split of the configured dataset.
pub fn evaluate(checkpoint: &Path, config: &TrainConfig) -> Result<Evaluation, HarnessError> {
    let data = config.dataset.load()?;
    let ck = load_checkpoint::<f32>(checkpoint, None)?;
    let mut model = ck.model;
    if model.spec.num_classes != data.class_map.len() {
        return Err(HarnessError::SpecMismatch(format!(
            "checkpoint has {} classes, dataset has {}",
            model.spec.num_classes,
            data.class_map.len()
        )));
    }
    let report = evaluate_model(&mut model, &data.test, &data.class_map, config.batch_size)?;
    let label = model.spec.variant.to_string();
    let rows = vec![(label, report.clone())];
    Ok(Evaluation {
        csv: render_table(&report, &data.class_map, TableFormat::Csv),
        markdown: render_table(&report, &data.class_map, TableFormat::Markdown),
        summary: render_summary(&rows, TableFormat::Markdown),
        iou_by_class: render_iou_by_class(&rows, &data.class_map),
        report,
    })
}
