use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::eval::evaluate_model;
use super::HarnessError;
use crate::datasets::{ClassMap, Sample};
use crate::nn::{
    build_model, cross_entropy, load_checkpoint, prepare_batch, save_checkpoint, Adam, Batch, Mode, Model, Tensor,
};
use crate::SegMask;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    /// Epoch 0 is the untrained model, evaluated without dropout.
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's counted pixels (data term only).
    pub train_loss: f64,
    /// Weight penalty at the end of the epoch.
    pub l2: f64,
    pub eval_mean_iou: Option<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    pub optimizer: Adam<f32>,
    pub log: Vec<EpochLog>,
    pub checkpoints: Vec<PathBuf>,
}

impl TrainOutcome {
    pub fn log_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,l2,eval_mean_iou\n");
        for row in &self.log {
            let iou = row.eval_mean_iou.map(|v| format!("{v:.6}")).unwrap_or_default();
            writeln!(out, "{},{:.8},{:.8},{}", row.epoch, row.train_loss, row.l2, iou).unwrap();
        }
        out
    }
}

/// Independent stream per (seed, epoch, batch, purpose) so a resumed run
/// draws exactly what an uninterrupted one would.
fn stream(seed: u64, epoch: usize, batch: usize, purpose: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(epoch as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(batch as u64).to_le_bytes());
    key[24..].copy_from_slice(&purpose.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

const SHUFFLE: u64 = 1;
const DROPOUT: u64 = 2;

/// Concatenates single-sample inputs along the batch axis.
fn stack(items: &[&Batch<f32>]) -> Batch<f32> {
    let join = |pick: fn(&Batch<f32>) -> &Option<Tensor<f32>>| -> Option<Tensor<f32>> {
        let first = pick(items[0]).as_ref()?;
        let (c, _, h, w) = first.dims();
        let n = items.len();
        let mut data = Vec::with_capacity(c * n * h * w);
        for ch in 0..c {
            for item in items {
                let t = pick(item).as_ref().expect("uniform modalities");
                data.extend_from_slice(&t.data[ch * h * w..(ch + 1) * h * w]);
            }
        }
        Some(Tensor::from_vec(c, n, h, w, data))
    };
    Batch { rgb: join(|b| &b.rgb), flow: join(|b| &b.flow) }
}

fn data_loss(
    model: &mut Model<f32>,
    inputs: &[Batch<f32>],
    masks: &[&SegMask],
    class_map: &ClassMap,
    batch_size: usize,
) -> Result<f64, HarnessError> {
    let (mut sum, mut counted) = (0.0, 0);
    for (chunk, mchunk) in inputs.chunks(batch_size).zip(masks.chunks(batch_size)) {
        let refs: Vec<&Batch<f32>> = chunk.iter().collect();
        let logits = model.forward(&stack(&refs), &mut Mode::Eval)?;
        let ce = cross_entropy(&logits, mchunk, class_map.ignore_id())?;
        sum += ce.sum;
        counted += ce.counted;
    }
    Ok(sum / counted as f64)
}

/// Loads the configured dataset and trains on its training split, with
/// periodic evaluation on the held-out split.
pub fn train(config: &TrainConfig, resume: Option<&Path>) -> Result<TrainOutcome, HarnessError> {
    config.validate()?;
    let data = config.dataset.load()?;
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
        let path = dir.join("config.resolved.toml");
        fs::write(&path, config.to_toml()).map_err(HarnessError::io(&path))?;
    }
    let outcome = train_on(config, &data.train, &data.test, &data.class_map, resume)?;
    if let Some(dir) = &config.output_dir {
        let path = dir.join("train_log.csv");
        fs::write(&path, outcome.log_csv()).map_err(HarnessError::io(&path))?;
    }
    Ok(outcome)
}

/// Trains on in-memory samples. Batch order comes from a per-epoch shuffle
/// and dropout masks from a per-batch stream, both derived from the seed, so
/// runs are reproducible and resumable.
pub fn train_on(
    config: &TrainConfig,
    train: &[Sample],
    eval: &[Sample],
    class_map: &ClassMap,
    resume: Option<&Path>,
) -> Result<TrainOutcome, HarnessError> {
    config.validate()?;
    if train.is_empty() {
        return Err(HarnessError::EmptyDataset("training"));
    }
    if config.model.num_classes != class_map.len() {
        return Err(HarnessError::SpecMismatch(format!(
            "model has {} classes, dataset has {}",
            config.model.num_classes,
            class_map.len()
        )));
    }
    let spec = &config.model;
    let (mut model, mut optimizer, start) = match resume {
        Some(path) => {
            let ck = load_checkpoint::<f32>(path, Some(spec))?;
            let mut opt = ck.optimizer;
            opt.config = config.optimizer;
            (ck.model, opt, ck.epoch + 1)
        }
        None => {
            let model: Model<f32> = build_model(spec, config.seed)?;
            let opt = Adam::new(config.optimizer, &model);
            (model, opt, 1)
        }
    };
    let inputs: Vec<Batch<f32>> = train.iter().map(|s| prepare_batch(spec, &[s])).collect::<Result<_, _>>()?;
    let masks: Vec<&SegMask> = train.iter().map(|s| &s.mask).collect();
    let ignore = class_map.ignore_id();
    let mut log = Vec::new();
    let mut checkpoints = Vec::new();
    if start == 1 {
        let loss = data_loss(&mut model, &inputs, &masks, class_map, config.batch_size)?;
        log.push(EpochLog {
            epoch: 0,
            train_loss: loss,
            l2: model.l2_penalty(config.l2_coefficient),
            eval_mean_iou: None,
        });
        log::info!("epoch 0: loss {loss:.5}");
    }
    for epoch in start..=config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut stream(config.seed, epoch, 0, SHUFFLE));
        let (mut sum, mut counted) = (0.0, 0usize);
        for (bi, idx) in order.chunks(config.batch_size).enumerate() {
            let refs: Vec<&Batch<f32>> = idx.iter().map(|&i| &inputs[i]).collect();
            let batch_masks: Vec<&SegMask> = idx.iter().map(|&i| masks[i]).collect();
            let mut rng = stream(config.seed, epoch, bi, DROPOUT);
            model.zero_grad();
            let logits = model.forward(&stack(&refs), &mut Mode::Train { rng: &mut rng })?;
            let ce = match cross_entropy(&logits, &batch_masks, ignore) {
                Ok(ce) => ce,
                Err(crate::nn::ModelError::AllPixelsIgnored) => continue,
                Err(e) => return Err(e.into()),
            };
            if !ce.sum.is_finite() {
                return Err(HarnessError::NonFiniteLoss { epoch, batch: bi });
            }
            model.backward(&ce.grad);
            model.add_l2_grad(config.l2_coefficient);
            optimizer.step(&mut model);
            sum += ce.sum;
            counted += ce.counted;
        }
        let loss = if counted > 0 { sum / counted as f64 } else { 0.0 };
        let periodic = config.eval_every > 0 && epoch % config.eval_every == 0;
        let last = epoch == config.epochs;
        let eval_mean_iou = if periodic && !eval.is_empty() {
            evaluate_model(&mut model, eval, class_map, config.batch_size)?.mean.iou
        } else {
            None
        };
        log::info!(
            "epoch {epoch}: loss {loss:.5}{}",
            eval_mean_iou.map(|v| format!(", eval mean IoU {v:.4}")).unwrap_or_default()
        );
        log.push(EpochLog { epoch, train_loss: loss, l2: model.l2_penalty(config.l2_coefficient), eval_mean_iou });
        if let Some(dir) = &config.checkpoint_dir {
            if periodic || last {
                let path = dir.join(format!("epoch_{epoch:04}.ckpt"));
                save_checkpoint(&path, &model, &optimizer, epoch)?;
                checkpoints.push(path);
            }
        }
    }
    Ok(TrainOutcome { model, optimizer, log, checkpoints })
}
