//! Sample-to-tensor conversion and inference.

use super::model::{Batch, InputNorm, Mode, Model, ModelSpec, FLOW_MEAN, RGB_MEAN};
use super::scalar::Scalar;
use super::tensor::Tensor;
use super::ModelError;
use crate::datasets::Sample;
use crate::flow::encode;
use crate::SegMask;

/// Stacks samples into network inputs. Only the modalities the variant
/// consumes are produced.
pub fn prepare_batch<T: Scalar>(spec: &ModelSpec, samples: &[&Sample]) -> Result<Batch<T>, ModelError> {
    let Some(first) = samples.first() else {
        return Err(ModelError::InputShape("empty batch".into()));
    };
    let (w, h, n) = (first.width(), first.height(), samples.len());
    if let Some(s) = samples.iter().find(|s| (s.width(), s.height()) != (w, h)) {
        return Err(ModelError::InputShape(format!(
            "sample `{}` is {}x{}, batch is {w}x{h}",
            s.frame_id,
            s.width(),
            s.height()
        )));
    }
    let plane = n * h * w;
    let mean = spec.input_norm == InputNorm::MeanSubtract;
    let mut batch = Batch::default();
    if spec.variant.needs_rgb() {
        let mut data = vec![T::zero(); 3 * plane];
        for (b, s) in samples.iter().enumerate() {
            for (p, px) in s.rgb.pixels().enumerate() {
                for c in 0..3 {
                    let v = px.0[c] as f64 / 255.0 - if mean { RGB_MEAN[c] } else { 0.0 };
                    data[c * plane + b * h * w + p] = T::of_f64(v);
                }
            }
        }
        batch.rgb = Some(Tensor::from_vec(3, n, h, w, data));
    }
    if spec.variant.needs_flow() {
        let ch = spec.input_channels_flow();
        let mut data = vec![T::zero(); ch * plane];
        for (b, s) in samples.iter().enumerate() {
            let flow = s.flow.as_ref().ok_or(ModelError::MissingModality("flow"))?;
            let enc = encode(flow, spec.flow_encoding, spec.flow_norm)?;
            for c in 0..ch {
                let dst = &mut data[c * plane + b * h * w..][..h * w];
                for (d, &v) in dst.iter_mut().zip(enc.channel(c)) {
                    *d = T::of_f64(v as f64 / 255.0 - if mean { FLOW_MEAN } else { 0.0 });
                }
            }
        }
        batch.flow = Some(Tensor::from_vec(ch, n, h, w, data));
    }
    Ok(batch)
}

/// Per-pixel argmax; ties go to the lower class id.
pub fn argmax_masks<T: Scalar>(logits: &Tensor<T>) -> Vec<SegMask> {
    let (k, n, h, w) = logits.dims();
    let plane = logits.plane();
    (0..n)
        .map(|b| {
            let ids = (0..h * w)
                .map(|p| {
                    let i = b * h * w + p;
                    let mut best = 0;
                    for c in 1..k {
                        if logits.data[c * plane + i] > logits.data[best * plane + i] {
                            best = c;
                        }
                    }
                    best as u8
                })
                .collect();
            SegMask::new(w, h, ids)
        })
        .collect()
}

pub fn predict<T: Scalar>(model: &mut Model<T>, sample: &Sample) -> Result<SegMask, ModelError> {
    let batch = prepare_batch(&model.spec, &[sample])?;
    let logits = model.forward(&batch, &mut Mode::Eval)?;
    Ok(argmax_masks(&logits).remove(0))
}
