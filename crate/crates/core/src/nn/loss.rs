use super::model::Model;
use super::scalar::Scalar;
use super::tensor::Tensor;
use super::ModelError;
use crate::SegMask;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSpec {
    pub l2_coefficient: f64,
    pub ignore_id: Option<u8>,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec { l2_coefficient: 5e-4, ignore_id: Some(255) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValue {
    /// Mean cross-entropy over counted pixels.
    pub data: f64,
    pub l2: f64,
}

impl LossValue {
    pub fn total(&self) -> f64 {
        self.data + self.l2
    }
}

#[derive(Clone, Debug)]
pub struct CrossEntropy<T> {
    /// Sum of per-pixel losses, accumulated in pixel order.
    pub sum: f64,
    pub counted: usize,
    /// Gradient of the mean loss with respect to the logits.
    pub grad: Tensor<T>,
}

impl<T> CrossEntropy<T> {
    pub fn mean(&self) -> f64 {
        self.sum / self.counted as f64
    }
}

/// Pixelwise softmax cross-entropy averaged over non-ignored pixels.
pub fn cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    masks: &[&SegMask],
    ignore_id: Option<u8>,
) -> Result<CrossEntropy<T>, ModelError> {
    let (k, n, h, w) = logits.dims();
    if masks.len() != n {
        return Err(ModelError::InputShape(format!("{} masks for a batch of {n}", masks.len())));
    }
    for m in masks {
        if (m.width(), m.height()) != (w, h) {
            return Err(ModelError::InputShape(format!("mask is {}x{}, logits are {w}x{h}", m.width(), m.height())));
        }
    }
    let plane = logits.plane();
    let counted: usize = masks.iter().map(|m| m.ids().iter().filter(|&&id| Some(id) != ignore_id).count()).sum();
    if counted == 0 {
        return Err(ModelError::AllPixelsIgnored);
    }
    for m in masks {
        if let Some(&id) = m.ids().iter().find(|&&id| Some(id) != ignore_id && id as usize >= k) {
            return Err(ModelError::InputShape(format!("mask id {id} outside {k} classes")));
        }
    }
    let inv = 1.0 / counted as f64;
    let mut grad = Tensor::zeros(k, n, h, w);
    let mut sum = 0.0;
    let mut z = vec![0.0f64; k];
    for (b, m) in masks.iter().enumerate() {
        for (p, &id) in m.ids().iter().enumerate() {
            if Some(id) == ignore_id {
                continue;
            }
            let i = b * h * w + p;
            for (c, zc) in z.iter_mut().enumerate() {
                *zc = logits.data[c * plane + i].as_f64();
            }
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            sum += lse - z[id as usize];
            for (c, &zc) in z.iter().enumerate() {
                let prob = (zc - lse).exp();
                let target = if c == id as usize { 1.0 } else { 0.0 };
                grad.data[c * plane + i] = T::of_f64((prob - target) * inv);
            }
        }
    }
    Ok(CrossEntropy { sum, counted, grad })
}

/// Data term plus L2 penalty; returns the logit gradient of the data term.
/// The penalty's own gradient is added by `Model::add_l2_grad`.
pub fn compute_loss<T: Scalar>(
    model: &Model<T>,
    logits: &Tensor<T>,
    masks: &[&SegMask],
    spec: &LossSpec,
) -> Result<(LossValue, Tensor<T>), ModelError> {
    let ce = cross_entropy(logits, masks, spec.ignore_id)?;
    let value = LossValue { data: ce.mean(), l2: model.l2_penalty(spec.l2_coefficient) };
    Ok((value, ce.grad))
}
