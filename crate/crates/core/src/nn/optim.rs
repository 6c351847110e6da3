use serde::{Deserialize, Serialize};

use super::model::Model;
use super::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-5, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam with bias-corrected moments, one moment pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub(crate) m: Vec<Vec<T>>,
    pub(crate) v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, model: &Model<T>) -> Self {
        let zeros = |n: usize| vec![T::zero(); n];
        let params = model.params();
        Adam {
            config,
            step: 0,
            m: params.iter().map(|p| zeros(p.len())).collect(),
            v: params.iter().map(|p| zeros(p.len())).collect(),
        }
    }

    /// Applies one update from the gradients currently held by the model.
    pub fn step(&mut self, model: &mut Model<T>) {
        self.step += 1;
        let AdamConfig { learning_rate: lr, beta1: b1, beta2: b2, epsilon: eps } = self.config;
        let t = self.step as i32;
        let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
        for ((p, m), v) in model.params_mut().into_iter().zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.value.len() {
                let g = p.grad[i].as_f64();
                let mi = b1 * m[i].as_f64() + (1.0 - b1) * g;
                let vi = b2 * v[i].as_f64() + (1.0 - b2) * g * g;
                m[i] = T::of_f64(mi);
                v[i] = T::of_f64(vi);
                let update = lr * (mi / c1) / ((vi / c2).sqrt() + eps);
                p.value[i] = T::of_f64(p.value[i].as_f64() - update);
            }
        }
    }
}
