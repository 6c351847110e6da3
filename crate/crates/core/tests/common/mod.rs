//! Helpers shared by integration tests and the acceptance runner.
#![allow(dead_code)]

mod oracles;
#[allow(unused_imports)]
pub use oracles::*;

use flowseg::nn::{build_model, compute_loss, Batch, EncoderScale, LossSpec, Mode, Model, ModelSpec, Tensor, Variant};
use flowseg::{EncodingKind, SegMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_STEP: f64 = 1e-3;
pub const GRAD_TOL: f64 = 1e-3;

#[derive(Debug)]
pub struct LayerCheck {
    pub kind: &'static str,
    pub samples: usize,
    /// Draws rejected because the perturbation flipped a ReLU or pooling switch.
    pub kink_skips: usize,
    pub max_rel_err: f64,
}

fn layer_kind(name: &str) -> &'static str {
    if name.contains(".up") {
        "deconv"
    } else if name.starts_with("decoder.") {
        "conv1x1"
    } else {
        "conv3x3"
    }
}

/// Small early-fusion model (one stream, four input channels) with every
/// parameter drawn at random so no unit starts dead or zero-initialized.
pub fn grad_check_model(seed: u64) -> (Model<f64>, Batch<f64>, Vec<SegMask>) {
    let spec = ModelSpec {
        encoder_scale: EncoderScale::Toy { factor: 64 },
        dropout_p: 0.0,
        flow_encoding: EncodingKind::Mag1Ch,
        ..ModelSpec::new(Variant::RgbfEarly, 3)
    };
    let mut model: Model<f64> = build_model(&spec, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    for p in model.params_mut() {
        let fan_in: usize = if p.shape.len() == 4 { p.shape[1..].iter().product() } else { 1 };
        let std = (3.0 / fan_in as f64).sqrt();
        for v in &mut p.value {
            let g: f64 = rng.random_range(-1.0..1.0);
            *v = if p.decay { g * std * 1.7 } else { 0.05 + 0.1 * g };
        }
    }
    let side = 32;
    let mut tensor = |c: usize| {
        let data = (0..c * side * side).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_vec(c, 1, side, side, data)
    };
    let batch = Batch { rgb: Some(tensor(3)), flow: Some(tensor(1)) };
    let ids = (0..side * side).map(|_| if rng.random_bool(0.1) { 255 } else { rng.random_range(0..3u8) }).collect();
    (model, batch, vec![SegMask::new(side, side, ids)])
}

type Pattern = (Vec<Vec<bool>>, Vec<Vec<u32>>);

/// Loss (data + L2) and the piecewise-linear switch pattern it was evaluated on.
fn probe(model: &mut Model<f64>, batch: &Batch<f64>, masks: &[SegMask], spec: &LossSpec) -> (f64, Pattern) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let logits = model.forward(batch, &mut Mode::Train { rng: &mut rng }).unwrap();
    let (relu, pool) = model.rgb.as_ref().unwrap().switch_pattern();
    let pattern = (relu.to_vec(), pool.to_vec());
    let refs: Vec<&SegMask> = masks.iter().collect();
    (compute_loss(model, &logits, &refs, spec).unwrap().0.total(), pattern)
}

/// Compares analytical gradients of data term + L2 penalty with central
/// differences on `per_kind` random parameters of each layer type. Draws
/// whose two probes straddle a ReLU or pooling switch are redrawn, since the
/// loss is not differentiable across them.
pub fn gradient_check(seed: u64, per_kind: usize) -> (usize, Vec<LayerCheck>) {
    let (mut model, batch, masks) = grad_check_model(seed);
    let spec = LossSpec::default();
    let refs: Vec<&SegMask> = masks.iter().collect();

    model.zero_grad();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logits = model.forward(&batch, &mut Mode::Train { rng: &mut rng }).unwrap();
    let (_, dlogits) = compute_loss(&model, &logits, &refs, &spec).unwrap();
    model.backward(&dlogits);
    model.add_l2_grad(spec.l2_coefficient);

    let mut pool: Vec<(&'static str, usize, usize, f64)> = Vec::new();
    for (pi, p) in model.params().iter().enumerate() {
        for (i, &g) in p.grad.iter().enumerate() {
            pool.push((layer_kind(&p.name), pi, i, g));
        }
    }
    let num_params = pool.len();
    let mut pick = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut out = Vec::new();
    for kind in ["conv3x3", "conv1x1", "deconv"] {
        let cands: Vec<_> = pool.iter().filter(|c| c.0 == kind).collect();
        let mut check = LayerCheck { kind, samples: 0, kink_skips: 0, max_rel_err: 0.0 };
        while check.samples < per_kind && check.kink_skips < 20 * per_kind {
            let &(_, pi, i, analytic) = cands[pick.random_range(0..cands.len())];
            let orig = model.params()[pi].value[i];
            model.params_mut()[pi].value[i] = orig + GRAD_STEP;
            let (up, pat_up) = probe(&mut model, &batch, &masks, &spec);
            model.params_mut()[pi].value[i] = orig - GRAD_STEP;
            let (down, pat_down) = probe(&mut model, &batch, &masks, &spec);
            model.params_mut()[pi].value[i] = orig;
            if pat_up != pat_down {
                check.kink_skips += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * GRAD_STEP);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            check.max_rel_err = check.max_rel_err.max((analytic - numeric).abs() / denom);
            check.samples += 1;
        }
        out.push(check);
    }
    (num_params, out)
}
