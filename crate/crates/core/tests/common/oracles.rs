//! Reference computations written independently of the library code.

use std::collections::HashSet;

use flowseg::datasets::{scene_benchmark, BenchmarkConfig, ClassMap, Sample, SceneKind};
use flowseg::harness::{evaluate_model, train_on, DatasetConfig, DatasetSource, TrainConfig};
use flowseg::nn::{build_model, Batch, EncoderScale, Mode, Model, ModelSpec, Scalar, Tensor, Variant};
use flowseg::{FlowField, SegMask};
use image::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Color circle rebuilt from its segment endpoints: each run of `n` spokes
/// blends linearly from one primary/secondary color towards the next.
pub fn wheel_lut() -> Vec<[f64; 3]> {
    let red = [255.0, 0.0, 0.0];
    let yellow = [255.0, 255.0, 0.0];
    let green = [0.0, 255.0, 0.0];
    let cyan = [0.0, 255.0, 255.0];
    let blue = [0.0, 0.0, 255.0];
    let magenta = [255.0, 0.0, 255.0];
    let runs = [
        (15, red, yellow),
        (6, yellow, green),
        (4, green, cyan),
        (11, cyan, blue),
        (13, blue, magenta),
        (6, magenta, red),
    ];
    let mut lut = Vec::new();
    for (n, from, to) in runs {
        for i in 0..n {
            let t = i as f64 / n as f64;
            lut.push([0, 1, 2].map(|c| from[c] + (to[c] - from[c]) * t));
        }
    }
    lut
}

/// Fractional LUT index of a direction; zero vectors sit at index 0.
pub fn wheel_index(u: f64, v: f64) -> f64 {
    let n = 55.0;
    if u == 0.0 && v == 0.0 {
        return 0.0;
    }
    let turns = v.atan2(u) / (2.0 * std::f64::consts::PI);
    let turns = if turns < 0.0 { turns + 1.0 } else { turns };
    (turns * n) % n
}

/// Expected color for fractional index `k` at saturation `s`.
pub fn wheel_color(lut: &[[f64; 3]], k: f64, s: f64) -> [f64; 3] {
    let n = lut.len();
    let k = k.rem_euclid(n as f64);
    let k0 = k.floor() as usize % n;
    let k1 = (k0 + 1) % n;
    let f = k - k.floor();
    [0, 1, 2].map(|c| {
        let hue = lut[k0][c] + f * (lut[k1][c] - lut[k0][c]);
        255.0 - s * (255.0 - hue)
    })
}

pub fn random_field(rng: &mut ChaCha8Rng, width: usize, height: usize, scale: f32) -> FlowField {
    let n = width * height;
    let u = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    let v = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    FlowField::new(width, height, u, v)
}

/// Rotates every vector by a whole number of quarter turns, exactly.
pub fn quarter_turns(flow: &FlowField, turns: u32) -> FlowField {
    let (mut u, mut v) = (flow.u().to_vec(), flow.v().to_vec());
    for _ in 0..turns % 4 {
        let nu: Vec<f32> = v.iter().map(|&x| -x).collect();
        v = u;
        u = nu;
    }
    FlowField::new(flow.width(), flow.height(), u, v)
}

/// Smoothed random texture with integer-pixel translation `d` between the
/// two frames, so `prev(x) = next(x + d)` holds exactly.
pub fn textured_pair(seed: u64, width: usize, height: usize, d: (i32, i32)) -> (GrayImage, GrayImage) {
    let pad = 8usize;
    let (bw, bh) = (width + 2 * pad, height + 2 * pad);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut big: Vec<f64> = (0..bw * bh).map(|_| rng.random_range(0.0..1.0)).collect();
    for _ in 0..2 {
        big = box_blur(&big, bw, bh, 1);
    }
    let (lo, hi) = big.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    let crop = |ox: i32, oy: i32| {
        GrayImage::from_fn(width as u32, height as u32, |x, y| {
            let (bx, by) = ((x as i32 + ox) as usize, (y as i32 + oy) as usize);
            let t = (big[by * bw + bx] - lo) / (hi - lo);
            image::Luma([(t * 255.0).round() as u8])
        })
    };
    let p = pad as i32;
    (crop(p, p), crop(p - d.0, p - d.1))
}

fn box_blur(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let (mut sum, mut n) = (0.0, 0.0);
            for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
                for xx in x.saturating_sub(r)..(x + r + 1).min(w) {
                    sum += src[yy * w + xx];
                    n += 1.0;
                }
            }
            out[y * w + x] = sum / n;
        }
    }
    out
}

/// Median endpoint error against a constant `d`, ignoring a border of `margin` pixels.
pub fn median_epe(flow: &FlowField, d: (f64, f64), margin: usize) -> f64 {
    let mut errs = Vec::new();
    for y in margin..flow.height() - margin {
        for x in margin..flow.width() - margin {
            let (u, v) = flow.at(x, y);
            errs.push((u as f64 - d.0).hypot(v as f64 - d.1));
        }
    }
    errs.sort_by(|a, b| a.total_cmp(b));
    errs[errs.len() / 2]
}

/// Per-class [IoU, precision, recall, F] from pixel sets.
pub fn brute_force_metrics(truth: &SegMask, pred: &SegMask, classes: u8, ignore: Option<u8>) -> Vec<[Option<f64>; 4]> {
    let kept: Vec<usize> = (0..truth.ids().len()).filter(|&i| Some(truth.ids()[i]) != ignore).collect();
    (0..classes)
        .map(|c| {
            let t: HashSet<usize> = kept.iter().copied().filter(|&i| truth.ids()[i] == c).collect();
            let p: HashSet<usize> = kept.iter().copied().filter(|&i| pred.ids()[i] == c).collect();
            let inter = t.intersection(&p).count();
            let union = t.union(&p).count();
            let frac = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
            [frac(inter, union), frac(inter, p.len()), frac(inter, t.len()), frac(2 * inter, t.len() + p.len())]
        })
        .collect()
}

pub fn toy_spec(variant: Variant, classes: usize) -> ModelSpec {
    ModelSpec { encoder_scale: EncoderScale::Toy { factor: 16 }, dropout_p: 0.0, ..ModelSpec::new(variant, classes) }
}

/// Uniform values at Kaiming-like scale for every parameter, biases included.
pub fn randomize<T: Scalar>(model: &mut Model<T>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in model.params_mut() {
        let fan_in: usize = if p.shape.len() == 4 { p.shape[1..].iter().product() } else { 1 };
        let scale = (3.0 / fan_in as f64).sqrt();
        for v in &mut p.value {
            *v = T::of_f64(rng.random_range(-scale..scale));
        }
    }
}

pub fn random_tensor(c: usize, n: usize, side: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_vec(c, n, side, side, (0..c * n * side * side).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Largest output deviation after exchanging both the encoder weights and
/// the inputs of a random two-stream model.
pub fn swap_symmetry_deviation(draw: u64) -> f64 {
    let mut model: Model<f64> = build_model(&toy_spec(Variant::TwoStream, 3), draw).unwrap();
    randomize(&mut model, 100 + draw);
    let mut rng = ChaCha8Rng::seed_from_u64(draw);
    let (a, b) = (random_tensor(3, 2, 32, &mut rng), random_tensor(3, 2, 32, &mut rng));
    let y = model.forward(&Batch { rgb: Some(a.clone()), flow: Some(b.clone()) }, &mut Mode::Eval).unwrap();

    let mut swapped = model.clone();
    let (rgb, flow) = (model.rgb.as_ref().unwrap(), model.flow.as_ref().unwrap());
    let (srgb, sflow) = (swapped.rgb.as_mut().unwrap(), swapped.flow.as_mut().unwrap());
    for (dst, src) in srgb.params_mut().into_iter().zip(flow.params()) {
        dst.value.clone_from(&src.value);
    }
    for (dst, src) in sflow.params_mut().into_iter().zip(rgb.params()) {
        dst.value.clone_from(&src.value);
    }
    let ys = swapped.forward(&Batch { rgb: Some(b), flow: Some(a) }, &mut Mode::Eval).unwrap();
    y.data.iter().zip(&ys.data).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// Whether an early-fusion model with zeroed flow kernels produces exactly
/// the logits of the RGB-only model holding the remaining weights.
pub fn rgbf_reduces_exactly(draw: u64) -> bool {
    let mut rgbf: Model<f64> = build_model(&toy_spec(Variant::RgbfEarly, 4), draw).unwrap();
    randomize(&mut rgbf, 200 + draw);
    let first = &mut rgbf.rgb.as_mut().unwrap().convs[0];
    let (o, c) = (first.out_channels, first.in_channels);
    for oi in 0..o {
        for ci in 3..c {
            first.weight.value[(oi * c + ci) * 9..][..9].fill(0.0);
        }
    }
    let mut rgb: Model<f64> = build_model(&toy_spec(Variant::RgbOnly, 4), 0).unwrap();
    for (dst, src) in rgb.params_mut().into_iter().zip(rgbf.params()) {
        if dst.shape == src.shape {
            dst.value.clone_from(&src.value);
        } else {
            for oi in 0..o {
                dst.value[oi * 27..][..27].copy_from_slice(&src.value[oi * c * 9..][..27]);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(draw);
    let x = random_tensor(3, 1, 32, &mut rng);
    let flow = random_tensor(3, 1, 32, &mut rng);
    let y = rgbf.forward(&Batch { rgb: Some(x.clone()), flow: Some(flow) }, &mut Mode::Eval).unwrap();
    let y0 = rgb.forward(&Batch { rgb: Some(x), flow: None }, &mut Mode::Eval).unwrap();
    y.data == y0.data
}

/// The fixed 20-frame set: two sequences of distinct objects.
pub fn overfit_set() -> (Vec<Sample>, ClassMap) {
    let bench = BenchmarkConfig { kind: SceneKind::Distinct, sequences: 2, frames_per_sequence: 10, size: 64, seed: 5 };
    (scene_benchmark(&bench).unwrap(), ClassMap::synthetic())
}

pub struct OverfitResult {
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub train_mean_iou: f64,
}

/// Fifty epochs of RGB-only training on the 20-frame set.
pub fn overfit_run() -> OverfitResult {
    let (samples, class_map) = overfit_set();
    assert_eq!(samples.len(), 20);
    let bench = BenchmarkConfig { kind: SceneKind::Distinct, sequences: 2, frames_per_sequence: 10, size: 64, seed: 5 };
    let mut cfg = TrainConfig::new(Variant::RgbOnly, DatasetConfig::new(DatasetSource::Synthetic(bench)), 50).unwrap();
    cfg.optimizer.learning_rate = 1e-3;
    cfg.batch_size = 4;
    let mut out = train_on(&cfg, &samples, &[], &class_map, None).unwrap();
    let report = evaluate_model(&mut out.model, &samples, &class_map, 8).unwrap();
    OverfitResult {
        epochs: out.log.len() - 1,
        initial_loss: out.log[0].train_loss,
        final_loss: out.log.last().unwrap().train_loss,
        train_mean_iou: report.mean.iou.unwrap_or(0.0),
    }
}
