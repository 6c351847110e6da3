//! Encoder, decoder and the four architectures.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    dropout_forward, maxpool_backward, maxpool_forward, relu_backward, relu_forward, Conv2d, ConvTranspose2d, Param,
};
use super::scalar::Scalar;
use super::tensor::Tensor;
use super::weights::WeightFile;
use super::ModelError;
use crate::flow::{EncodingKind, NormStrategy};

/// Convolutions per encoder stage.
pub const STAGE_DEPTHS: [usize; 5] = [2, 2, 3, 3, 3];
/// Stage widths of the full-size encoder.
pub const VGG_WIDTHS: [usize; 5] = [64, 128, 256, 512, 512];
/// Input sides must be multiples of this.
pub const INPUT_MULTIPLE: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    RgbOnly,
    FlowOnly,
    RgbfEarly,
    TwoStream,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::RgbOnly, Variant::FlowOnly, Variant::RgbfEarly, Variant::TwoStream];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::RgbOnly => "rgb_only",
            Variant::FlowOnly => "flow_only",
            Variant::RgbfEarly => "rgbf_early",
            Variant::TwoStream => "two_stream",
        }
    }

    pub fn needs_rgb(self) -> bool {
        self != Variant::FlowOnly
    }

    pub fn needs_flow(self) -> bool {
        self != Variant::RgbOnly
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rgb_only" | "rgb" => Ok(Variant::RgbOnly),
            "flow_only" | "flow" => Ok(Variant::FlowOnly),
            "rgbf_early" | "rgbf" => Ok(Variant::RgbfEarly),
            "two_stream" | "rgb+f" => Ok(Variant::TwoStream),
            _ => Err(ModelError::InvalidSpec(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderScale {
    Full,
    Toy { factor: usize },
}

impl Default for EncoderScale {
    fn default() -> Self {
        EncoderScale::Toy { factor: 8 }
    }
}

/// How the two streams of a two-stream model feed the stage-3/4 skips.
/// The stage-5 tap is always summed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipFusion {
    #[default]
    Sum,
    RgbOnly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputNorm {
    /// Scale [0,255] to [0,1].
    UnitRange,
    /// Scale to [0,1], then subtract per-channel means.
    #[default]
    MeanSubtract,
}

pub const RGB_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const FLOW_MEAN: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub num_classes: usize,
    pub flow_encoding: EncodingKind,
    pub flow_norm: NormStrategy,
    pub encoder_scale: EncoderScale,
    pub dropout_p: f64,
    pub pretrained_rgb_weights: Option<PathBuf>,
    pub skip_fusion: SkipFusion,
    pub input_norm: InputNorm,
}

impl ModelSpec {
    pub fn new(variant: Variant, num_classes: usize) -> Self {
        ModelSpec {
            variant,
            num_classes,
            flow_encoding: EncodingKind::ColorWheel3Ch,
            flow_norm: NormStrategy::PerFrameMax,
            encoder_scale: EncoderScale::default(),
            dropout_p: 0.5,
            pretrained_rgb_weights: None,
            skip_fusion: SkipFusion::Sum,
            input_norm: InputNorm::MeanSubtract,
        }
    }

    pub fn input_channels_rgb(&self) -> usize {
        3
    }

    pub fn input_channels_flow(&self) -> usize {
        self.flow_encoding.channels()
    }

    pub fn widths(&self) -> [usize; 5] {
        match self.encoder_scale {
            EncoderScale::Full => VGG_WIDTHS,
            EncoderScale::Toy { factor } => VGG_WIDTHS.map(|w| (w / factor.max(1)).max(1)),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidSpec(m));
        if self.num_classes < 2 || self.num_classes > 255 {
            return bad(format!("num_classes must be in 2..=255, got {}", self.num_classes));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout_p must be in [0,1), got {}", self.dropout_p));
        }
        if let EncoderScale::Toy { factor } = self.encoder_scale {
            if factor == 0 {
                return bad("toy factor must be positive".into());
            }
        }
        if let NormStrategy::FixedCap(c) = self.flow_norm {
            if !(c > 0.0) {
                return bad(format!("flow cap must be positive, got {c}"));
            }
        }
        Ok(())
    }

    /// Whether two specs describe interchangeable parameter sets.
    pub fn same_architecture(&self, other: &ModelSpec) -> bool {
        self.variant == other.variant
            && self.num_classes == other.num_classes
            && self.flow_encoding == other.flow_encoding
            && self.flow_norm == other.flow_norm
            && self.encoder_scale == other.encoder_scale
            && self.skip_fusion == other.skip_fusion
            && self.input_norm == other.input_norm
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Rgb,
    Flow,
    /// Early fusion: RGB followed by flow channels.
    Rgbf,
}

impl Stream {
    pub fn prefix(self) -> &'static str {
        match self {
            Stream::Rgb => "rgb",
            Stream::Flow => "flow",
            Stream::Rgbf => "rgbf",
        }
    }

    pub fn in_channels(self, spec: &ModelSpec) -> usize {
        match self {
            Stream::Rgb => spec.input_channels_rgb(),
            Stream::Flow => spec.input_channels_flow(),
            Stream::Rgbf => spec.input_channels_rgb() + spec.input_channels_flow(),
        }
    }
}

pub enum Mode<'a> {
    Eval,
    Train { rng: &'a mut ChaCha8Rng },
}

impl Mode<'_> {
    fn training(&self) -> bool {
        matches!(self, Mode::Train { .. })
    }
}

/// Feature maps at 1/8, 1/16 and 1/32 of the input resolution.
pub type Taps<T> = [Tensor<T>; 3];

#[derive(Clone, Debug)]
pub struct Encoder<T> {
    pub stream: Stream,
    pub convs: Vec<Conv2d<T>>,
    relu_masks: Vec<Vec<bool>>,
    pool_args: Vec<Vec<u32>>,
}

pub fn build_encoder<T: Scalar>(
    spec: &ModelSpec,
    stream: Stream,
    rng: &mut ChaCha8Rng,
) -> Result<Encoder<T>, ModelError> {
    spec.validate()?;
    let mut convs = Vec::new();
    let mut in_ch = stream.in_channels(spec);
    for (s, (&depth, &width)) in STAGE_DEPTHS.iter().zip(&spec.widths()).enumerate() {
        for i in 0..depth {
            let name = format!("{}.conv{}_{}", stream.prefix(), s + 1, i + 1);
            let mut conv = Conv2d::new(&name, in_ch, width, 3);
            conv.init_kaiming(rng);
            convs.push(conv);
            in_ch = width;
        }
    }
    Ok(Encoder { stream, convs, relu_masks: Vec::new(), pool_args: Vec::new() })
}

impl<T: Scalar> Encoder<T> {
    pub fn forward(&mut self, x: &Tensor<T>, keep_cache: bool) -> Taps<T> {
        self.relu_masks.clear();
        self.pool_args.clear();
        let mut h = x.clone();
        let mut taps = Vec::with_capacity(3);
        let mut layer = 0;
        for (s, &depth) in STAGE_DEPTHS.iter().enumerate() {
            for _ in 0..depth {
                h = self.convs[layer].forward(&h, keep_cache);
                let mask = relu_forward(&mut h);
                if keep_cache {
                    self.relu_masks.push(mask);
                }
                layer += 1;
            }
            let (pooled, arg) = maxpool_forward(&h);
            if keep_cache {
                self.pool_args.push(arg);
            }
            h = pooled;
            if s >= 2 {
                taps.push(h.clone());
            }
        }
        taps.try_into().expect("three taps")
    }

    /// Backpropagates tap gradients; a missing tap gradient counts as zero.
    pub fn backward(&mut self, mut d_taps: [Option<Tensor<T>>; 3]) {
        let mut grad: Option<Tensor<T>> = None;
        let mut layer = self.convs.len();
        for s in (0..STAGE_DEPTHS.len()).rev() {
            if s >= 2 {
                if let Some(d) = d_taps[s - 2].take() {
                    grad = Some(match grad {
                        Some(mut g) => {
                            g.add_assign(&d);
                            g
                        }
                        None => d,
                    });
                }
            }
            let Some(g) = grad.take() else {
                // nothing flows below a stage that received no gradient
                layer -= STAGE_DEPTHS[s];
                self.relu_masks.truncate(layer);
                self.pool_args.truncate(s);
                continue;
            };
            let arg = self.pool_args.pop().expect("forward cache");
            let mut g = maxpool_backward(&g, &arg);
            for _ in 0..STAGE_DEPTHS[s] {
                layer -= 1;
                let mask = self.relu_masks.pop().expect("forward cache");
                relu_backward(&mut g, &mask);
                match self.convs[layer].backward(&g, layer > 0) {
                    Some(dx) => g = dx,
                    None => break,
                }
            }
            if layer > 0 {
                grad = Some(g);
            }
        }
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.convs.iter().flat_map(|c| c.params()).collect()
    }

    /// ReLU activity masks and pooling argmax indices cached by the latest
    /// training-mode forward pass.
    pub fn switch_pattern(&self) -> (&[Vec<bool>], &[Vec<u32>]) {
        (&self.relu_masks, &self.pool_args)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.convs.iter_mut().flat_map(|c| c.params_mut()).collect()
    }

    /// Loads convolution weights keyed `conv<stage>_<index>.{weight,bias}`.
    /// An early-fusion encoder only takes the RGB slice of its first layer.
    pub fn load_pretrained(&mut self, weights: &WeightFile) -> Result<(), ModelError> {
        let prefix = format!("{}.", self.stream.prefix());
        let rgb_in = 3;
        for (i, conv) in self.convs.iter_mut().enumerate() {
            let first_rgbf = i == 0 && self.stream == Stream::Rgbf;
            for p in conv.params_mut() {
                let key = p.name.trim_start_matches(&prefix).to_string();
                let (shape, data) = weights.get(&key).ok_or_else(|| ModelError::MissingWeight(key.clone()))?;
                let expected: Vec<usize> = if first_rgbf && p.shape.len() == 4 {
                    vec![p.shape[0], rgb_in, p.shape[2], p.shape[3]]
                } else {
                    p.shape.clone()
                };
                if shape != expected.as_slice() {
                    return Err(ModelError::WeightShapeMismatch { name: key, expected, found: shape.to_vec() });
                }
                if first_rgbf && p.shape.len() == 4 {
                    let (o, c, kk) = (p.shape[0], p.shape[1], p.shape[2] * p.shape[3]);
                    for oi in 0..o {
                        for ci in 0..rgb_in {
                            for k in 0..kk {
                                p.value[(oi * c + ci) * kk + k] = T::of_f64(data[(oi * rgb_in + ci) * kk + k] as f64);
                            }
                        }
                    }
                } else {
                    for (v, &d) in p.value.iter_mut().zip(data) {
                        *v = T::of_f64(d as f64);
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Decoder<T> {
    pub score5: Conv2d<T>,
    pub proj4: Conv2d<T>,
    pub proj3: Conv2d<T>,
    pub up2a: ConvTranspose2d<T>,
    pub up2b: ConvTranspose2d<T>,
    pub up8: ConvTranspose2d<T>,
    pub dropout_p: f64,
    drop_masks: Vec<Vec<T>>,
}

/// FCN8s-style decoder. Score and skip projections start at zero, the
/// upsampling kernels at bilinear interpolation.
pub fn build_decoder<T: Scalar>(spec: &ModelSpec) -> Result<Decoder<T>, ModelError> {
    spec.validate()?;
    let w = spec.widths();
    let k = spec.num_classes;
    let up = |name: &str, f| {
        let mut d = ConvTranspose2d::upsample(name, k, k, f);
        d.init_bilinear();
        d
    };
    Ok(Decoder {
        up2a: up("decoder.up2a", 2),
        up2b: up("decoder.up2b", 2),
        up8: up("decoder.up8", 8),
        score5: Conv2d::new("decoder.score5", w[4], k, 1),
        proj4: Conv2d::new("decoder.proj4", w[3], k, 1),
        proj3: Conv2d::new("decoder.proj3", w[2], k, 1),
        dropout_p: spec.dropout_p,
        drop_masks: Vec::new(),
    })
}

impl<T: Scalar> Decoder<T> {
    pub fn forward(&mut self, taps: &Taps<T>, mode: &mut Mode) -> Tensor<T> {
        let keep = mode.training();
        self.drop_masks.clear();
        let mut inputs: Vec<Tensor<T>> = taps.iter().rev().cloned().collect();
        if let Mode::Train { rng } = mode {
            if self.dropout_p > 0.0 {
                for x in &mut inputs {
                    let m = dropout_forward(x, self.dropout_p, rng);
                    self.drop_masks.push(m);
                }
            }
        }
        let [t5, t4, t3]: [Tensor<T>; 3] = inputs.try_into().expect("three taps");
        let s5 = self.score5.forward(&t5, keep);
        let mut u = self.up2a.forward(&s5, keep);
        u.add_assign(&self.proj4.forward(&t4, keep));
        let mut u = self.up2b.forward(&u, keep);
        u.add_assign(&self.proj3.forward(&t3, keep));
        self.up8.forward(&u, keep)
    }

    /// Returns tap gradients in tap order (stage 3, 4, 5).
    pub fn backward(&mut self, dlogits: &Tensor<T>) -> Taps<T> {
        let du = self.up8.backward(dlogits);
        let mut d3 = self.proj3.backward(&du, true).expect("dx");
        let du = self.up2b.backward(&du);
        let mut d4 = self.proj4.backward(&du, true).expect("dx");
        let ds5 = self.up2a.backward(&du);
        let mut d5 = self.score5.backward(&ds5, true).expect("dx");
        if !self.drop_masks.is_empty() {
            for (d, m) in [&mut d5, &mut d4, &mut d3].into_iter().zip(&self.drop_masks) {
                for (g, &k) in d.data.iter_mut().zip(m) {
                    *g *= k;
                }
            }
            self.drop_masks.clear();
        }
        [d3, d4, d5]
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        let mut v = Vec::new();
        v.extend(self.score5.params());
        v.extend(self.proj4.params());
        v.extend(self.proj3.params());
        v.extend(self.up2a.params());
        v.extend(self.up2b.params());
        v.extend(self.up8.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = Vec::new();
        v.extend(self.score5.params_mut());
        v.extend(self.proj4.params_mut());
        v.extend(self.proj3.params_mut());
        v.extend(self.up2a.params_mut());
        v.extend(self.up2b.params_mut());
        v.extend(self.up8.params_mut());
        v
    }
}

/// Network inputs in CNHW layout, already normalized.
#[derive(Clone, Debug, Default)]
pub struct Batch<T> {
    pub rgb: Option<Tensor<T>>,
    pub flow: Option<Tensor<T>>,
}

#[derive(Clone, Debug)]
pub struct Model<T> {
    pub spec: ModelSpec,
    /// RGB stream, or the early-fusion stream for `RgbfEarly`.
    pub rgb: Option<Encoder<T>>,
    pub flow: Option<Encoder<T>>,
    pub decoder: Decoder<T>,
}

/// Builds and initializes a model; the seed fixes every random weight.
pub fn build_model<T: Scalar>(spec: &ModelSpec, seed: u64) -> Result<Model<T>, ModelError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rgb, flow) = match spec.variant {
        Variant::RgbOnly => (Some(build_encoder(spec, Stream::Rgb, &mut rng)?), None),
        Variant::FlowOnly => (None, Some(build_encoder(spec, Stream::Flow, &mut rng)?)),
        Variant::RgbfEarly => (Some(build_encoder(spec, Stream::Rgbf, &mut rng)?), None),
        Variant::TwoStream => {
            let rgb = build_encoder(spec, Stream::Rgb, &mut rng)?;
            (Some(rgb), Some(build_encoder(spec, Stream::Flow, &mut rng)?))
        }
    };
    let mut model = Model { spec: spec.clone(), rgb, flow, decoder: build_decoder(spec)? };
    if let Some(path) = &spec.pretrained_rgb_weights {
        let weights = WeightFile::read(path)?;
        if let Some(enc) = model.rgb.as_mut() {
            enc.load_pretrained(&weights)?;
        }
    }
    Ok(model)
}

impl<T: Scalar> Model<T> {
    fn check_input(&self, t: &Option<Tensor<T>>, what: &'static str, channels: usize) -> Result<(), ModelError> {
        let t = t.as_ref().ok_or(ModelError::MissingModality(what))?;
        if t.channels != channels {
            return Err(ModelError::InputShape(format!("{what}: expected {channels} channels, got {}", t.channels)));
        }
        if t.height % INPUT_MULTIPLE != 0 || t.width % INPUT_MULTIPLE != 0 || t.height == 0 || t.width == 0 {
            return Err(ModelError::InputShape(format!(
                "{what}: spatial size {}x{} is not a positive multiple of {INPUT_MULTIPLE}",
                t.width, t.height
            )));
        }
        Ok(())
    }

    pub fn forward(&mut self, batch: &Batch<T>, mode: &mut Mode) -> Result<Tensor<T>, ModelError> {
        let variant = self.spec.variant;
        if variant.needs_rgb() {
            self.check_input(&batch.rgb, "rgb", self.spec.input_channels_rgb())?;
        }
        if variant.needs_flow() {
            self.check_input(&batch.flow, "flow", self.spec.input_channels_flow())?;
        }
        if let (Some(r), Some(f)) = (&batch.rgb, &batch.flow) {
            if variant.needs_rgb()
                && variant.needs_flow()
                && (r.batch, r.height, r.width) != (f.batch, f.height, f.width)
            {
                return Err(ModelError::InputShape("rgb and flow inputs differ in size".into()));
            }
        }
        let keep = mode.training();
        let taps = match variant {
            Variant::RgbOnly => self.rgb.as_mut().expect("rgb encoder").forward(batch.rgb.as_ref().unwrap(), keep),
            Variant::FlowOnly => self.flow.as_mut().expect("flow encoder").forward(batch.flow.as_ref().unwrap(), keep),
            Variant::RgbfEarly => {
                let x = batch.rgb.clone().unwrap().concat_channels(batch.flow.as_ref().unwrap());
                self.rgb.as_mut().expect("rgbf encoder").forward(&x, keep)
            }
            Variant::TwoStream => {
                let mut a = self.rgb.as_mut().expect("rgb encoder").forward(batch.rgb.as_ref().unwrap(), keep);
                let b = self.flow.as_mut().expect("flow encoder").forward(batch.flow.as_ref().unwrap(), keep);
                let fused = match self.spec.skip_fusion {
                    SkipFusion::Sum => 0,
                    SkipFusion::RgbOnly => 2,
                };
                for (ta, tb) in a.iter_mut().zip(&b).skip(fused) {
                    ta.add_assign(tb);
                }
                a
            }
        };
        Ok(self.decoder.forward(&taps, mode))
    }

    /// Accumulates gradients of all parameters from the logit gradient of the
    /// latest training-mode forward pass.
    pub fn backward(&mut self, dlogits: &Tensor<T>) {
        let [d3, d4, d5] = self.decoder.backward(dlogits);
        match self.spec.variant {
            Variant::RgbOnly | Variant::RgbfEarly => {
                self.rgb.as_mut().unwrap().backward([Some(d3), Some(d4), Some(d5)]);
            }
            Variant::FlowOnly => self.flow.as_mut().unwrap().backward([Some(d3), Some(d4), Some(d5)]),
            Variant::TwoStream => {
                let flow_taps = match self.spec.skip_fusion {
                    SkipFusion::Sum => [Some(d3.clone()), Some(d4.clone()), Some(d5.clone())],
                    SkipFusion::RgbOnly => [None, None, Some(d5.clone())],
                };
                self.flow.as_mut().unwrap().backward(flow_taps);
                self.rgb.as_mut().unwrap().backward([Some(d3), Some(d4), Some(d5)]);
            }
        }
    }

    /// All parameters in a fixed order: encoders (rgb, flow), then decoder.
    pub fn params(&self) -> Vec<&Param<T>> {
        let mut v = Vec::new();
        for enc in [&self.rgb, &self.flow].into_iter().flatten() {
            v.extend(enc.params());
        }
        v.extend(self.decoder.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = Vec::new();
        for enc in [&mut self.rgb, &mut self.flow].into_iter().flatten() {
            v.extend(enc.params_mut());
        }
        v.extend(self.decoder.params_mut());
        v
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(|p| p.zero_grad());
    }

    /// `coefficient * sum(w^2)` over weights (biases excluded).
    pub fn l2_penalty(&self, coefficient: f64) -> f64 {
        let sum: f64 = self
            .params()
            .iter()
            .filter(|p| p.decay)
            .map(|p| p.value.iter().map(|w| w.as_f64() * w.as_f64()).sum::<f64>())
            .sum();
        coefficient * sum
    }

    pub fn add_l2_grad(&mut self, coefficient: f64) {
        let c = T::of_f64(2.0 * coefficient);
        for p in self.params_mut().into_iter().filter(|p| p.decay) {
            for (g, &w) in p.grad.iter_mut().zip(&p.value) {
                *g += c * w;
            }
        }
    }
}
