//! Flat key-value configuration (TOML with dotted keys). Every key is listed
//! in [`CONFIG_KEYS`]; anything else is rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::Value;

use super::data::{DatasetConfig, DatasetSource};
use super::HarnessError;
use crate::datasets::{BenchmarkConfig, FlowSource, ObjectShape, SceneKind, SynthObject, SynthSceneSpec, TextureMode};
use crate::flow::{EncodingKind, NormStrategy};
use crate::nn::{AdamConfig, EncoderScale, InputNorm, ModelSpec, SkipFusion, Variant};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelSpec,
    pub optimizer: AdamConfig,
    pub l2_coefficient: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Evaluate and checkpoint every this many epochs; 0 only checkpoints at the end.
    pub eval_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
}

impl TrainConfig {
    /// Defaults for everything but the variant, dataset and epoch count.
    pub fn new(variant: Variant, dataset: DatasetConfig, epochs: usize) -> Result<Self, HarnessError> {
        let num_classes = dataset.class_map()?.len();
        Ok(TrainConfig {
            model: ModelSpec::new(variant, num_classes),
            optimizer: AdamConfig::default(),
            l2_coefficient: 5e-4,
            epochs,
            batch_size: 8,
            seed: 0,
            eval_every: 0,
            checkpoint_dir: None,
            output_dir: None,
            dataset,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.model.validate()?;
        let bad = |m: String| Err(HarnessError::Config(m));
        let o = &self.optimizer;
        if !(o.learning_rate >= 0.0 && o.learning_rate.is_finite()) {
            return bad(format!("optimizer.learning_rate must be non-negative, got {}", o.learning_rate));
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || !(o.epsilon > 0.0) {
            return bad("optimizer betas must lie in [0,1) and epsilon must be positive".into());
        }
        if !(self.l2_coefficient >= 0.0) {
            return bad("train.l2_coefficient must be non-negative".into());
        }
        if self.batch_size == 0 {
            return bad("train.batch_size must be at least 1".into());
        }
        Ok(())
    }

    /// The fully resolved configuration, defaults included, in the same
    /// flat format [`parse_config`] reads.
    pub fn to_toml(&self) -> String {
        let m = &self.model;
        let mut kv: Vec<(&str, Value)> =
            vec![("model.variant", m.variant.as_str().into()), ("model.num_classes", (m.num_classes as i64).into())];
        match m.encoder_scale {
            EncoderScale::Full => kv.push(("model.encoder_scale", "full".into())),
            EncoderScale::Toy { factor } => {
                kv.push(("model.encoder_scale", "toy".into()));
                kv.push(("model.toy_factor", (factor as i64).into()));
            }
        }
        kv.push(("model.dropout_p", m.dropout_p.into()));
        if let Some(p) = &m.pretrained_rgb_weights {
            kv.push(("model.pretrained_rgb_weights", p.display().to_string().into()));
        }
        kv.push(("model.skip_fusion", enum_str(&m.skip_fusion).into()));
        kv.push(("model.input_norm", enum_str(&m.input_norm).into()));
        kv.push(("flow.encoding", m.flow_encoding.as_str().into()));
        match m.flow_norm {
            NormStrategy::PerFrameMax => kv.push(("flow.norm", "per_frame_max".into())),
            NormStrategy::FixedCap(c) => {
                kv.push(("flow.norm", "fixed_cap".into()));
                kv.push(("flow.cap", (c as f64).into()));
            }
        }
        let o = &self.optimizer;
        kv.push(("optimizer.learning_rate", o.learning_rate.into()));
        kv.push(("optimizer.beta1", o.beta1.into()));
        kv.push(("optimizer.beta2", o.beta2.into()));
        kv.push(("optimizer.epsilon", o.epsilon.into()));
        kv.push(("train.l2_coefficient", self.l2_coefficient.into()));
        kv.push(("train.epochs", (self.epochs as i64).into()));
        kv.push(("train.batch_size", (self.batch_size as i64).into()));
        kv.push(("train.seed", (self.seed as i64).into()));
        kv.push(("train.eval_every", (self.eval_every as i64).into()));
        if let Some(p) = &self.checkpoint_dir {
            kv.push(("train.checkpoint_dir", p.display().to_string().into()));
        }
        let d = &self.dataset;
        kv.push(("dataset.kind", d.source.kind().into()));
        match &d.source {
            DatasetSource::Synthetic(b) => {
                kv.push(("dataset.scene", enum_str(&b.kind).into()));
                kv.push(("dataset.sequences", (b.sequences as i64).into()));
                kv.push(("dataset.frames_per_sequence", (b.frames_per_sequence as i64).into()));
                kv.push(("dataset.size", (b.size as i64).into()));
                kv.push(("dataset.seed", (b.seed as i64).into()));
            }
            DatasetSource::Vkitti { root } => kv.push(("dataset.root", root.display().to_string().into())),
            DatasetSource::Cityscapes { root, flow_source, resize, eval_split } => {
                kv.push(("dataset.root", root.display().to_string().into()));
                kv.push(("dataset.flow_source", enum_str(flow_source).into()));
                if let Some((w, h)) = resize {
                    kv.push(("dataset.resize", Value::Array(vec![(*w as i64).into(), (*h as i64).into()])));
                }
                kv.push(("dataset.eval_split", eval_split.as_str().into()));
            }
        }
        kv.push(("dataset.classes", d.classes.as_str().into()));
        if let Some(p) = &d.class_map {
            kv.push(("dataset.class_map", p.display().to_string().into()));
        }
        kv.push(("dataset.split_fraction", d.split_fraction.into()));
        kv.push(("dataset.split_seed", (d.split_seed as i64).into()));
        if let Some(p) = &self.output_dir {
            kv.push(("output.dir", p.display().to_string().into()));
        }
        kv.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn enum_str<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => panic!("unit enum expected, got {other:?}"),
    }
}

fn parse_enum<T: for<'de> Deserialize<'de>>(key: &str, s: &str) -> Result<T, HarnessError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| HarnessError::Config(format!("{key}: unsupported value `{s}`")))
}

/// Every accepted training-config key with a one-line description.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("model.variant", "rgb_only | flow_only | rgbf_early | two_stream (required)"),
    ("model.num_classes", "class count; defaults to the class map size"),
    ("model.encoder_scale", "toy | full (default toy)"),
    ("model.toy_factor", "width divisor at toy scale (default 8)"),
    ("model.dropout_p", "dropout before the 1x1 convolutions (default 0.5)"),
    ("model.pretrained_rgb_weights", "weight file for the RGB encoder"),
    ("model.skip_fusion", "sum | rgb_only: two-stream stage-3/4 skips (default sum)"),
    ("model.input_norm", "mean_subtract | unit_range (default mean_subtract)"),
    ("flow.encoding", "mag_1ch | mag_3ch | mag_dir_2ch | color_wheel (default color_wheel)"),
    ("flow.norm", "per_frame_max | fixed_cap (default per_frame_max)"),
    ("flow.cap", "magnitude cap in pixels for fixed_cap"),
    ("optimizer.learning_rate", "Adam step size (default 1e-5)"),
    ("optimizer.beta1", "default 0.9"),
    ("optimizer.beta2", "default 0.999"),
    ("optimizer.epsilon", "default 1e-8"),
    ("train.l2_coefficient", "weight penalty factor (default 5e-4)"),
    ("train.epochs", "number of epochs (required)"),
    ("train.batch_size", "default 8 at toy scale, 2 at full scale"),
    ("train.seed", "seed for initialization, shuffling and dropout (default 0)"),
    ("train.eval_every", "evaluate and checkpoint every N epochs; 0 = end only (default 0)"),
    ("train.checkpoint_dir", "where checkpoints go; unset = none written"),
    ("dataset.kind", "synthetic | vkitti | cityscapes (required)"),
    ("dataset.root", "dataset root directory (vkitti, cityscapes)"),
    ("dataset.classes", "class preset: synthetic | vkitti14 | cityscapes12 | cityscapes19"),
    ("dataset.class_map", "CSV class map overriding the preset"),
    ("dataset.flow_source", "cityscapes: estimate | precomputed | none (default estimate)"),
    ("dataset.resize", "cityscapes: [width, height] (default [1024, 512])"),
    ("dataset.eval_split", "cityscapes evaluation split (default val)"),
    ("dataset.split_fraction", "training fraction of sequences (default 0.8)"),
    ("dataset.split_seed", "seed of the sequence split (default 0)"),
    ("dataset.scene", "synthetic: camouflage | distinct (default camouflage)"),
    ("dataset.sequences", "synthetic: sequence count (default 25)"),
    ("dataset.frames_per_sequence", "synthetic: frames per sequence (default 10)"),
    ("dataset.size", "synthetic: frame side in pixels (default 64)"),
    ("dataset.seed", "synthetic: generator seed (default 0)"),
    ("output.dir", "where logs and the resolved config are written"),
];

/// Dotted keys mapped to values; entries are removed as they are read.
struct Keys(BTreeMap<String, Value>);

impl Keys {
    fn parse(text: &str) -> Result<Self, HarnessError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        let mut map = BTreeMap::new();
        fn flatten(prefix: &str, table: toml::Table, out: &mut BTreeMap<String, Value>) {
            for (k, v) in table {
                let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
                match v {
                    Value::Table(t) => flatten(&key, t, out),
                    v => {
                        out.insert(key, v);
                    }
                }
            }
        }
        flatten("", table, &mut map);
        Ok(Keys(map))
    }

    fn err(key: &str, what: &str) -> HarnessError {
        HarnessError::Config(format!("{key}: expected {what}"))
    }

    fn str(&mut self, key: &str) -> Result<Option<String>, HarnessError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(Self::err(key, "a string")),
        }
    }

    fn parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        self.str(key)?.map(|s| s.parse::<T>().map_err(|e| HarnessError::Config(format!("{key}: {e}")))).transpose()
    }

    fn choice<T: for<'de> Deserialize<'de>>(&mut self, key: &str) -> Result<Option<T>, HarnessError> {
        self.str(key)?.map(|s| parse_enum(key, &s)).transpose()
    }

    fn uint(&mut self, key: &str) -> Result<Option<u64>, HarnessError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as u64)),
            Some(_) => Err(Self::err(key, "a non-negative integer")),
        }
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>, HarnessError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(f)),
            Some(Value::Integer(i)) => Ok(Some(i as f64)),
            Some(_) => Err(Self::err(key, "a number")),
        }
    }

    fn pair(&mut self, key: &str) -> Result<Option<(f64, f64)>, HarnessError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(Value::Array(a)) if a.len() == 2 => {
                let num = |v: &Value| match v {
                    Value::Float(f) => Some(*f),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                };
                match (num(&a[0]), num(&a[1])) {
                    (Some(x), Some(y)) => Ok(Some((x, y))),
                    _ => Err(Self::err(key, "a pair of numbers")),
                }
            }
            Some(_) => Err(Self::err(key, "a pair of numbers")),
        }
    }

    fn required<T>(v: Option<T>, key: &str) -> Result<T, HarnessError> {
        v.ok_or_else(|| HarnessError::Config(format!("{key} is required")))
    }

    fn finish(self) -> Result<(), HarnessError> {
        if self.0.is_empty() {
            Ok(())
        } else {
            let keys: Vec<&str> = self.0.keys().map(String::as_str).collect();
            Err(HarnessError::Config(format!("unknown key(s): {}", keys.join(", "))))
        }
    }
}

pub fn parse_config(text: &str) -> Result<TrainConfig, HarnessError> {
    let mut k = Keys::parse(text)?;

    let kind = Keys::required(k.str("dataset.kind")?, "dataset.kind")?;
    let source = match kind.as_str() {
        "synthetic" => DatasetSource::Synthetic(BenchmarkConfig {
            kind: k.choice::<SceneKind>("dataset.scene")?.unwrap_or(SceneKind::Camouflage),
            sequences: k.uint("dataset.sequences")?.unwrap_or(25) as usize,
            frames_per_sequence: k.uint("dataset.frames_per_sequence")?.unwrap_or(10) as usize,
            size: k.uint("dataset.size")?.unwrap_or(64) as usize,
            seed: k.uint("dataset.seed")?.unwrap_or(0),
        }),
        "vkitti" => DatasetSource::Vkitti { root: Keys::required(k.str("dataset.root")?, "dataset.root")?.into() },
        "cityscapes" => DatasetSource::Cityscapes {
            root: Keys::required(k.str("dataset.root")?, "dataset.root")?.into(),
            flow_source: k.parsed::<FlowSource>("dataset.flow_source")?.unwrap_or(FlowSource::Estimate),
            resize: match k.pair("dataset.resize")? {
                Some((w, h)) if w >= 1.0 && h >= 1.0 => Some((w as u32, h as u32)),
                Some(_) => return Err(HarnessError::Config("dataset.resize must be positive".into())),
                None => Some((1024, 512)),
            },
            eval_split: k.str("dataset.eval_split")?.unwrap_or_else(|| "val".into()),
        },
        other => return Err(HarnessError::Config(format!("dataset.kind: unsupported value `{other}`"))),
    };
    let mut dataset = DatasetConfig::new(source);
    if let Some(c) = k.str("dataset.classes")? {
        dataset.classes = c;
    }
    dataset.class_map = k.str("dataset.class_map")?.map(PathBuf::from);
    if let Some(f) = k.float("dataset.split_fraction")? {
        dataset.split_fraction = f;
    }
    if let Some(s) = k.uint("dataset.split_seed")? {
        dataset.split_seed = s;
    }

    let variant: Variant = Keys::required(k.parsed("model.variant")?, "model.variant")?;
    let num_classes = match k.uint("model.num_classes")? {
        Some(n) => n as usize,
        None => dataset.class_map()?.len(),
    };
    let mut model = ModelSpec::new(variant, num_classes);
    let scale = k.str("model.encoder_scale")?.unwrap_or_else(|| "toy".into());
    let factor = k.uint("model.toy_factor")?;
    model.encoder_scale = match scale.as_str() {
        "toy" => EncoderScale::Toy { factor: factor.unwrap_or(8) as usize },
        "full" if factor.is_none() => EncoderScale::Full,
        "full" => return Err(HarnessError::Config("model.toy_factor only applies at toy scale".into())),
        other => return Err(HarnessError::Config(format!("model.encoder_scale: unsupported value `{other}`"))),
    };
    if let Some(p) = k.float("model.dropout_p")? {
        model.dropout_p = p;
    }
    model.pretrained_rgb_weights = k.str("model.pretrained_rgb_weights")?.map(PathBuf::from);
    if let Some(s) = k.choice::<SkipFusion>("model.skip_fusion")? {
        model.skip_fusion = s;
    }
    if let Some(n) = k.choice::<InputNorm>("model.input_norm")? {
        model.input_norm = n;
    }
    if let Some(e) = k.parsed::<EncodingKind>("flow.encoding")? {
        model.flow_encoding = e;
    }
    let norm = k.str("flow.norm")?;
    let cap = k.float("flow.cap")?;
    model.flow_norm = match (norm.as_deref(), cap) {
        (None | Some("per_frame_max"), None) => NormStrategy::PerFrameMax,
        (Some("fixed_cap"), Some(c)) => NormStrategy::FixedCap(c as f32),
        (Some("fixed_cap"), None) => return Err(HarnessError::Config("flow.norm = fixed_cap needs flow.cap".into())),
        (_, Some(_)) => return Err(HarnessError::Config("flow.cap only applies to flow.norm = fixed_cap".into())),
        (Some(other), None) => return Err(HarnessError::Config(format!("flow.norm: unsupported value `{other}`"))),
    };

    let mut optimizer = AdamConfig::default();
    if let Some(v) = k.float("optimizer.learning_rate")? {
        optimizer.learning_rate = v;
    }
    if let Some(v) = k.float("optimizer.beta1")? {
        optimizer.beta1 = v;
    }
    if let Some(v) = k.float("optimizer.beta2")? {
        optimizer.beta2 = v;
    }
    if let Some(v) = k.float("optimizer.epsilon")? {
        optimizer.epsilon = v;
    }
    let default_batch = if model.encoder_scale == EncoderScale::Full { 2 } else { 8 };
    let config = TrainConfig {
        optimizer,
        l2_coefficient: k.float("train.l2_coefficient")?.unwrap_or(5e-4),
        epochs: Keys::required(k.uint("train.epochs")?, "train.epochs")? as usize,
        batch_size: k.uint("train.batch_size")?.map_or(default_batch, |b| b as usize),
        seed: k.uint("train.seed")?.unwrap_or(0),
        eval_every: k.uint("train.eval_every")?.unwrap_or(0) as usize,
        checkpoint_dir: k.str("train.checkpoint_dir")?.map(PathBuf::from),
        output_dir: k.str("output.dir")?.map(PathBuf::from),
        model,
        dataset,
    };
    k.finish()?;
    config.validate()?;
    Ok(config)
}

/// What `synth-gen` renders: one hand-specified scene or a whole benchmark.
#[derive(Clone, Debug, PartialEq)]
pub enum SceneConfig {
    Scene { spec: SynthSceneSpec, seed: u64 },
    Benchmark(BenchmarkConfig),
}

/// Reads `scene.*` plus `objects.<n>.*` keys, or `benchmark.*` keys.
pub fn parse_scene_config(text: &str) -> Result<SceneConfig, HarnessError> {
    let mut k = Keys::parse(text)?;
    let has = |prefix: &str, k: &Keys| k.0.keys().any(|key| key.starts_with(prefix));
    if has("benchmark.", &k) {
        let cfg = BenchmarkConfig {
            kind: k.choice::<SceneKind>("benchmark.kind")?.unwrap_or(SceneKind::Camouflage),
            sequences: k.uint("benchmark.sequences")?.unwrap_or(25) as usize,
            frames_per_sequence: k.uint("benchmark.frames_per_sequence")?.unwrap_or(10) as usize,
            size: k.uint("benchmark.size")?.unwrap_or(64) as usize,
            seed: k.uint("benchmark.seed")?.unwrap_or(0),
        };
        k.finish()?;
        return Ok(SceneConfig::Benchmark(cfg));
    }
    let uint = |k: &mut Keys, key: &str| -> Result<u64, HarnessError> { Keys::required(k.uint(key)?, key) };
    let name = k.str("scene.name")?.unwrap_or_else(|| "scene".into());
    let width = uint(&mut k, "scene.width")? as usize;
    let height = uint(&mut k, "scene.height")? as usize;
    let frames = uint(&mut k, "scene.frames")? as usize;
    let background_seed = k.uint("scene.background_seed")?.unwrap_or(0);
    let pan = k.pair("scene.camera_pan")?.unwrap_or((0.0, 0.0));
    let seed = k.uint("scene.seed")?.unwrap_or(0);

    let mut indices: Vec<u64> =
        k.0.keys().filter_map(|key| key.strip_prefix("objects.")?.split('.').next()?.parse().ok()).collect();
    indices.sort_unstable();
    indices.dedup();
    let mut objects = Vec::new();
    for i in indices {
        let key = |f: &str| format!("objects.{i}.{f}");
        let shape = match Keys::required(k.str(&key("shape"))?, &key("shape"))?.as_str() {
            "rect" => ObjectShape::Rect {
                width: Keys::required(k.float(&key("width"))?, &key("width"))? as f32,
                height: Keys::required(k.float(&key("height"))?, &key("height"))? as f32,
            },
            "disk" => ObjectShape::Disk { radius: Keys::required(k.float(&key("radius"))?, &key("radius"))? as f32 },
            other => return Err(HarnessError::Config(format!("{}: unsupported value `{other}`", key("shape")))),
        };
        let position = Keys::required(k.pair(&key("position"))?, &key("position"))?;
        let velocity = k.pair(&key("velocity"))?.unwrap_or((0.0, 0.0));
        objects.push(SynthObject {
            shape,
            position: (position.0 as f32, position.1 as f32),
            texture: k.choice::<TextureMode>(&key("texture"))?.unwrap_or(TextureMode::Distinct),
            velocity: (velocity.0 as f32, velocity.1 as f32),
            class_id: Keys::required(k.uint(&key("class_id"))?, &key("class_id"))?.min(255) as u8,
        });
    }
    k.finish()?;
    let spec = SynthSceneSpec {
        name,
        width,
        height,
        objects,
        background_seed,
        frames,
        camera_pan: (pan.0 as f32, pan.1 as f32),
    };
    spec.validate()?;
    Ok(SceneConfig::Scene { spec, seed })
}
