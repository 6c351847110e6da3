//! Synthetic scenes with exact ground-truth flow and masks.
//!
//! Backgrounds and camouflaged objects draw every pixel independently from
//! the same uniform RGB distribution, so a camouflaged object cannot be told
//! apart from the background in any single frame; only its motion gives it
//! away. Distinct objects use a low-variance class-specific color.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, Sample};
use crate::flow::FlowField;
use crate::SegMask;

const BACKGROUND_ID: u8 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureMode {
    Distinct,
    Camouflage,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectShape {
    Rect { width: f32, height: f32 },
    Disk { radius: f32 },
}

impl ObjectShape {
    fn extent(&self) -> (f32, f32) {
        match *self {
            ObjectShape::Rect { width, height } => (width, height),
            ObjectShape::Disk { radius } => (2.0 * radius, 2.0 * radius),
        }
    }

    /// Whether the point (relative to the bounding-box corner) is covered.
    fn covers(&self, dx: f32, dy: f32) -> bool {
        match *self {
            ObjectShape::Rect { width, height } => dx >= 0.0 && dy >= 0.0 && dx < width && dy < height,
            ObjectShape::Disk { radius } => {
                let (cx, cy) = (dx - radius, dy - radius);
                cx * cx + cy * cy < radius * radius
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthObject {
    pub shape: ObjectShape,
    /// Bounding-box corner at frame 0.
    pub position: (f32, f32),
    pub texture: TextureMode,
    /// Pixels per frame; multiples of 0.5.
    pub velocity: (f32, f32),
    pub class_id: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSceneSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    /// Painted in order; later objects occlude earlier ones.
    pub objects: Vec<SynthObject>,
    pub background_seed: u64,
    pub frames: usize,
    /// Global background motion in pixels per frame (0, 0 for a static camera).
    pub camera_pan: (f32, f32),
}

impl SynthSceneSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidScene(m));
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return bad("canvas and frame count must be non-zero".into());
        }
        let half_step = |x: f32| x.is_finite() && (x * 2.0).fract() == 0.0;
        if !half_step(self.camera_pan.0) || !half_step(self.camera_pan.1) {
            return bad(format!("camera pan {:?} is not a multiple of 0.5", self.camera_pan));
        }
        for (index, obj) in self.objects.iter().enumerate() {
            if !half_step(obj.velocity.0) || !half_step(obj.velocity.1) {
                return bad(format!("object {index} velocity {:?} is not a multiple of 0.5", obj.velocity));
            }
            if obj.class_id == BACKGROUND_ID || obj.class_id == u8::MAX {
                return bad(format!("object {index} uses reserved class id {}", obj.class_id));
            }
            let (w, h) = obj.shape.extent();
            if !(w > 0.0 && h > 0.0) {
                return bad(format!("object {index} has an empty shape"));
            }
            for frame in 0..self.frames {
                let (x, y) = position_at(obj, frame);
                if x < 0.0 || y < 0.0 || x + w > self.width as f32 || y + h > self.height as f32 {
                    return Err(DatasetError::ObjectOutOfBounds {
                        index,
                        frame,
                        width: self.width,
                        height: self.height,
                    });
                }
            }
        }
        Ok(())
    }
}

fn position_at(obj: &SynthObject, frame: usize) -> (f32, f32) {
    (obj.position.0 + obj.velocity.0 * frame as f32, obj.position.1 + obj.velocity.1 * frame as f32)
}

fn noise_texture(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<[u8; 3]> {
    (0..w * h).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
}

fn distinct_texture(rng: &mut ChaCha8Rng, w: usize, h: usize, class_id: u8) -> Vec<[u8; 3]> {
    const BASES: [[i16; 3]; 6] =
        [[220, 50, 40], [40, 90, 220], [50, 200, 70], [230, 200, 40], [180, 60, 200], [40, 200, 200]];
    let base = BASES[class_id as usize % BASES.len()];
    (0..w * h).map(|_| base.map(|c| (c + rng.random_range(-16i16..=16)).clamp(0, 255) as u8)).collect()
}

/// Renders every frame of `spec`. Flow at frame `t` is the motion from `t`
/// to `t + 1`, exact by construction.
pub fn generate_synthetic(spec: &SynthSceneSpec, seed: u64) -> Result<Vec<Sample>, DatasetError> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let background = noise_texture(&mut ChaCha8Rng::seed_from_u64(spec.background_seed), w, h);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let textures: Vec<(usize, Vec<[u8; 3]>)> = spec
        .objects
        .iter()
        .map(|obj| {
            let (ow, oh) = obj.shape.extent();
            let (tw, th) = (ow.ceil() as usize + 1, oh.ceil() as usize + 1);
            let tex = match obj.texture {
                TextureMode::Camouflage => noise_texture(&mut rng, tw, th),
                TextureMode::Distinct => distinct_texture(&mut rng, tw, th, obj.class_id),
            };
            (tw, tex)
        })
        .collect();

    let mut samples = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let mut rgb = RgbImage::new(w as u32, h as u32);
        let mut ids = vec![BACKGROUND_ID; w * h];
        let mut u = vec![spec.camera_pan.0; w * h];
        let mut v = vec![spec.camera_pan.1; w * h];
        let shift = (spec.camera_pan.0 * t as f32, spec.camera_pan.1 * t as f32);
        for y in 0..h {
            for x in 0..w {
                let bx = ((x as f32 + 0.5 - shift.0).floor() as i64).rem_euclid(w as i64) as usize;
                let by = ((y as f32 + 0.5 - shift.1).floor() as i64).rem_euclid(h as i64) as usize;
                rgb.put_pixel(x as u32, y as u32, Rgb(background[by * w + bx]));
            }
        }
        for (obj, (tw, tex)) in spec.objects.iter().zip(&textures) {
            let (px, py) = position_at(obj, t);
            let (ow, oh) = obj.shape.extent();
            let y0 = py.floor().max(0.0) as usize;
            let x0 = px.floor().max(0.0) as usize;
            let y1 = ((py + oh).ceil() as usize).min(h);
            let x1 = ((px + ow).ceil() as usize).min(w);
            for y in y0..y1 {
                for x in x0..x1 {
                    let (dx, dy) = (x as f32 + 0.5 - px, y as f32 + 0.5 - py);
                    if !obj.shape.covers(dx, dy) {
                        continue;
                    }
                    let texel = tex[dy.floor() as usize * tw + dx.floor() as usize];
                    let i = y * w + x;
                    rgb.put_pixel(x as u32, y as u32, Rgb(texel));
                    ids[i] = obj.class_id;
                    u[i] = obj.velocity.0;
                    v[i] = obj.velocity.1;
                }
            }
        }
        let frame_id = format!("{}/{:05}", spec.name, t);
        let prev_frame_id = (t > 0).then(|| format!("{}/{:05}", spec.name, t - 1));
        samples.push(Sample {
            rgb,
            flow: Some(FlowField::new(w, h, u, v)),
            mask: SegMask::new(w, h, ids),
            frame_id,
            prev_frame_id,
            sequence_id: spec.name.clone(),
        });
    }
    Ok(samples)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// A camouflaged moving object (class 1) and a distinct static one (class 2).
    Camouflage,
    /// Both objects distinct: class 1 moves, class 2 stays put.
    Distinct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub kind: SceneKind,
    pub sequences: usize,
    pub frames_per_sequence: usize,
    pub size: usize,
    pub seed: u64,
}

impl BenchmarkConfig {
    /// Scene specs for every sequence; positions and velocities are drawn so
    /// the moving object's swept box never touches the static object.
    pub fn scene_specs(&self) -> Result<Vec<SynthSceneSpec>, DatasetError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let size = self.size as f32;
        let steps = self.frames_per_sequence.saturating_sub(1) as f32;
        let mut specs = Vec::with_capacity(self.sequences);
        let lo = (self.size / 5).max(3) as i32;
        let hi = (self.size * 5 / 16).max(lo as usize + 1) as i32;
        for s in 0..self.sequences {
            let mut attempt = 0;
            let spec = loop {
                attempt += 1;
                if attempt > 1000 {
                    return Err(DatasetError::InvalidScene(format!(
                        "cannot place objects on a {}px canvas",
                        self.size
                    )));
                }
                let speeds = [-2.0f32, -1.0, 1.0, 2.0];
                let vel = (speeds[rng.random_range(0..4)], speeds[rng.random_range(0..4)]);
                let (mw, mh) = (rng.random_range(lo..=hi) as f32, rng.random_range(lo..=hi) as f32);
                let span_x = (size - mw - vel.0.abs() * steps).floor();
                let span_y = (size - mh - vel.1.abs() * steps).floor();
                if span_x < 0.0 || span_y < 0.0 {
                    continue;
                }
                let start = |span: f32, v: f32, rng: &mut ChaCha8Rng| {
                    let base = rng.random_range(0..=span as i32) as f32;
                    if v < 0.0 {
                        base + v.abs() * steps
                    } else {
                        base
                    }
                };
                let mpos = (start(span_x, vel.0, &mut rng), start(span_y, vel.1, &mut rng));
                let swept = (
                    mpos.0.min(mpos.0 + vel.0 * steps),
                    mpos.1.min(mpos.1 + vel.1 * steps),
                    mpos.0.max(mpos.0 + vel.0 * steps) + mw,
                    mpos.1.max(mpos.1 + vel.1 * steps) + mh,
                );
                let (sw, sh) = (rng.random_range(lo..=hi) as f32, rng.random_range(lo..=hi) as f32);
                let spos =
                    (rng.random_range(0..=(size - sw) as i32) as f32, rng.random_range(0..=(size - sh) as i32) as f32);
                let overlaps = spos.0 < swept.2 + 1.0
                    && spos.0 + sw + 1.0 > swept.0
                    && spos.1 < swept.3 + 1.0
                    && spos.1 + sh + 1.0 > swept.1;
                if overlaps {
                    continue;
                }
                let moving_texture = match self.kind {
                    SceneKind::Camouflage => TextureMode::Camouflage,
                    SceneKind::Distinct => TextureMode::Distinct,
                };
                break SynthSceneSpec {
                    name: format!("seq{s:03}"),
                    width: self.size,
                    height: self.size,
                    objects: vec![
                        SynthObject {
                            shape: ObjectShape::Rect { width: sw, height: sh },
                            position: spos,
                            texture: TextureMode::Distinct,
                            velocity: (0.0, 0.0),
                            class_id: 2,
                        },
                        SynthObject {
                            shape: ObjectShape::Rect { width: mw, height: mh },
                            position: mpos,
                            texture: moving_texture,
                            velocity: vel,
                            class_id: 1,
                        },
                    ],
                    background_seed: rng.random(),
                    frames: self.frames_per_sequence,
                    camera_pan: (0.0, 0.0),
                };
            };
            specs.push(spec);
        }
        Ok(specs)
    }
}

/// All frames of every benchmark sequence, in sequence order.
pub fn scene_benchmark(config: &BenchmarkConfig) -> Result<Vec<Sample>, DatasetError> {
    let mut out = Vec::new();
    for (i, spec) in config.scene_specs()?.iter().enumerate() {
        out.extend(generate_synthetic(spec, config.seed.wrapping_mul(1_000_003).wrapping_add(i as u64))?);
    }
    Ok(out)
}
