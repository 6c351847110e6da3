//! Training checkpoints.
//!
//! Layout (little endian): magic `FSEGCKPT`, u32 version, u8 scalar width,
//! u32 length + spec JSON, u64 epoch, four f64 optimizer settings, u64 step,
//! u32 tensor count, then per tensor: u32 name length, name, u32 rank,
//! u64 dims, values, first moments, second moments.

use std::fs;
use std::path::Path;

use super::model::{build_model, Model, ModelSpec};
use super::optim::{Adam, AdamConfig};
use super::scalar::Scalar;
use super::ModelError;

const MAGIC: &[u8; 8] = b"FSEGCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint<T> {
    pub model: Model<T>,
    pub optimizer: Adam<T>,
    /// Number of completed epochs.
    pub epoch: usize,
}

pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    model: &Model<T>,
    optimizer: &Adam<T>,
    epoch: usize,
) -> Result<(), ModelError> {
    let spec = serde_json::to_string(&model.spec).expect("spec serializes");
    let mut buf = Vec::from(&MAGIC[..]);
    buf.extend(VERSION.to_le_bytes());
    buf.push(T::BYTES as u8);
    buf.extend((spec.len() as u32).to_le_bytes());
    buf.extend(spec.as_bytes());
    buf.extend((epoch as u64).to_le_bytes());
    let c = optimizer.config;
    for v in [c.learning_rate, c.beta1, c.beta2, c.epsilon] {
        buf.extend(v.to_le_bytes());
    }
    buf.extend(optimizer.step.to_le_bytes());
    let params = model.params();
    buf.extend((params.len() as u32).to_le_bytes());
    for ((p, m), v) in params.iter().zip(&optimizer.m).zip(&optimizer.v) {
        buf.extend((p.name.len() as u32).to_le_bytes());
        buf.extend(p.name.as_bytes());
        buf.extend((p.shape.len() as u32).to_le_bytes());
        for &d in &p.shape {
            buf.extend((d as u64).to_le_bytes());
        }
        for xs in [&p.value, m, v] {
            for &x in xs.iter() {
                x.write_le(&mut buf);
            }
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| ModelError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, buf).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn bad(&self, message: impl Into<String>) -> ModelError {
        ModelError::BadFile { path: self.path.to_path_buf(), message: message.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.bytes.len() - self.pos < n {
            return Err(self.bad("truncated checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn header(&mut self) -> Result<(u8, ModelSpec), ModelError> {
        if self.take(8)? != MAGIC {
            return Err(self.bad("not a checkpoint"));
        }
        let version = self.u32()?;
        if version != VERSION {
            return Err(self.bad(format!("unsupported checkpoint version {version}")));
        }
        let width = self.take(1)?[0];
        let len = self.u32()? as usize;
        let json = self.take(len)?;
        let spec = serde_json::from_slice(json).map_err(|e| self.bad(format!("spec: {e}")))?;
        Ok((width, spec))
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, ModelError> {
    fs::read(path).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })
}

pub fn read_checkpoint_spec(path: &Path) -> Result<ModelSpec, ModelError> {
    let bytes = read_file(path)?;
    Reader { bytes: &bytes, pos: 0, path }.header().map(|(_, s)| s)
}

/// Loads a checkpoint. With `expected` set, a checkpoint whose architecture
/// differs is rejected with `SpecMismatch`.
pub fn load_checkpoint<T: Scalar>(path: &Path, expected: Option<&ModelSpec>) -> Result<Checkpoint<T>, ModelError> {
    let bytes = read_file(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0, path };
    let (width, spec) = r.header()?;
    if width as usize != T::BYTES {
        return Err(r.bad(format!("stored scalars are {width} bytes, expected {}", T::BYTES)));
    }
    if let Some(e) = expected {
        if !e.same_architecture(&spec) {
            return Err(ModelError::SpecMismatch {
                expected: serde_json::to_string(e).expect("spec serializes"),
                found: serde_json::to_string(&spec).expect("spec serializes"),
            });
        }
    }
    let epoch = r.u64()? as usize;
    let config = AdamConfig { learning_rate: r.f64()?, beta1: r.f64()?, beta2: r.f64()?, epsilon: r.f64()? };
    let step = r.u64()?;
    // stored values replace the fresh initialization, so skip pretrained loading
    let fresh = ModelSpec { pretrained_rgb_weights: None, ..spec.clone() };
    let mut model: Model<T> = build_model(&fresh, 0)?;
    model.spec = spec;
    let mut optimizer = Adam::new(config, &model);
    optimizer.step = step;
    let count = r.u32()? as usize;
    let mut params = model.params_mut();
    if count != params.len() {
        return Err(r.bad(format!("{count} tensors stored, model has {}", params.len())));
    }
    for ((p, m), v) in params.iter_mut().zip(&mut optimizer.m).zip(&mut optimizer.v) {
        let len = r.u32()? as usize;
        let name = r.take(len)?;
        if name != p.name.as_bytes() {
            return Err(r.bad(format!("tensor `{}` out of order", String::from_utf8_lossy(name))));
        }
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if shape != p.shape {
            return Err(r.bad(format!("tensor `{}` has shape {shape:?}, expected {:?}", p.name, p.shape)));
        }
        for xs in [&mut p.value, m, v] {
            let raw = r.take(xs.len() * T::BYTES)?;
            for (x, chunk) in xs.iter_mut().zip(raw.chunks_exact(T::BYTES)) {
                *x = T::read_le(chunk);
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(r.bad("trailing bytes"));
    }
    Ok(Checkpoint { model, optimizer, epoch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{EncoderScale, Variant};

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let spec =
            ModelSpec { encoder_scale: EncoderScale::Toy { factor: 32 }, ..ModelSpec::new(Variant::TwoStream, 3) };
        let model: Model<f32> = build_model(&spec, 5).unwrap();
        let mut opt = Adam::new(AdamConfig::default(), &model);
        opt.step = 17;
        opt.m[0][0] = 0.25;
        let a = dir.path().join("a.ckpt");
        let b = dir.path().join("b.ckpt");
        save_checkpoint(&a, &model, &opt, 3).unwrap();
        let ck: Checkpoint<f32> = load_checkpoint(&a, Some(&spec)).unwrap();
        assert_eq!(ck.epoch, 3);
        assert_eq!(ck.optimizer, opt);
        save_checkpoint(&b, &ck.model, &ck.optimizer, ck.epoch).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

        let other = ModelSpec { num_classes: 4, ..spec.clone() };
        assert!(matches!(load_checkpoint::<f32>(&a, Some(&other)), Err(ModelError::SpecMismatch { .. })));
        assert!(matches!(load_checkpoint::<f64>(&a, None), Err(ModelError::BadFile { .. })));
        assert_eq!(read_checkpoint_spec(&a).unwrap(), spec);
    }
}
