//! Named f32 tensors for initializing encoders from pretrained values.
//!
//! Layout (little endian): magic `FSEGWTS1`, u32 entry count, then per entry
//! u32 name length, UTF-8 name, u32 rank, u64 dims, f32 values.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use super::model::Encoder;
use super::scalar::Scalar;
use super::ModelError;

const MAGIC: &[u8; 8] = b"FSEGWTS1";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightFile {
    entries: Vec<(String, Vec<usize>, Vec<f32>)>,
}

impl WeightFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data length");
        let name = name.into();
        self.entries.retain(|(n, _, _)| *n != name);
        self.entries.push((name, shape, data));
    }

    pub fn get(&self, name: &str) -> Option<(&[usize], &[f32])> {
        self.entries.iter().find(|(n, _, _)| n == name).map(|(_, s, d)| (s.as_slice(), d.as_slice()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _, _)| n.as_str())
    }

    /// Exports an encoder under stream-independent names.
    pub fn from_encoder<T: Scalar>(encoder: &Encoder<T>) -> Self {
        let prefix = format!("{}.", encoder.stream.prefix());
        let mut w = WeightFile::new();
        for p in encoder.params() {
            let data = p.value.iter().map(|v| v.as_f64() as f32).collect();
            w.insert(p.name.trim_start_matches(&prefix), p.shape.clone(), data);
        }
        w
    }

    pub fn write(&self, path: &Path) -> Result<(), ModelError> {
        let mut buf = Vec::from(&MAGIC[..]);
        buf.extend((self.entries.len() as u32).to_le_bytes());
        for (name, shape, data) in &self.entries {
            buf.extend((name.len() as u32).to_le_bytes());
            buf.extend(name.as_bytes());
            buf.extend((shape.len() as u32).to_le_bytes());
            for &d in shape {
                buf.extend((d as u64).to_le_bytes());
            }
            for &v in data {
                buf.extend(v.to_le_bytes());
            }
        }
        fs::write(path, buf).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })
    }

    pub fn read(path: &Path) -> Result<Self, ModelError> {
        let bytes = fs::read(path).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })?;
        let bad = |message: String| ModelError::BadFile { path: path.to_path_buf(), message };
        let mut r = Cursor::new(bytes.as_slice());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(bad("not a weight file".into()));
        }
        let short = |_| bad("truncated".into());
        let u32_ = |r: &mut Cursor<&[u8]>| -> Result<u32, ModelError> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(short)?;
            Ok(u32::from_le_bytes(b))
        };
        let count = u32_(&mut r)?;
        let mut w = WeightFile::new();
        for _ in 0..count {
            let len = u32_(&mut r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name).map_err(|_| bad("truncated name".into()))?;
            let name = String::from_utf8(name).map_err(|_| bad("name is not UTF-8".into()))?;
            let rank = u32_(&mut r)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                let mut b = [0u8; 8];
                r.read_exact(&mut b).map_err(|_| bad("truncated shape".into()))?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let n: usize = shape.iter().product();
            let remaining = bytes.len() - r.position() as usize;
            if n.checked_mul(4).is_none_or(|b| b > remaining) {
                return Err(bad(format!("`{name}` is truncated")));
            }
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let mut b = [0u8; 4];
                r.read_exact(&mut b).map_err(|_| bad("truncated data".into()))?;
                data.push(f32::from_le_bytes(b));
            }
            w.insert(name, shape, data);
        }
        Ok(w)
    }
}
