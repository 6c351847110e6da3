use std::fs;
use std::path::Path;

use super::IoError;
use crate::flow::FlowField;

/// Sanity sentinel at the start of every `.flo` file.
pub const FLO_MAGIC: f32 = 202021.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloFileHeader {
    pub magic: f32,
    pub width: i32,
    pub height: i32,
}

impl FloFileHeader {
    const LEN: usize = 12;

    fn parse(path: &Path, bytes: &[u8]) -> Result<Self, IoError> {
        if bytes.len() < Self::LEN {
            return Err(IoError::Truncated { path: path.into(), expected: Self::LEN, found: bytes.len() });
        }
        let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
        let header = FloFileHeader {
            magic: f32::from_le_bytes(word(0)),
            width: i32::from_le_bytes(word(4)),
            height: i32::from_le_bytes(word(8)),
        };
        if header.magic != FLO_MAGIC {
            return Err(IoError::BadMagic { path: path.into(), found: header.magic });
        }
        if header.width < 1 || header.height < 1 {
            return Err(IoError::BadDimensions { path: path.into(), width: header.width, height: header.height });
        }
        Ok(header)
    }
}

/// Reads a Middlebury `.flo` file; every pixel is marked valid.
pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField, IoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    let header = FloFileHeader::parse(path, &bytes)?;
    let (w, h) = (header.width as usize, header.height as usize);
    let expected = FloFileHeader::LEN + w * h * 8;
    if bytes.len() < expected {
        return Err(IoError::Truncated { path: path.into(), expected, found: bytes.len() });
    }
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for px in bytes[FloFileHeader::LEN..expected].chunks_exact(8) {
        u.push(f32::from_le_bytes([px[0], px[1], px[2], px[3]]));
        v.push(f32::from_le_bytes([px[4], px[5], px[6], px[7]]));
    }
    Ok(FlowField::new(w, h, u, v))
}

pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let n = flow.width() * flow.height();
    let mut bytes = Vec::with_capacity(FloFileHeader::LEN + n * 8);
    bytes.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    bytes.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    bytes.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for (u, v) in flow.u().iter().zip(flow.v()) {
        bytes.extend_from_slice(&u.to_le_bytes());
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrong_sentinel_is_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("zero.flo");
        let mut bytes = 0.0f32.to_le_bytes().to_vec();
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&[0; 8]);
        fs::write(&p, bytes).unwrap();
        assert!(matches!(read_flo(&p), Err(IoError::BadMagic { found, .. }) if found == 0.0));
    }

    #[test]
    fn short_payload_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("short.flo");
        let mut bytes = FLO_MAGIC.to_le_bytes().to_vec();
        bytes.extend_from_slice(&2i32.to_le_bytes());
        bytes.extend_from_slice(&2i32.to_le_bytes());
        bytes.extend_from_slice(&[0; 24]);
        fs::write(&p, bytes).unwrap();
        assert!(matches!(read_flo(&p), Err(IoError::Truncated { expected: 44, found: 36, .. })));
    }

    #[test]
    fn empty_path_is_io_error() {
        let f = FlowField::zeros(1, 1);
        assert!(matches!(write_flo(&f, ""), Err(IoError::Io { .. })));
        assert!(matches!(read_flo(""), Err(IoError::Io { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn round_trip_is_bitwise(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = w * h;
            let mut draw = || {
                let bits: u32 = rng.random();
                let x = f32::from_bits(bits);
                if x.is_finite() { x } else { rng.random_range(-1e30f32..1e30) }
            };
            let u: Vec<f32> = (0..n).map(|_| draw()).collect();
            let v: Vec<f32> = (0..n).map(|_| draw()).collect();
            let f = FlowField::new(w, h, u, v);
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("f.flo");
            write_flo(&f, &p).unwrap();
            let g = read_flo(&p).unwrap();
            prop_assert_eq!(g.width(), w);
            for (a, b) in f.u().iter().zip(g.u()).chain(f.v().iter().zip(g.v())) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
