use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::IoError;
use crate::flow::FlowField;

const OFFSET: f64 = 32768.0;
const COUNTS_PER_PIXEL: f64 = 64.0;

pub(crate) struct RawPng {
    pub width: usize,
    pub height: usize,
    pub color: png::ColorType,
    pub depth: png::BitDepth,
    pub data: Vec<u8>,
}

impl RawPng {
    pub fn channels(&self) -> usize {
        self.color.samples()
    }
}

/// Decodes a PNG without any sample expansion, so palette indices and
/// 16-bit samples come through untouched.
pub(crate) fn read_raw(path: &Path) -> Result<RawPng, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| IoError::png(path, e))?;
    let size = reader.output_buffer_size().ok_or_else(|| IoError::png(path, "image too large"))?;
    let mut data = vec![0; size];
    let info = reader.next_frame(&mut data).map_err(|e| IoError::png(path, e))?;
    data.truncate(info.buffer_size());
    Ok(RawPng {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        depth: info.bit_depth,
        data,
    })
}

pub(crate) fn write_raw(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    palette: Option<Vec<u8>>,
    data: &[u8],
) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(depth);
    if let Some(p) = palette {
        encoder.set_palette(p);
    }
    let mut writer = encoder.write_header().map_err(|e| IoError::png(path, e))?;
    writer.write_image_data(data).map_err(|e| IoError::png(path, e))?;
    writer.finish().map_err(|e| IoError::png(path, e))
}

/// Reads KITTI-style flow: three 16-bit channels, `u = (r - 2^15) / 64`,
/// `v = (g - 2^15) / 64`, valid where `b != 0`.
pub fn read_flow_png16(path: impl AsRef<Path>) -> Result<FlowField, IoError> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    if raw.depth != png::BitDepth::Sixteen {
        return Err(IoError::WrongBitDepth { path: path.into(), found: raw.depth as u8 });
    }
    if raw.channels() != 3 {
        return Err(IoError::WrongChannelCount { path: path.into(), expected: 3, found: raw.channels() });
    }
    let n = raw.width * raw.height;
    let (mut u, mut v, mut valid) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for px in raw.data.chunks_exact(6) {
        let r = u16::from_be_bytes([px[0], px[1]]) as f64;
        let g = u16::from_be_bytes([px[2], px[3]]) as f64;
        let b = u16::from_be_bytes([px[4], px[5]]);
        u.push(((r - OFFSET) / COUNTS_PER_PIXEL) as f32);
        v.push(((g - OFFSET) / COUNTS_PER_PIXEL) as f32);
        valid.push(b != 0);
    }
    Ok(FlowField::with_validity(raw.width, raw.height, u, v, valid))
}

/// Inverse of [`read_flow_png16`]; vectors are rounded to 1/64 px and
/// saturate at the 16-bit range.
pub fn write_flow_png16(flow: &FlowField, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let quantize = |x: f32| (x as f64 * COUNTS_PER_PIXEL + OFFSET).round().clamp(0.0, 65535.0) as u16;
    let mut data = Vec::with_capacity(flow.width() * flow.height() * 6);
    for ((&u, &v), &ok) in flow.u().iter().zip(flow.v()).zip(flow.valid()) {
        let (r, g, b) = if ok { (quantize(u), quantize(v), 1u16) } else { (0, 0, 0) };
        for s in [r, g, b] {
            data.extend_from_slice(&s.to_be_bytes());
        }
    }
    write_raw(path, flow.width(), flow.height(), png::ColorType::Rgb, png::BitDepth::Sixteen, None, &data)
}
