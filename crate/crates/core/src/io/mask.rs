use std::path::Path;

use super::png16::{read_raw, write_raw};
use super::IoError;
use crate::datasets::ClassMap;
use crate::SegMask;

/// Reads a mask stored either as class ids (palette-indexed or 8-bit gray)
/// or as a color-coded RGB(A) image matched against `class_map` colors.
pub fn read_mask(path: impl AsRef<Path>, class_map: &ClassMap) -> Result<SegMask, IoError> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    if raw.depth != png::BitDepth::Eight {
        return Err(IoError::png(path, format!("mask must be 8-bit, found {}-bit", raw.depth as u8)));
    }
    let ids = match raw.color {
        png::ColorType::Indexed | png::ColorType::Grayscale => raw.data,
        png::ColorType::Rgb | png::ColorType::Rgba => {
            let stride = raw.channels();
            let mut ids = Vec::with_capacity(raw.width * raw.height);
            for (i, px) in raw.data.chunks_exact(stride).enumerate() {
                let color = [px[0], px[1], px[2]];
                match class_map.id_for_color(color) {
                    Some(id) => ids.push(id),
                    None => {
                        return Err(IoError::UnknownColor {
                            path: path.into(),
                            x: i % raw.width,
                            y: i / raw.width,
                            color,
                        })
                    }
                }
            }
            ids
        }
        png::ColorType::GrayscaleAlpha => raw.data.chunks_exact(2).map(|p| p[0]).collect(),
    };
    Ok(SegMask::new(raw.width, raw.height, ids))
}

/// Writes the indexed form: a palette PNG whose indices are the class ids
/// and whose palette carries the class colors.
pub fn write_mask(mask: &SegMask, class_map: &ClassMap, path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut palette = vec![0u8; 256 * 3];
    for entry in class_map.entries() {
        let i = entry.id as usize * 3;
        palette[i..i + 3].copy_from_slice(&entry.color);
    }
    write_raw(
        path.as_ref(),
        mask.width(),
        mask.height(),
        png::ColorType::Indexed,
        png::BitDepth::Eight,
        Some(palette),
        mask.ids(),
    )
}

/// Writes the color-coded form; ids without a class (e.g. ignore) render black.
pub fn write_mask_color(mask: &SegMask, class_map: &ClassMap, path: impl AsRef<Path>) -> Result<(), IoError> {
    let data: Vec<u8> = mask.ids().iter().flat_map(|&id| class_map.color_of(id)).collect();
    write_raw(path.as_ref(), mask.width(), mask.height(), png::ColorType::Rgb, png::BitDepth::Eight, None, &data)
}
