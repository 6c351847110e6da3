//! Side-by-side qualitative panels and a static HTML index.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use super::HarnessError;
use crate::datasets::{ClassMap, Sample};
use crate::flow::{encode, EncodingKind, NormStrategy};
use crate::SegMask;

const GAP: u32 = 4;
const SWATCH: u32 = 12;
const BACKDROP: Rgb<u8> = Rgb([255, 255, 255]);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tile {
    pub label: String,
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Panel {
    pub frame_id: String,
    pub path: PathBuf,
    pub tiles: Vec<Tile>,
    /// Top-left corner of each legend swatch, by class id.
    pub legend: Vec<(u8, u32, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PanelIndex {
    pub index: PathBuf,
    pub panels: Vec<Panel>,
}

fn colorize(mask: &SegMask, class_map: &ClassMap) -> RgbImage {
    RgbImage::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Rgb(class_map.color_of(mask.get(x as usize, y as usize)))
    })
}

/// Tiles one row per sample: input RGB, flow (color wheel, when the sample
/// has flow), each variant's prediction, then ground truth; a class legend
/// runs underneath. Also writes `index.html` linking every panel.
pub fn render_report_panels(
    samples: &[Sample],
    predictions: &[(String, Vec<SegMask>)],
    class_map: &ClassMap,
    out_dir: &Path,
) -> Result<PanelIndex, HarnessError> {
    for (label, preds) in predictions {
        if preds.len() != samples.len() {
            return Err(HarnessError::DimensionMismatch(format!(
                "{label}: {} predictions for {} samples",
                preds.len(),
                samples.len()
            )));
        }
        for (s, p) in samples.iter().zip(preds) {
            if (p.width(), p.height()) != (s.width(), s.height()) {
                return Err(HarnessError::DimensionMismatch(format!(
                    "{label}: prediction for {} is {}x{}, frame is {}x{}",
                    s.frame_id,
                    p.width(),
                    p.height(),
                    s.width(),
                    s.height()
                )));
            }
        }
    }
    fs::create_dir_all(out_dir).map_err(HarnessError::io(out_dir))?;
    let mut panels = Vec::new();
    for (i, sample) in samples.iter().enumerate() {
        let mut images: Vec<(String, RgbImage)> = vec![("rgb".into(), sample.rgb.clone())];
        if let Some(flow) = &sample.flow {
            let enc = encode(flow, EncodingKind::ColorWheel3Ch, NormStrategy::PerFrameMax)
                .expect("per-frame normalization has no parameters to reject");
            let img = RgbImage::from_fn(flow.width() as u32, flow.height() as u32, |x, y| {
                let px = enc.pixel(x as usize, y as usize);
                Rgb([px[0].round() as u8, px[1].round() as u8, px[2].round() as u8])
            });
            images.push(("flow".into(), img));
        }
        for (label, preds) in predictions {
            images.push((label.clone(), colorize(&preds[i], class_map)));
        }
        images.push(("ground_truth".into(), colorize(&sample.mask, class_map)));

        let (w, h) = (sample.width() as u32, sample.height() as u32);
        let n = images.len() as u32;
        let legend_w = GAP + class_map.len() as u32 * (SWATCH + GAP);
        let width = (GAP + n * (w + GAP)).max(legend_w);
        let height = GAP + h + GAP + SWATCH + GAP;
        let mut canvas = RgbImage::from_pixel(width, height, BACKDROP);
        let mut tiles = Vec::new();
        for (t, (label, img)) in images.into_iter().enumerate() {
            let x0 = GAP + t as u32 * (w + GAP);
            image::imageops::replace(&mut canvas, &img, x0 as i64, GAP as i64);
            tiles.push(Tile { label, x: x0, y: GAP, width: w, height: h });
        }
        let mut legend = Vec::new();
        let ly = GAP + h + GAP;
        for (k, entry) in class_map.entries().iter().enumerate() {
            let lx = GAP + k as u32 * (SWATCH + GAP);
            for dy in 0..SWATCH {
                for dx in 0..SWATCH {
                    canvas.put_pixel(lx + dx, ly + dy, Rgb(entry.color));
                }
            }
            legend.push((entry.id, lx, ly));
        }
        let name = format!("panel_{i:04}.png");
        let path = out_dir.join(&name);
        canvas.save(&path).map_err(|e| HarnessError::Image { path: path.clone(), message: e.to_string() })?;
        panels.push(Panel { frame_id: sample.frame_id.clone(), path, tiles, legend });
    }

    let mut html = String::from(
        "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>Segmentation panels</title></head>\n<body>\n",
    );
    html.push_str("<p>Legend:");
    for e in class_map.entries() {
        let [r, g, b] = e.color;
        write!(html, " <span style=\"background:rgb({r},{g},{b})\">&nbsp;&nbsp;&nbsp;</span> {}", escape(&e.name))
            .unwrap();
    }
    html.push_str("</p>\n");
    for p in &panels {
        let file = p.path.file_name().unwrap().to_string_lossy();
        let labels: Vec<&str> = p.tiles.iter().map(|t| t.label.as_str()).collect();
        write!(
            html,
            "<figure><img src=\"{file}\" alt=\"{id}\"><figcaption>{id}: {}</figcaption></figure>\n",
            escape(&labels.join(" | ")),
            id = escape(&p.frame_id)
        )
        .unwrap();
    }
    html.push_str("</body>\n</html>\n");
    let index = out_dir.join("index.html");
    fs::write(&index, html).map_err(HarnessError::io(&index))?;
    Ok(PanelIndex { index, panels })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
