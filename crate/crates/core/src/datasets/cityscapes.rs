use std::path::{Path, PathBuf};

use image::imageops::{resize, FilterType};

use super::{load_rgb, sorted_dir, ClassMap, DatasetError, DatasetIssue, FlowSource, LoadReport, Sample};
use crate::estimate::{estimate_flow, to_grayscale, PyramidParams};
use crate::io::read_flo;
use crate::SegMask;

/// Raw Cityscapes `labelIds` values and their class names.
const LABEL_IDS: [(u8, &str); 19] = [
    (7, "road"),
    (8, "sidewalk"),
    (11, "building"),
    (12, "wall"),
    (13, "fence"),
    (17, "pole"),
    (19, "traffic light"),
    (20, "traffic sign"),
    (21, "vegetation"),
    (22, "terrain"),
    (23, "sky"),
    (24, "person"),
    (25, "rider"),
    (26, "car"),
    (27, "truck"),
    (28, "bus"),
    (31, "train"),
    (32, "motorcycle"),
    (33, "bicycle"),
];

#[derive(Clone, Debug)]
pub struct CityscapesOptions {
    /// `train`, `val` or `test`.
    pub split: String,
    /// Output (width, height); `None` keeps the native resolution.
    pub resize_to: Option<(u32, u32)>,
    pub flow_source: FlowSource,
    pub pyramid: PyramidParams,
}

impl Default for CityscapesOptions {
    fn default() -> Self {
        CityscapesOptions {
            split: "val".into(),
            resize_to: Some((1024, 512)),
            flow_source: FlowSource::Estimate,
            pyramid: PyramidParams::default(),
        }
    }
}

/// Loads the fine annotations of one Cityscapes split:
///
/// ```text
/// root/leftImg8bit/<split>/<city>/<city>_<seq>_<frame>_leftImg8bit.png
/// root/gtFine/<split>/<city>/<city>_<seq>_<frame>_gtFine_labelIds.png
/// root/leftImg8bit_sequence/<split>/<city>/<city>_<seq>_<frame-1>_leftImg8bit.png
/// root/flow/<split>/<city>/<city>_<seq>_<frame>.flo            (precomputed)
/// ```
///
/// Raw label ids map onto `class_map` by class name; everything else becomes
/// the ignore id. Flow is the motion from the predecessor into the annotated
/// frame, anchored on the annotated frame, computed at native resolution and
/// then resized with vectors scaled by the resize ratio.
pub fn load_cityscapes(
    root: &Path,
    class_map: &ClassMap,
    options: &CityscapesOptions,
) -> Result<LoadReport, DatasetError> {
    let image_dir = root.join("leftImg8bit").join(&options.split);
    if !image_dir.is_dir() {
        return Err(DatasetError::Layout(format!("{} is missing", image_dir.display())));
    }
    let remap = label_remap(class_map)?;
    let mut report = LoadReport::default();
    for city_dir in sorted_dir(&image_dir)?.into_iter().filter(|p| p.is_dir()) {
        let city = city_dir.file_name().unwrap().to_string_lossy().to_string();
        for img_path in sorted_dir(&city_dir)? {
            let name = img_path.file_name().unwrap().to_string_lossy().to_string();
            let Some(stem) = name.strip_suffix("_leftImg8bit.png") else { continue };
            let Some((sequence_id, frame_no)) = parse_stem(stem) else {
                report.issues.push(DatasetIssue::Layout(format!("unrecognised file name {name}")));
                continue;
            };
            let frame_id = stem.to_string();
            let gt_path =
                root.join("gtFine").join(&options.split).join(&city).join(format!("{stem}_gtFine_labelIds.png"));
            if !gt_path.is_file() {
                report.issues.push(DatasetIssue::MissingModality { frame_id, modality: "gtFine labelIds" });
                continue;
            }
            let rgb = load_rgb(&img_path)?;
            let mask = read_label_ids(&gt_path, &remap)?;

            let prev_stem = frame_no.checked_sub(1).map(|p| format!("{sequence_id}_{p:06}"));
            let prev_path = prev_stem.as_ref().map(|p| {
                root.join("leftImg8bit_sequence").join(&options.split).join(&city).join(format!("{p}_leftImg8bit.png"))
            });
            let (flow, prev_frame_id) = match options.flow_source {
                FlowSource::None => (None, prev_stem.clone()),
                FlowSource::Precomputed => {
                    let p = root.join("flow").join(&options.split).join(&city).join(format!("{stem}.flo"));
                    if p.is_file() {
                        (Some(read_flo(&p)?), prev_stem.clone())
                    } else {
                        report.issues.push(DatasetIssue::FlowAbsent {
                            frame_id: frame_id.clone(),
                            reason: format!("{} not found", p.display()),
                        });
                        (None, prev_stem.clone())
                    }
                }
                FlowSource::Estimate | FlowSource::GroundTruth => match prev_path.filter(|p| p.is_file()) {
                    Some(p) => {
                        let prev = load_rgb(&p)?;
                        let backward = estimate_flow(&to_grayscale(&rgb), &to_grayscale(&prev), &options.pyramid)?;
                        (Some(backward.scaled(-1.0)), prev_stem.clone())
                    }
                    None => {
                        report.issues.push(DatasetIssue::FlowAbsent {
                            frame_id: frame_id.clone(),
                            reason: "predecessor frame missing".into(),
                        });
                        (None, None)
                    }
                },
            };

            let (rgb, flow, mask) = match options.resize_to {
                Some((w, h)) if (w, h) != rgb.dimensions() => (
                    resize(&rgb, w, h, FilterType::Triangle),
                    flow.map(|f| f.resize(w as usize, h as usize)),
                    mask.resize_nearest(w as usize, h as usize),
                ),
                _ => (rgb, flow, mask),
            };
            report.samples.push(Sample::new(rgb, flow, mask, frame_id, prev_frame_id, sequence_id, class_map)?);
        }
    }
    if report.samples.is_empty() {
        report.issues.push(DatasetIssue::Layout(format!("no annotated frames under {}", image_dir.display())));
    }
    Ok(report)
}

/// `<city>_<seq>_<frame>` → (`<city>_<seq>`, frame number).
fn parse_stem(stem: &str) -> Option<(String, u32)> {
    let (sequence, frame) = stem.rsplit_once('_')?;
    Some((sequence.to_string(), frame.parse().ok()?))
}

fn label_remap(class_map: &ClassMap) -> Result<[u8; 256], DatasetError> {
    let ignore = class_map
        .ignore_id()
        .ok_or_else(|| DatasetError::ClassMap("Cityscapes ingestion needs an ignore id".into()))?;
    let mut table = [ignore; 256];
    for (raw, name) in LABEL_IDS {
        if let Some(id) = class_map.id_for_name(name) {
            table[raw as usize] = id;
        }
    }
    Ok(table)
}

fn read_label_ids(path: &PathBuf, remap: &[u8; 256]) -> Result<SegMask, DatasetError> {
    let img = image::open(path)
        .map_err(|e| DatasetError::Image { path: path.display().to_string(), message: e.to_string() })?
        .to_luma8();
    let ids = img.as_raw().iter().map(|&raw| remap[raw as usize]).collect();
    Ok(SegMask::new(img.width() as usize, img.height() as usize, ids))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_parse() {
        assert_eq!(parse_stem("aachen_000000_000019"), Some(("aachen_000000".into(), 19)));
        assert_eq!(parse_stem("nounderscore"), None);
    }

    #[test]
    fn remap_twelve_classes() {
        let t = label_remap(&ClassMap::cityscapes12()).unwrap();
        assert_eq!(t[7], 8); // road
        assert_eq!(t[33], 0); // bicycle
        assert_eq!(t[8], 255); // sidewalk not in the 12-class subset
        assert_eq!(t[0], 255);
    }
}
