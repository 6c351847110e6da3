use std::path::{Path, PathBuf};

use super::{load_rgb, sorted_dir, ClassMap, DatasetError, DatasetIssue, LoadReport, Sample};
use crate::io::{read_flo, read_flow_png16, read_mask};

/// Loads a Virtual KITTI style tree:
///
/// ```text
/// root/<sequence>/rgb/<frame>.png
/// root/<sequence>/flow/<frame>.png   (16-bit KITTI encoding) or <frame>.flo
/// root/<sequence>/seg/<frame>.png    (class ids or class colors)
/// ```
///
/// Flow is always the frame-anchored annotation. Frames missing a modality
/// are skipped and listed in the report.
pub fn load_vkitti(root: &Path, class_map: &ClassMap) -> Result<LoadReport, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::Layout(format!("{} is not a directory", root.display())));
    }
    let mut report = LoadReport::default();
    let sequences: Vec<PathBuf> = sorted_dir(root)?.into_iter().filter(|p| p.join("rgb").is_dir()).collect();
    if sequences.is_empty() {
        report.issues.push(DatasetIssue::Layout(format!("no <sequence>/rgb directories under {}", root.display())));
        return Ok(report);
    }
    for seq in sequences {
        let seq_name = seq.file_name().unwrap().to_string_lossy().to_string();
        let frames: Vec<PathBuf> =
            sorted_dir(&seq.join("rgb"))?.into_iter().filter(|p| p.extension().is_some_and(|e| e == "png")).collect();
        let mut prev_id = None;
        for rgb_path in frames {
            let stem = rgb_path.file_stem().unwrap().to_string_lossy().to_string();
            let frame_id = format!("{seq_name}/{stem}");
            let seg_path = seq.join("seg").join(format!("{stem}.png"));
            let flo_path = seq.join("flow").join(format!("{stem}.flo"));
            let png_path = seq.join("flow").join(format!("{stem}.png"));
            if !seg_path.is_file() {
                report.issues.push(DatasetIssue::MissingModality { frame_id, modality: "seg" });
                continue;
            }
            let flow = if flo_path.is_file() {
                read_flo(&flo_path)?
            } else if png_path.is_file() {
                read_flow_png16(&png_path)?
            } else {
                report.issues.push(DatasetIssue::MissingModality { frame_id, modality: "flow" });
                continue;
            };
            let rgb = load_rgb(&rgb_path)?;
            let mask = read_mask(&seg_path, class_map)?;
            let sample = Sample::new(
                rgb,
                Some(flow),
                mask,
                frame_id.clone(),
                prev_id.replace(frame_id),
                seq_name.clone(),
                class_map,
            )?;
            report.samples.push(sample);
        }
    }
    Ok(report)
}
