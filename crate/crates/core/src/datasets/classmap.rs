use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: u8,
    pub name: String,
    pub color: [u8; 3],
}

impl ClassEntry {
    pub fn new(id: u8, name: &str, color: [u8; 3]) -> Self {
        ClassEntry { id, name: name.to_string(), color }
    }
}

/// Ordered class list with contiguous ids from 0 and an optional ignore id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMap {
    entries: Vec<ClassEntry>,
    ignore_id: Option<u8>,
}

impl ClassMap {
    pub fn new(entries: Vec<ClassEntry>, ignore_id: Option<u8>) -> Result<Self, DatasetError> {
        let bad = |m: String| Err(DatasetError::ClassMap(m));
        if entries.is_empty() {
            return bad("class map has no entries".into());
        }
        let mut colors = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.id as usize != i {
                return bad(format!("class `{}` has id {}, expected {}", e.name, e.id, i));
            }
            if !colors.insert(e.color) {
                return bad(format!("color {:?} used twice", e.color));
            }
        }
        if let Some(ignore) = ignore_id {
            if (ignore as usize) < entries.len() {
                return bad(format!("ignore id {ignore} collides with a class id"));
            }
        }
        Ok(ClassMap { entries, ignore_id })
    }

    /// Parses `id,name,r,g,b` lines; an `ignore,<id>` line sets the ignore id.
    /// Blank lines and `#` comments are skipped.
    pub fn from_csv(text: &str) -> Result<Self, DatasetError> {
        let mut entries = Vec::new();
        let mut ignore = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("id,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let err = || DatasetError::ClassMap(format!("line {}: cannot parse `{line}`", lineno + 1));
            let num = |s: &str| s.parse::<u8>().map_err(|_| err());
            match fields.as_slice() {
                ["ignore", id] => ignore = Some(num(id)?),
                [id, name, r, g, b] => entries.push(ClassEntry::new(num(id)?, name, [num(r)?, num(g)?, num(b)?])),
                _ => return Err(err()),
            }
        }
        ClassMap::new(entries, ignore)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(|e| DatasetError::Layout(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text)
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ignore_id(&self) -> Option<u8> {
        self.ignore_id
    }

    pub fn name(&self, id: u8) -> Option<&str> {
        self.entries.get(id as usize).map(|e| e.name.as_str())
    }

    pub fn id_for_color(&self, color: [u8; 3]) -> Option<u8> {
        self.entries.iter().find(|e| e.color == color).map(|e| e.id)
    }

    pub fn id_for_name(&self, name: &str) -> Option<u8> {
        let key = normalize(name);
        self.entries.iter().find(|e| normalize(&e.name) == key).map(|e| e.id)
    }

    /// Black for ids outside the map.
    pub fn color_of(&self, id: u8) -> [u8; 3] {
        self.entries.get(id as usize).map(|e| e.color).unwrap_or([0, 0, 0])
    }

    pub fn accepts(&self, id: u8) -> bool {
        (id as usize) < self.entries.len() || Some(id) == self.ignore_id
    }

    /// Background, a (typically camouflaged) moving object and a static object.
    pub fn synthetic() -> Self {
        ClassMap::new(
            vec![
                ClassEntry::new(0, "background", [128, 128, 128]),
                ClassEntry::new(1, "moving", [255, 64, 0]),
                ClassEntry::new(2, "static", [0, 96, 255]),
            ],
            Some(255),
        )
        .expect("valid preset")
    }

    /// The 14 Virtual KITTI classes.
    pub fn vkitti14() -> Self {
        let rows: [(&str, [u8; 3]); 14] = [
            ("Terrain", [210, 0, 200]),
            ("Sky", [90, 200, 255]),
            ("Tree", [0, 199, 0]),
            ("Vegetation", [90, 240, 0]),
            ("Building", [140, 140, 140]),
            ("Road", [100, 60, 100]),
            ("GuardRail", [255, 100, 255]),
            ("TrafficSign", [255, 255, 0]),
            ("TrafficLight", [200, 200, 0]),
            ("Pole", [255, 130, 0]),
            ("Misc", [80, 80, 80]),
            ("Truck", [160, 60, 60]),
            ("Car", [255, 127, 80]),
            ("Van", [0, 139, 139]),
        ];
        Self::from_rows(&rows, Some(255))
    }

    /// The 12 Cityscapes classes reported in the comparison tables.
    pub fn cityscapes12() -> Self {
        let rows: [(&str, [u8; 3]); 12] = [
            ("Bicycle", [119, 11, 32]),
            ("Person", [220, 20, 60]),
            ("Rider", [255, 0, 0]),
            ("Motorcycle", [0, 0, 230]),
            ("Bus", [0, 60, 100]),
            ("Car", [0, 0, 142]),
            ("Train", [0, 80, 100]),
            ("Building", [70, 70, 70]),
            ("Road", [128, 64, 128]),
            ("Truck", [0, 0, 70]),
            ("Sky", [70, 130, 180]),
            ("TrafficSign", [220, 220, 0]),
        ];
        Self::from_rows(&rows, Some(255))
    }

    /// The standard 19 Cityscapes training classes.
    pub fn cityscapes19() -> Self {
        let rows: [(&str, [u8; 3]); 19] = [
            ("Road", [128, 64, 128]),
            ("Sidewalk", [244, 35, 232]),
            ("Building", [70, 70, 70]),
            ("Wall", [102, 102, 156]),
            ("Fence", [190, 153, 153]),
            ("Pole", [153, 153, 153]),
            ("TrafficLight", [250, 170, 30]),
            ("TrafficSign", [220, 220, 0]),
            ("Vegetation", [107, 142, 35]),
            ("Terrain", [152, 251, 152]),
            ("Sky", [70, 130, 180]),
            ("Person", [220, 20, 60]),
            ("Rider", [255, 0, 0]),
            ("Car", [0, 0, 142]),
            ("Truck", [0, 0, 70]),
            ("Bus", [0, 60, 100]),
            ("Train", [0, 80, 100]),
            ("Motorcycle", [0, 0, 230]),
            ("Bicycle", [119, 11, 32]),
        ];
        Self::from_rows(&rows, Some(255))
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "synthetic" => Some(Self::synthetic()),
            "vkitti14" => Some(Self::vkitti14()),
            "cityscapes12" => Some(Self::cityscapes12()),
            "cityscapes19" => Some(Self::cityscapes19()),
            _ => None,
        }
    }

    fn from_rows(rows: &[(&str, [u8; 3])], ignore: Option<u8>) -> Self {
        let entries =
            rows.iter().enumerate().map(|(i, (name, color))| ClassEntry::new(i as u8, name, *color)).collect();
        ClassMap::new(entries, ignore).expect("valid preset")
    }
}

fn normalize(name: &str) -> String {
    name.chars().filter(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_lowercase()).collect()
}
