use serde::{Deserialize, Serialize};

/// Per-pixel class-id map, used for both ground truth and predictions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegMask {
    width: usize,
    height: usize,
    ids: Vec<u8>,
}

impl SegMask {
    pub fn new(width: usize, height: usize, ids: Vec<u8>) -> Self {
        assert!(width >= 1 && height >= 1, "mask must be at least 1x1");
        assert_eq!(ids.len(), width * height, "mask buffer does not match {width}x{height}");
        SegMask { width, height, ids }
    }

    pub fn filled(width: usize, height: usize, id: u8) -> Self {
        Self::new(width, height, vec![id; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn ids(&self) -> &[u8] {
        &self.ids
    }

    pub fn ids_mut(&mut self) -> &mut [u8] {
        &mut self.ids
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.ids[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, id: u8) {
        self.ids[y * self.width + x] = id;
    }

    /// Nearest-neighbour resize; never invents ids that are not in the source.
    pub fn resize_nearest(&self, width: usize, height: usize) -> SegMask {
        let mut ids = Vec::with_capacity(width * height);
        for y in 0..height {
            let sy = ((y as f64 + 0.5) * self.height as f64 / height as f64) as usize;
            let sy = sy.min(self.height - 1);
            for x in 0..width {
                let sx = ((x as f64 + 0.5) * self.width as f64 / width as f64) as usize;
                ids.push(self.ids[sy * self.width + sx.min(self.width - 1)]);
            }
        }
        SegMask::new(width, height, ids)
    }
}
