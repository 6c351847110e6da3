//! Dense coarse-to-fine Lucas–Kanade flow.
//!
//! Each pyramid level warps the second frame by the current flow, builds the
//! windowed 2x2 structure tensor of the (frame-averaged) gradients and solves
//! for an increment per pixel. Pixels whose tensor is near-singular keep
//! their current estimate, so the output is always dense.

use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::FlowField;

/// Smallest side allowed for the coarsest pyramid level.
pub const MIN_LEVEL_SIDE: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum EstimateError {
    #[error("frame sizes differ: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("coarsest pyramid level {0}x{1} is smaller than {MIN_LEVEL_SIDE}x{MIN_LEVEL_SIDE}")]
    ImageTooSmall(usize, usize),
    #[error("invalid pyramid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PyramidParams {
    pub levels: usize,
    pub scale_factor: f64,
    /// Odd side length of the square aggregation window.
    pub window: usize,
    pub iterations_per_level: usize,
}

impl Default for PyramidParams {
    fn default() -> Self {
        PyramidParams { levels: 3, scale_factor: 0.5, window: 15, iterations_per_level: 3 }
    }
}

impl PyramidParams {
    pub fn validate(&self) -> Result<(), EstimateError> {
        let bad = |m: &str| Err(EstimateError::InvalidParams(m.to_string()));
        if self.levels < 1 {
            return bad("levels must be >= 1");
        }
        if !(self.scale_factor > 0.0 && self.scale_factor < 1.0) {
            return bad("scale_factor must lie in (0, 1)");
        }
        if self.window < 3 || self.window % 2 == 0 {
            return bad("window must be odd and >= 3");
        }
        Ok(())
    }

    fn level_sizes(&self, width: usize, height: usize) -> Vec<(usize, usize)> {
        let mut sizes = vec![(width, height)];
        for _ in 1..self.levels {
            let &(w, h) = sizes.last().unwrap();
            let next = |s: usize| ((s as f64 * self.scale_factor).round() as usize).max(1);
            sizes.push((next(w), next(h)));
        }
        sizes
    }
}

/// Luma `0.299 R + 0.587 G + 0.114 B`, rounded to the nearest level.
pub fn to_grayscale(rgb: &RgbImage) -> GrayImage {
    let mut out = GrayImage::new(rgb.width(), rgb.height());
    for (o, p) in out.pixels_mut().zip(rgb.pixels()) {
        let [r, g, b] = p.0;
        let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
        o.0[0] = y.round().clamp(0.0, 255.0) as u8;
    }
    out
}

#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Plane {
    fn from_gray(img: &GrayImage) -> Self {
        Plane {
            w: img.width() as usize,
            h: img.height() as usize,
            data: img.as_raw().iter().map(|&p| p as f32).collect(),
        }
    }

    fn at(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.data[y * self.w + x]
    }

    /// Bilinear sample with clamped borders.
    fn sample(&self, x: f32, y: f32) -> f32 {
        let x = x.clamp(0.0, (self.w - 1) as f32);
        let y = y.clamp(0.0, (self.h - 1) as f32);
        let (x0, y0) = (x.floor(), y.floor());
        let (tx, ty) = (x - x0, y - y0);
        let (x0, y0) = (x0 as isize, y0 as isize);
        let top = self.at(x0, y0) * (1.0 - tx) + self.at(x0 + 1, y0) * tx;
        let bottom = self.at(x0, y0 + 1) * (1.0 - tx) + self.at(x0 + 1, y0 + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    /// Separable binomial [1 4 6 4 1] / 16 blur.
    fn blurred(&self) -> Plane {
        const K: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let mut tmp = vec![0.0; self.data.len()];
        for y in 0..self.h {
            for x in 0..self.w {
                tmp[y * self.w + x] = (0..5).map(|k| K[k] * self.at(x as isize + k as isize - 2, y as isize)).sum();
            }
        }
        let tmp = Plane { w: self.w, h: self.h, data: tmp };
        let mut out = vec![0.0; self.data.len()];
        for y in 0..self.h {
            for x in 0..self.w {
                out[y * self.w + x] = (0..5).map(|k| K[k] * tmp.at(x as isize, y as isize + k as isize - 2)).sum();
            }
        }
        Plane { w: self.w, h: self.h, data: out }
    }

    fn resampled(&self, w: usize, h: usize) -> Plane {
        let sx = self.w as f32 / w as f32;
        let sy = self.h as f32 / h as f32;
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(self.sample((x as f32 + 0.5) * sx - 0.5, (y as f32 + 0.5) * sy - 0.5));
            }
        }
        Plane { w, h, data }
    }

    /// Central differences, one-sided at the clamped border.
    fn gradients(&self) -> (Vec<f32>, Vec<f32>) {
        let mut gx = vec![0.0; self.data.len()];
        let mut gy = vec![0.0; self.data.len()];
        for y in 0..self.h as isize {
            for x in 0..self.w as isize {
                let i = y as usize * self.w + x as usize;
                gx[i] = 0.5 * (self.at(x + 1, y) - self.at(x - 1, y));
                gy[i] = 0.5 * (self.at(x, y + 1) - self.at(x, y - 1));
            }
        }
        (gx, gy)
    }
}

/// Window sums through a summed-area table; windows are clipped at borders.
fn box_sum(values: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    let mut table = vec![0.0f64; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += values[y * w + x];
            table[(y + 1) * (w + 1) + x + 1] = table[y * (w + 1) + x + 1] + row;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(radius), (y + radius + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(radius), (x + radius + 1).min(w));
            out[y * w + x] = table[y1 * (w + 1) + x1] - table[y0 * (w + 1) + x1] - table[y1 * (w + 1) + x0]
                + table[y0 * (w + 1) + x0];
        }
    }
    out
}

fn build_pyramid(base: Plane, sizes: &[(usize, usize)]) -> Vec<Plane> {
    let mut levels = vec![base];
    for &(w, h) in &sizes[1..] {
        let prev = levels.last().unwrap();
        levels.push(prev.blurred().resampled(w, h));
    }
    levels
}

/// Estimates the flow that carries `prev` onto `next`:
/// `prev(x) ≈ next(x + flow(x))`.
pub fn estimate_flow(prev: &GrayImage, next: &GrayImage, params: &PyramidParams) -> Result<FlowField, EstimateError> {
    params.validate()?;
    if prev.dimensions() != next.dimensions() {
        return Err(EstimateError::DimensionMismatch(prev.dimensions(), next.dimensions()));
    }
    let sizes = params.level_sizes(prev.width() as usize, prev.height() as usize);
    let &(cw, ch) = sizes.last().unwrap();
    if cw < MIN_LEVEL_SIDE || ch < MIN_LEVEL_SIDE {
        return Err(EstimateError::ImageTooSmall(cw, ch));
    }
    let prev_pyr = build_pyramid(Plane::from_gray(prev), &sizes);
    let next_pyr = build_pyramid(Plane::from_gray(next), &sizes);

    let radius = params.window / 2;
    let min_eigen = 1e-4 * (params.window * params.window) as f64;
    let (mut u, mut v) = (Vec::new(), Vec::new());
    let mut level_size = (0, 0);

    for level in (0..params.levels).rev() {
        let (w, h) = sizes[level];
        let (p, n) = (&prev_pyr[level], &next_pyr[level]);
        if level == params.levels - 1 {
            u = vec![0.0f32; w * h];
            v = vec![0.0f32; w * h];
        } else {
            let coarse = FlowField::new(level_size.0, level_size.1, u, v);
            let fine = coarse.resize(w, h);
            u = fine.u().to_vec();
            v = fine.v().to_vec();
        }
        level_size = (w, h);

        let (pgx, pgy) = p.gradients();
        for _ in 0..params.iterations_per_level {
            let mut warped = Plane { w, h, data: vec![0.0; w * h] };
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    warped.data[i] = n.sample(x as f32 + u[i], y as f32 + v[i]);
                }
            }
            let (wgx, wgy) = warped.gradients();
            let mut terms: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; w * h]);
            for i in 0..w * h {
                let gx = 0.5 * (pgx[i] + wgx[i]) as f64;
                let gy = 0.5 * (pgy[i] + wgy[i]) as f64;
                let gt = (warped.data[i] - p.data[i]) as f64;
                terms[0][i] = gx * gx;
                terms[1][i] = gx * gy;
                terms[2][i] = gy * gy;
                terms[3][i] = gx * gt;
                terms[4][i] = gy * gt;
            }
            let [sxx, sxy, syy, sxt, syt] = terms.map(|t| box_sum(&t, w, h, radius));
            for i in 0..w * h {
                let (a, b, c) = (sxx[i], sxy[i], syy[i]);
                let half_trace = 0.5 * (a + c);
                let spread = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                if half_trace - spread < min_eigen {
                    continue;
                }
                let det = a * c - b * b;
                let du = -(c * sxt[i] - b * syt[i]) / det;
                let dv = -(a * syt[i] - b * sxt[i]) / det;
                u[i] += du as f32;
                v[i] += dv as f32;
            }
        }
    }
    Ok(FlowField::new(level_size.0, level_size.1, u, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Luma, Rgb};

    #[test]
    fn grayscale_examples() {
        let img = RgbImage::from_fn(3, 1, |x, _| match x {
            0 => Rgb([255, 255, 255]),
            1 => Rgb([0, 0, 0]),
            _ => Rgb([255, 0, 0]),
        });
        let g = to_grayscale(&img);
        assert_eq!(g.as_raw(), &vec![255, 0, 76]);
    }

    #[test]
    fn uniform_frames_give_zero_flow() {
        let a = GrayImage::from_pixel(32, 32, Luma([90]));
        let b = GrayImage::from_pixel(32, 32, Luma([140]));
        let f = estimate_flow(&a, &b, &PyramidParams::default()).unwrap();
        assert!(f.u().iter().chain(f.v()).all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_mismatch_and_tiny_frames() {
        let a = GrayImage::new(32, 32);
        let b = GrayImage::new(32, 30);
        assert!(matches!(estimate_flow(&a, &b, &PyramidParams::default()), Err(EstimateError::DimensionMismatch(..))));
        let tiny = GrayImage::new(20, 20);
        assert_eq!(estimate_flow(&tiny, &tiny, &PyramidParams::default()), Err(EstimateError::ImageTooSmall(5, 5)));
        let even = PyramidParams { window: 4, ..Default::default() };
        assert!(matches!(estimate_flow(&a, &a, &even), Err(EstimateError::InvalidParams(_))));
    }

    #[test]
    fn box_sum_clips_at_borders() {
        let ones = vec![1.0; 5 * 4];
        let s = box_sum(&ones, 5, 4, 1);
        assert_eq!(s[0], 4.0);
        assert_eq!(s[1 * 5 + 2], 9.0);
        assert_eq!(s[3 * 5 + 4], 4.0);
    }
}
