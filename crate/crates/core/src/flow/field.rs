use serde::{Deserialize, Serialize};

/// Per-pixel 2D motion vectors between two consecutive frames.
///
/// Invalid pixels always hold `u = v = 0`; every constructor enforces this
/// canonical form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
    valid: Vec<bool>,
}

impl FlowField {
    /// Builds a field where every pixel is valid.
    pub fn new(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>) -> Self {
        let valid = vec![true; width * height];
        Self::with_validity(width, height, u, v, valid)
    }

    pub fn with_validity(width: usize, height: usize, mut u: Vec<f32>, mut v: Vec<f32>, valid: Vec<bool>) -> Self {
        assert!(width >= 1 && height >= 1, "flow field must be at least 1x1");
        let n = width * height;
        assert!(u.len() == n && v.len() == n && valid.len() == n, "flow buffers do not match {width}x{height}");
        for ((u, v), ok) in u.iter_mut().zip(v.iter_mut()).zip(&valid) {
            if !ok {
                *u = 0.0;
                *v = 0.0;
            }
        }
        FlowField { width, height, u, v, valid }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        Self::new(width, height, vec![0.0; n], vec![0.0; n])
    }

    /// Every pixel carries the same displacement.
    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> Self {
        let n = width * height;
        Self::new(width, height, vec![u; n], vec![v; n])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn set(&mut self, x: usize, y: usize, u: f32, v: f32) {
        let i = y * self.width + x;
        if self.valid[i] {
            self.u[i] = u;
            self.v[i] = v;
        }
    }

    /// Bilinear resample to a new grid, scaling the vectors by the resize
    /// ratio per axis so displacements stay expressed in output pixels.
    /// A sample is valid only when all contributing source pixels are valid.
    pub fn resize(&self, width: usize, height: usize) -> FlowField {
        let sx = width as f32 / self.width as f32;
        let sy = height as f32 / self.height as f32;
        let n = width * height;
        let (mut u, mut v, mut valid) = (vec![0.0; n], vec![0.0; n], vec![false; n]);
        for y in 0..height {
            let fy = ((y as f32 + 0.5) / sy - 0.5).clamp(0.0, (self.height - 1) as f32);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = fy - y0 as f32;
            for x in 0..width {
                let fx = ((x as f32 + 0.5) / sx - 0.5).clamp(0.0, (self.width - 1) as f32);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = fx - x0 as f32;
                let idx = [
                    (y0 * self.width + x0, (1.0 - tx) * (1.0 - ty)),
                    (y0 * self.width + x1, tx * (1.0 - ty)),
                    (y1 * self.width + x0, (1.0 - tx) * ty),
                    (y1 * self.width + x1, tx * ty),
                ];
                let ok = idx.iter().all(|&(i, w)| w == 0.0 || self.valid[i]);
                let o = y * width + x;
                valid[o] = ok;
                if ok {
                    let (mut su, mut sv) = (0.0, 0.0);
                    for &(i, w) in &idx {
                        if w != 0.0 {
                            su += w * self.u[i];
                            sv += w * self.v[i];
                        }
                    }
                    u[o] = su * sx;
                    v[o] = sv * sy;
                }
            }
        }
        FlowField::with_validity(width, height, u, v, valid)
    }

    /// Rotates every vector by `theta` radians (counter-clockwise in the
    /// (u, v) plane) and negation with `theta = pi`.
    pub fn rotated(&self, theta: f64) -> FlowField {
        let (s, c) = theta.sin_cos();
        let u = self.u.iter().zip(&self.v).map(|(&u, &v)| (c * u as f64 - s * v as f64) as f32).collect();
        let v = self.u.iter().zip(&self.v).map(|(&u, &v)| (s * u as f64 + c * v as f64) as f32).collect();
        FlowField::with_validity(self.width, self.height, u, v, self.valid.clone())
    }

    pub fn scaled(&self, factor: f32) -> FlowField {
        FlowField::with_validity(
            self.width,
            self.height,
            self.u.iter().map(|u| u * factor).collect(),
            self.v.iter().map(|v| v * factor).collect(),
            self.valid.clone(),
        )
    }
}

/// Per-pixel Euclidean length `sqrt(u^2 + v^2)`.
pub fn magnitude(flow: &FlowField) -> Vec<f32> {
    flow.u.iter().zip(&flow.v).map(|(&u, &v)| (u as f64).hypot(v as f64) as f32).collect()
}

/// Per-pixel `atan2(v, u)` in `(-pi, pi]`; zero-length vectors map to 0.
pub fn direction(flow: &FlowField) -> Vec<f32> {
    flow.u.iter().zip(&flow.v).map(|(&u, &v)| vector_angle(u as f64, v as f64) as f32).collect()
}

pub(crate) fn vector_angle(u: f64, v: f64) -> f64 {
    if u == 0.0 && v == 0.0 {
        return 0.0;
    }
    let a = v.atan2(u);
    // atan2 returns -pi for (negative u, -0.0); fold onto the closed end.
    if a <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}
