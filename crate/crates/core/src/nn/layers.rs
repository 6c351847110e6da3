//! Layers with explicit forward/backward passes. Each layer keeps the cache
//! of its latest forward call; `backward` consumes it and accumulates
//! parameter gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::scalar::{gemm, Scalar};
use super::tensor::{col2im, im2col, Tensor, Window};

/// A named trainable tensor with its gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
    /// Whether the L2 penalty applies (weights yes, biases no).
    pub decay: bool,
}

impl<T: Scalar> Param<T> {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>, decay: bool) -> Self {
        let n = shape.iter().product();
        Param { name: name.into(), shape, value: vec![T::zero(); n], grad: vec![T::zero(); n], decay }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }
}

/// He-normal draw with standard deviation `sqrt(2 / fan_in)`.
pub fn kaiming<T: Scalar>(values: &mut [T], fan_in: usize, rng: &mut ChaCha8Rng) {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
    for v in values {
        *v = T::of_f64(normal.sample(rng));
    }
}

/// Stride-1 "same" convolution with a square odd kernel.
#[derive(Clone, Debug)]
pub struct Conv2d<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    cache: Option<(Vec<T>, (usize, usize, usize, usize))>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(name: &str, in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        assert!(kernel % 2 == 1, "kernel must be odd");
        Conv2d {
            weight: Param::zeros(format!("{name}.weight"), vec![out_channels, in_channels, kernel, kernel], true),
            bias: Param::zeros(format!("{name}.bias"), vec![out_channels], false),
            in_channels,
            out_channels,
            kernel,
            cache: None,
        }
    }

    pub fn init_kaiming(&mut self, rng: &mut ChaCha8Rng) {
        kaiming(&mut self.weight.value, self.in_channels * self.kernel * self.kernel, rng);
        self.bias.value.iter_mut().for_each(|b| *b = T::zero());
    }

    fn window(&self) -> Window {
        Window { kernel: self.kernel, stride: 1, pad: self.kernel / 2 }
    }

    pub fn forward(&mut self, x: &Tensor<T>, keep_cache: bool) -> Tensor<T> {
        assert_eq!(x.channels, self.in_channels, "{}: input channels", self.weight.name);
        let (_, n, h, w) = x.dims();
        let kk = self.in_channels * self.kernel * self.kernel;
        let cols = if self.kernel == 1 { x.data.clone() } else { im2col(x, self.window(), h, w) };
        let plane = n * h * w;
        let mut y = Tensor::zeros(self.out_channels, n, h, w);
        gemm(false, false, self.out_channels, plane, kk, &self.weight.value, &cols, false, &mut y.data);
        for (o, row) in y.data.chunks_mut(plane).enumerate() {
            let b = self.bias.value[o];
            row.iter_mut().for_each(|v| *v += b);
        }
        self.cache = keep_cache.then_some((cols, x.dims()));
        y
    }

    /// Accumulates parameter gradients; the input gradient is computed only
    /// when `need_dx` is set.
    pub fn backward(&mut self, dy: &Tensor<T>, need_dx: bool) -> Option<Tensor<T>> {
        let (cols, (c, n, h, w)) = self.cache.take().expect("backward without forward");
        let plane = n * h * w;
        let kk = self.in_channels * self.kernel * self.kernel;
        gemm(false, true, self.out_channels, kk, plane, &dy.data, &cols, true, &mut self.weight.grad);
        for (o, row) in dy.data.chunks(plane).enumerate() {
            self.bias.grad[o] += row.iter().copied().sum::<T>();
        }
        if !need_dx {
            return None;
        }
        let mut dcols = vec![T::zero(); kk * plane];
        gemm(true, false, kk, plane, self.out_channels, &self.weight.value, &dy.data, false, &mut dcols);
        Some(if self.kernel == 1 {
            Tensor::from_vec(c, n, h, w, dcols)
        } else {
            col2im(&dcols, c, n, h, w, self.window(), h, w)
        })
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param<T>; 2] {
        [&self.weight, &self.bias]
    }
}

/// Transposed convolution; weights are laid out `(in, out, k, k)`.
#[derive(Clone, Debug)]
pub struct ConvTranspose2d<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub window: Window,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> ConvTranspose2d<T> {
    /// Upsampling by `factor` with kernel `2 * factor` and padding `factor / 2`.
    pub fn upsample(name: &str, in_channels: usize, out_channels: usize, factor: usize) -> Self {
        let window = Window { kernel: 2 * factor, stride: factor, pad: factor / 2 };
        let k = window.kernel;
        ConvTranspose2d {
            weight: Param::zeros(format!("{name}.weight"), vec![in_channels, out_channels, k, k], true),
            bias: Param::zeros(format!("{name}.bias"), vec![out_channels], false),
            in_channels,
            out_channels,
            window,
            cache: None,
        }
    }

    /// Per-channel bilinear interpolation kernels (identity across channels).
    pub fn init_bilinear(&mut self) {
        let k = self.window.kernel;
        let f = k.div_ceil(2) as f64;
        let center = if k % 2 == 1 { f - 1.0 } else { f - 0.5 };
        let tap = |i: usize| 1.0 - (i as f64 - center).abs() / f;
        self.weight.value.iter_mut().for_each(|w| *w = T::zero());
        for c in 0..self.in_channels.min(self.out_channels) {
            for ky in 0..k {
                for kx in 0..k {
                    let i = ((c * self.out_channels + c) * k + ky) * k + kx;
                    self.weight.value[i] = T::of_f64(tap(ky) * tap(kx));
                }
            }
        }
        self.bias.value.iter_mut().for_each(|b| *b = T::zero());
    }

    pub fn out_size(&self, input: usize) -> usize {
        (input - 1) * self.window.stride + self.window.kernel - 2 * self.window.pad
    }

    pub fn forward(&mut self, x: &Tensor<T>, keep_cache: bool) -> Tensor<T> {
        assert_eq!(x.channels, self.in_channels, "{}: input channels", self.weight.name);
        let (_, n, h, w) = x.dims();
        let (oh, ow) = (self.out_size(h), self.out_size(w));
        let okk = self.out_channels * self.window.kernel * self.window.kernel;
        let plane = n * h * w;
        let mut cols = vec![T::zero(); okk * plane];
        gemm(true, false, okk, plane, self.in_channels, &self.weight.value, &x.data, false, &mut cols);
        let mut y = col2im(&cols, self.out_channels, n, oh, ow, self.window, h, w);
        let out_plane = n * oh * ow;
        for (o, row) in y.data.chunks_mut(out_plane).enumerate() {
            let b = self.bias.value[o];
            row.iter_mut().for_each(|v| *v += b);
        }
        self.cache = keep_cache.then(|| x.clone());
        y
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let x = self.cache.take().expect("backward without forward");
        let (_, n, h, w) = x.dims();
        let plane = n * h * w;
        let okk = self.out_channels * self.window.kernel * self.window.kernel;
        let dcols = im2col(dy, self.window, h, w);
        gemm(false, true, self.in_channels, okk, plane, &x.data, &dcols, true, &mut self.weight.grad);
        for (o, row) in dy.data.chunks(dy.plane()).enumerate() {
            self.bias.grad[o] += row.iter().copied().sum::<T>();
        }
        let mut dx = Tensor::zeros(self.in_channels, n, h, w);
        gemm(false, false, self.in_channels, plane, okk, &self.weight.value, &dcols, false, &mut dx.data);
        dx
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param<T>; 2] {
        [&self.weight, &self.bias]
    }
}

/// In-place ReLU; returns the activity mask for the backward pass.
pub fn relu_forward<T: Scalar>(x: &mut Tensor<T>) -> Vec<bool> {
    x.data
        .iter_mut()
        .map(|v| {
            let on = *v > T::zero();
            if !on {
                *v = T::zero();
            }
            on
        })
        .collect()
}

pub fn relu_backward<T: Scalar>(dy: &mut Tensor<T>, mask: &[bool]) {
    for (g, &on) in dy.data.iter_mut().zip(mask) {
        if !on {
            *g = T::zero();
        }
    }
}

/// 2x2 max pooling with stride 2; returns the pooled map and argmax indices.
/// Ties resolve to the first element in row-major window order.
pub fn maxpool_forward<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, Vec<u32>) {
    let (c, n, h, w) = x.dims();
    assert!(h % 2 == 0 && w % 2 == 0, "max pooling needs even sizes, got {h}x{w}");
    let (oh, ow) = (h / 2, w / 2);
    let mut y = Tensor::zeros(c, n, oh, ow);
    let mut arg = vec![0u32; y.data.len()];
    let mut o = 0;
    for cb in 0..c * n {
        let base = cb * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let i0 = base + 2 * oy * w + 2 * ox;
                let mut best = i0;
                for i in [i0 + 1, i0 + w, i0 + w + 1] {
                    if x.data[i] > x.data[best] {
                        best = i;
                    }
                }
                y.data[o] = x.data[best];
                arg[o] = best as u32;
                o += 1;
            }
        }
    }
    (y, arg)
}

pub fn maxpool_backward<T: Scalar>(dy: &Tensor<T>, arg: &[u32]) -> Tensor<T> {
    let mut dx = Tensor::zeros(dy.channels, dy.batch, dy.height * 2, dy.width * 2);
    for (&g, &i) in dy.data.iter().zip(arg) {
        dx.data[i as usize] += g;
    }
    dx
}

/// Inverted dropout: kept units are scaled by `1 / (1 - p)`.
pub fn dropout_forward<T: Scalar>(x: &mut Tensor<T>, p: f64, rng: &mut ChaCha8Rng) -> Vec<T> {
    let scale = T::of_f64(1.0 / (1.0 - p));
    let mask: Vec<T> = (0..x.data.len()).map(|_| if rng.random::<f64>() < p { T::zero() } else { scale }).collect();
    for (v, &m) in x.data.iter_mut().zip(&mask) {
        *v *= m;
    }
    mask
}
