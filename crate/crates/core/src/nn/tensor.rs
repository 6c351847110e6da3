use super::scalar::Scalar;

/// Activation tensor stored channel-major across the batch (C, N, H, W).
///
/// With this layout a batch of feature maps is directly a `C x (N*H*W)`
/// matrix, so 1x1 convolutions are a single gemm and im2col columns line up
/// with output pixels of every batch element.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub channels: usize,
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(channels: usize, batch: usize, height: usize, width: usize) -> Self {
        Tensor { channels, batch, height, width, data: vec![T::zero(); channels * batch * height * width] }
    }

    pub fn from_vec(channels: usize, batch: usize, height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), channels * batch * height * width, "tensor buffer size");
        Tensor { channels, batch, height, width, data }
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.channels, self.batch, self.height, self.width)
    }

    /// Pixels per channel across the whole batch.
    pub fn plane(&self) -> usize {
        self.batch * self.height * self.width
    }

    pub fn index(&self, c: usize, b: usize, y: usize, x: usize) -> usize {
        ((c * self.batch + b) * self.height + y) * self.width + x
    }

    pub fn get(&self, c: usize, b: usize, y: usize, x: usize) -> T {
        self.data[self.index(c, b, y, x)]
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        assert_eq!(self.dims(), other.dims(), "tensor shapes differ");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Stacks channels of `other` after the channels of `self`.
    pub fn concat_channels(mut self, other: &Tensor<T>) -> Tensor<T> {
        assert_eq!((self.batch, self.height, self.width), (other.batch, other.height, other.width));
        self.channels += other.channels;
        self.data.extend_from_slice(&other.data);
        self
    }

    /// Channels `[start, start + count)`.
    pub fn channel_slice(&self, start: usize, count: usize) -> Tensor<T> {
        let p = self.plane();
        Tensor::from_vec(count, self.batch, self.height, self.width, self.data[start * p..(start + count) * p].to_vec())
    }

    /// Batch element `b` as a standalone single-item tensor.
    pub fn item(&self, b: usize) -> Tensor<T> {
        let hw = self.height * self.width;
        let mut data = Vec::with_capacity(self.channels * hw);
        for c in 0..self.channels {
            let start = (c * self.batch + b) * hw;
            data.extend_from_slice(&self.data[start..start + hw]);
        }
        Tensor::from_vec(self.channels, 1, self.height, self.width, data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Geometry of a sliding-window operator: kernel size, stride and
/// symmetric zero padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Window {
    pub fn out_size(&self, input: usize) -> usize {
        (input + 2 * self.pad - self.kernel) / self.stride + 1
    }
}

/// Unfolds `x` into a `(C*k*k) x (N*OH*OW)` column matrix.
pub fn im2col<T: Scalar>(x: &Tensor<T>, win: Window, out_h: usize, out_w: usize) -> Vec<T> {
    let (c_in, n, h, w) = x.dims();
    let k = win.kernel;
    let cols_n = n * out_h * out_w;
    let mut cols = vec![T::zero(); c_in * k * k * cols_n];
    for c in 0..c_in {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst_row = &mut cols[row * cols_n..(row + 1) * cols_n];
                for b in 0..n {
                    let src = &x.data[(c * n + b) * h * w..(c * n + b + 1) * h * w];
                    for oy in 0..out_h {
                        let iy = (oy * win.stride + ky) as isize - win.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src_row = &src[iy as usize * w..(iy as usize + 1) * w];
                        let dst = &mut dst_row[(b * out_h + oy) * out_w..(b * out_h + oy + 1) * out_w];
                        if win.stride == 1 {
                            // contiguous run of valid columns
                            let lo = win.pad.saturating_sub(kx);
                            let hi = (w + win.pad).saturating_sub(kx).min(out_w);
                            if lo < hi {
                                let s0 = lo + kx - win.pad;
                                dst[lo..hi].copy_from_slice(&src_row[s0..s0 + (hi - lo)]);
                            }
                        } else {
                            for (ox, d) in dst.iter_mut().enumerate() {
                                let ix = (ox * win.stride + kx) as isize - win.pad as isize;
                                if ix >= 0 && ix < w as isize {
                                    *d = src_row[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-adds columns back into a `(C, N, H, W)` image.
pub fn col2im<T: Scalar>(
    cols: &[T],
    channels: usize,
    batch: usize,
    height: usize,
    width: usize,
    win: Window,
    out_h: usize,
    out_w: usize,
) -> Tensor<T> {
    let k = win.kernel;
    let cols_n = batch * out_h * out_w;
    let mut img = Tensor::zeros(channels, batch, height, width);
    for c in 0..channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src_row = &cols[row * cols_n..(row + 1) * cols_n];
                for b in 0..batch {
                    let base = (c * batch + b) * height * width;
                    for oy in 0..out_h {
                        let iy = (oy * win.stride + ky) as isize - win.pad as isize;
                        if iy < 0 || iy >= height as isize {
                            continue;
                        }
                        let dst = &mut img.data[base + iy as usize * width..base + (iy as usize + 1) * width];
                        let src = &src_row[(b * out_h + oy) * out_w..(b * out_h + oy + 1) * out_w];
                        if win.stride == 1 {
                            let lo = win.pad.saturating_sub(kx);
                            let hi = (width + win.pad).saturating_sub(kx).min(out_w);
                            if lo < hi {
                                let d0 = lo + kx - win.pad;
                                for (d, &s) in dst[d0..d0 + (hi - lo)].iter_mut().zip(&src[lo..hi]) {
                                    *d += s;
                                }
                            }
                        } else {
                            for (ox, &s) in src.iter().enumerate() {
                                let ix = (ox * win.stride + kx) as isize - win.pad as isize;
                                if ix >= 0 && ix < width as isize {
                                    dst[ix as usize] += s;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_im2col(x: &Tensor<f64>, win: Window, oh: usize, ow: usize) -> Vec<f64> {
        let (c_in, n, h, w) = x.dims();
        let k = win.kernel;
        let cols_n = n * oh * ow;
        let mut out = vec![0.0; c_in * k * k * cols_n];
        for c in 0..c_in {
            for ky in 0..k {
                for kx in 0..k {
                    for b in 0..n {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let iy = (oy * win.stride + ky) as isize - win.pad as isize;
                                let ix = (ox * win.stride + kx) as isize - win.pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    out[((c * k + ky) * k + kx) * cols_n + (b * oh + oy) * ow + ox] =
                                        x.get(c, b, iy as usize, ix as usize);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn im2col_matches_naive_and_col2im_is_adjoint() {
        for win in [
            Window { kernel: 3, stride: 1, pad: 1 },
            Window { kernel: 4, stride: 2, pad: 1 },
            Window { kernel: 16, stride: 8, pad: 4 },
        ] {
            let (c, n, h, w) = (2, 2, 16, 8);
            let x = Tensor::from_vec(c, n, h, w, (0..c * n * h * w).map(|i| (i as f64 * 0.37).sin()).collect());
            let (oh, ow) = (win.out_size(h), win.out_size(w));
            let cols = im2col(&x, win, oh, ow);
            assert_eq!(cols, naive_im2col(&x, win, oh, ow));
            // <im2col(x), y> == <x, col2im(y)>
            let y: Vec<f64> = (0..cols.len()).map(|i| (i as f64 * 0.11).cos()).collect();
            let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
            let back = col2im(&y, c, n, h, w, win, oh, ow);
            let rhs: f64 = x.data.iter().zip(&back.data).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "{win:?}");
        }
    }
}
