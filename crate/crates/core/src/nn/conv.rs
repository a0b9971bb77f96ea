use std::ops::Range;

use rand::Rng;

use super::{FeatureMap, ParamLayout};

/// Square-kernel 2-D convolution with zero padding, lowered to a single
/// GEMM per sample through an im2col buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    weight: Range<usize>,
    bias: Range<usize>,
}

impl Conv2d {
    pub fn new(
        layout: &mut ParamLayout,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        assert!(kernel > 0 && stride > 0);
        let weight = layout.alloc(out_channels * in_channels * kernel * kernel);
        let bias = layout.alloc(out_channels);
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight,
            bias,
        }
    }

    /// 3x3, padding 1.
    pub fn k3(
        layout: &mut ParamLayout,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
    ) -> Self {
        Self::new(layout, in_channels, out_channels, 3, stride, 1)
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn output_size(&self, height: usize, width: usize) -> (usize, usize) {
        let f = |n: usize| (n + 2 * self.padding - self.kernel) / self.stride + 1;
        (f(height), f(width))
    }

    /// He-uniform weights, zero bias.
    pub fn init(&self, params: &mut [f32], rng: &mut impl Rng) {
        let bound = (6.0 / self.patch_len() as f32).sqrt();
        for w in &mut params[self.weight.clone()] {
            *w = rng.random_range(-bound..bound);
        }
        params[self.bias.clone()].fill(0.0);
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.padding == 0
    }

    fn im2col(&self, x: &FeatureMap, oh: usize, ow: usize) -> Vec<f32> {
        let k = self.kernel;
        let p = oh * ow;
        let mut col = vec![0.0f32; self.patch_len() * p];
        let (h, w) = (x.height as isize, x.width as isize);
        let pad = self.padding as isize;
        let s = self.stride as isize;
        for c in 0..self.in_channels {
            let plane = &x.data[c * x.spatial()..(c + 1) * x.spatial()];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let dst = &mut col[row * p..(row + 1) * p];
                    for oy in 0..oh {
                        let iy = oy as isize * s + ky as isize - pad;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        let src = &plane[iy as usize * x.width..(iy as usize + 1) * x.width];
                        let drow = &mut dst[oy * ow..(oy + 1) * ow];
                        for (ox, d) in drow.iter_mut().enumerate() {
                            let ix = ox as isize * s + kx as isize - pad;
                            if ix >= 0 && ix < w {
                                *d = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, col: &[f32], dx: &mut FeatureMap, oh: usize, ow: usize) {
        let k = self.kernel;
        let p = oh * ow;
        let (h, w) = (dx.height as isize, dx.width as isize);
        let pad = self.padding as isize;
        let s = self.stride as isize;
        let spatial = dx.spatial();
        for c in 0..self.in_channels {
            let plane = &mut dx.data[c * spatial..(c + 1) * spatial];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let src = &col[row * p..(row + 1) * p];
                    for oy in 0..oh {
                        let iy = oy as isize * s + ky as isize - pad;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        let base = iy as usize * dx.width;
                        for ox in 0..ow {
                            let ix = ox as isize * s + kx as isize - pad;
                            if ix >= 0 && ix < w {
                                plane[base + ix as usize] += src[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, params: &[f32], x: &FeatureMap) -> FeatureMap {
        assert_eq!(x.channels, self.in_channels, "conv input channels");
        let (oh, ow) = self.output_size(x.height, x.width);
        let p = oh * ow;
        let owned;
        let col: &[f32] = if self.is_pointwise() {
            &x.data
        } else {
            owned = self.im2col(x, oh, ow);
            &owned
        };
        let mut y = FeatureMap::zeros(self.out_channels, oh, ow);
        let bias = &params[self.bias.clone()];
        for (o, chunk) in y.data.chunks_mut(p).enumerate() {
            chunk.fill(bias[o]);
        }
        let kdim = self.patch_len();
        // y[O x P] += W[O x K] * col[K x P]
        unsafe {
            matrixmultiply::sgemm(
                self.out_channels,
                kdim,
                p,
                1.0,
                params[self.weight.clone()].as_ptr(),
                kdim as isize,
                1,
                col.as_ptr(),
                p as isize,
                1,
                1.0,
                y.data.as_mut_ptr(),
                p as isize,
                1,
            );
        }
        y
    }

    /// Accumulates parameter gradients into `grads` and returns the input
    /// gradient when `want_dx` is set.
    pub fn backward(
        &self,
        params: &[f32],
        x: &FeatureMap,
        dy: &FeatureMap,
        grads: &mut [f32],
        want_dx: bool,
    ) -> Option<FeatureMap> {
        let (oh, ow) = (dy.height, dy.width);
        debug_assert_eq!((oh, ow), self.output_size(x.height, x.width));
        let p = oh * ow;
        let kdim = self.patch_len();
        let owned;
        let col: &[f32] = if self.is_pointwise() {
            &x.data
        } else {
            owned = self.im2col(x, oh, ow);
            &owned
        };
        {
            let gb = &mut grads[self.bias.clone()];
            for (o, chunk) in dy.data.chunks(p).enumerate() {
                gb[o] += chunk.iter().sum::<f32>();
            }
        }
        // dW[O x K] += dy[O x P] * col^T[P x K]
        let gw = &mut grads[self.weight.clone()];
        unsafe {
            matrixmultiply::sgemm(
                self.out_channels,
                p,
                kdim,
                1.0,
                dy.data.as_ptr(),
                p as isize,
                1,
                col.as_ptr(),
                1,
                p as isize,
                1.0,
                gw.as_mut_ptr(),
                kdim as isize,
                1,
            );
        }
        if !want_dx {
            return None;
        }
        // dcol[K x P] = W^T[K x O] * dy[O x P]
        let mut dcol = vec![0.0f32; kdim * p];
        unsafe {
            matrixmultiply::sgemm(
                kdim,
                self.out_channels,
                p,
                1.0,
                params[self.weight.clone()].as_ptr(),
                1,
                kdim as isize,
                dy.data.as_ptr(),
                p as isize,
                1,
                0.0,
                dcol.as_mut_ptr(),
                p as isize,
                1,
            );
        }
        if self.is_pointwise() {
            return Some(FeatureMap::new(x.channels, x.height, x.width, dcol));
        }
        let mut dx = FeatureMap::zeros(x.channels, x.height, x.width);
        self.col2im(&dcol, &mut dx, oh, ow);
        Some(dx)
    }
}
