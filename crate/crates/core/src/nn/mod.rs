//! Minimal CPU neural-network building blocks with hand-written backward
//! passes.
//!
//! All parameters of a network live in one flat `f32` buffer; layers own
//! index ranges into it. Activations are processed one sample at a time
//! (channel-major), which lets a batch fan out across workers and be
//! reduced in a fixed order afterwards.

mod adam;
mod conv;
mod linear;
mod ops;

use std::ops::Range;

pub use adam::{Adam, AdamConfig};
pub use conv::Conv2d;
pub use linear::Linear;
pub use ops::{
    concat_channels, global_avg_pool, global_avg_pool_backward, l2_normalize,
    l2_normalize_backward, relu_backward, relu_inplace, sigmoid_inplace, split_channels,
    upsample2x, upsample2x_backward,
};

/// A single sample's activation tensor in (channels, height, width) order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Self {
        assert_eq!(
            data.len(),
            channels * height * width,
            "feature map buffer size"
        );
        FeatureMap {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn spatial(&self) -> usize {
        self.height * self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }
}

/// Hands out consecutive ranges of the flat parameter buffer.
#[derive(Clone, Debug, Default)]
pub struct ParamLayout {
    len: usize,
}

impl ParamLayout {
    pub fn alloc(&mut self, n: usize) -> Range<usize> {
        let r = self.len..self.len + n;
        self.len += n;
        r
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Adds `src` into `dst` element-wise.
pub fn accumulate(dst: &mut [f32], src: &[f32]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
