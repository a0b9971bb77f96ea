use std::ops::Range;

use rand::Rng;

use super::ParamLayout;

/// Fully connected layer `y = W x (+ b)` on a single vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub in_features: usize,
    pub out_features: usize,
    weight: Range<usize>,
    bias: Option<Range<usize>>,
}

impl Linear {
    pub fn new(
        layout: &mut ParamLayout,
        in_features: usize,
        out_features: usize,
        bias: bool,
    ) -> Self {
        let weight = layout.alloc(in_features * out_features);
        let bias = bias.then(|| layout.alloc(out_features));
        Linear {
            in_features,
            out_features,
            weight,
            bias,
        }
    }

    pub fn weight<'a>(&self, params: &'a [f32]) -> &'a [f32] {
        &params[self.weight.clone()]
    }

    pub fn weight_range(&self) -> Range<usize> {
        self.weight.clone()
    }

    pub fn init(&self, params: &mut [f32], rng: &mut impl Rng) {
        let bound = (6.0 / self.in_features as f32).sqrt();
        for w in &mut params[self.weight.clone()] {
            *w = rng.random_range(-bound..bound);
        }
        if let Some(b) = &self.bias {
            params[b.clone()].fill(0.0);
        }
    }

    pub fn forward(&self, params: &[f32], x: &[f32]) -> Vec<f32> {
        assert_eq!(x.len(), self.in_features, "linear input size");
        let w = &params[self.weight.clone()];
        (0..self.out_features)
            .map(|o| {
                let row = &w[o * self.in_features..(o + 1) * self.in_features];
                let b = self.bias.as_ref().map_or(0.0, |r| params[r.start + o]);
                b + row.iter().zip(x).map(|(a, v)| a * v).sum::<f32>()
            })
            .collect()
    }

    pub fn backward(&self, params: &[f32], x: &[f32], dy: &[f32], grads: &mut [f32]) -> Vec<f32> {
        let n = self.in_features;
        if let Some(b) = &self.bias {
            for (g, d) in grads[b.clone()].iter_mut().zip(dy) {
                *g += d;
            }
        }
        let gw = &mut grads[self.weight.clone()];
        for (o, &d) in dy.iter().enumerate() {
            for (g, v) in gw[o * n..(o + 1) * n].iter_mut().zip(x) {
                *g += d * v;
            }
        }
        let w = &params[self.weight.clone()];
        let mut dx = vec![0.0f32; n];
        for (o, &d) in dy.iter().enumerate() {
            for (g, a) in dx.iter_mut().zip(&w[o * n..(o + 1) * n]) {
                *g += d * a;
            }
        }
        dx
    }
}
