use super::FeatureMap;

pub fn relu_inplace(x: &mut FeatureMap) {
    for v in &mut x.data {
        *v = v.max(0.0);
    }
}

/// Masks `dy` by the sign of the ReLU output `y`.
pub fn relu_backward(y: &FeatureMap, dy: &mut FeatureMap) {
    for (g, &v) in dy.data.iter_mut().zip(&y.data) {
        if v <= 0.0 {
            *g = 0.0;
        }
    }
}

pub fn sigmoid_inplace(x: &mut FeatureMap) {
    for v in &mut x.data {
        *v = 1.0 / (1.0 + (-*v).exp());
    }
}

/// Nearest-neighbour 2x upsampling.
pub fn upsample2x(x: &FeatureMap) -> FeatureMap {
    let (h, w) = (x.height * 2, x.width * 2);
    let mut y = FeatureMap::zeros(x.channels, h, w);
    for c in 0..x.channels {
        for yy in 0..h {
            let src =
                &x.data[(c * x.height + yy / 2) * x.width..(c * x.height + yy / 2 + 1) * x.width];
            let dst = &mut y.data[(c * h + yy) * w..(c * h + yy + 1) * w];
            for (xx, d) in dst.iter_mut().enumerate() {
                *d = src[xx / 2];
            }
        }
    }
    y
}

pub fn upsample2x_backward(dy: &FeatureMap) -> FeatureMap {
    let (h, w) = (dy.height / 2, dy.width / 2);
    let mut dx = FeatureMap::zeros(dy.channels, h, w);
    for c in 0..dy.channels {
        for yy in 0..dy.height {
            for xx in 0..dy.width {
                dx.data[(c * h + yy / 2) * w + xx / 2] +=
                    dy.data[(c * dy.height + yy) * dy.width + xx];
            }
        }
    }
    dx
}

pub fn concat_channels(a: &FeatureMap, b: &FeatureMap) -> FeatureMap {
    assert_eq!(
        (a.height, a.width),
        (b.height, b.width),
        "concat spatial dims"
    );
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    FeatureMap::new(a.channels + b.channels, a.height, a.width, data)
}

/// Inverse of [`concat_channels`]: the first `first` channels and the rest.
pub fn split_channels(x: FeatureMap, first: usize) -> (FeatureMap, FeatureMap) {
    let cut = first * x.spatial();
    let mut data = x.data;
    let rest = data.split_off(cut);
    (
        FeatureMap::new(first, x.height, x.width, data),
        FeatureMap::new(x.channels - first, x.height, x.width, rest),
    )
}

pub fn global_avg_pool(x: &FeatureMap) -> Vec<f32> {
    let n = x.spatial() as f32;
    x.data
        .chunks(x.spatial())
        .map(|c| c.iter().sum::<f32>() / n)
        .collect()
}

pub fn global_avg_pool_backward(dy: &[f32], shape: (usize, usize, usize)) -> FeatureMap {
    let (c, h, w) = shape;
    let n = (h * w) as f32;
    let mut data = Vec::with_capacity(c * h * w);
    for g in dy {
        data.extend(std::iter::repeat_n(g / n, h * w));
    }
    FeatureMap::new(c, h, w, data)
}

/// Returns `x / |x|` and `|x|`. A zero vector stays zero.
pub fn l2_normalize(x: &[f32]) -> (Vec<f32>, f32) {
    let norm = x
        .iter()
        .map(|v| (*v as f64) * (*v as f64))
        .sum::<f64>()
        .sqrt() as f32;
    if norm == 0.0 {
        return (vec![0.0; x.len()], 0.0);
    }
    (x.iter().map(|v| v / norm).collect(), norm)
}

/// Gradient through `y = x / |x|`: `(dy - y (y . dy)) / |x|`.
pub fn l2_normalize_backward(y: &[f32], norm: f32, dy: &[f32]) -> Vec<f32> {
    if norm == 0.0 {
        return vec![0.0; y.len()];
    }
    let proj: f32 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
    y.iter()
        .zip(dy)
        .map(|(yv, g)| (g - yv * proj) / norm)
        .collect()
}
