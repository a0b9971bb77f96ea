use rand::Rng;

use crate::imaging::Image;

use super::config::JitterConfig;

fn factor(rng: &mut impl Rng, amount: f32) -> f32 {
    if amount > 0.0 {
        rng.random_range((1.0 - amount).max(0.0)..=1.0 + amount)
    } else {
        1.0
    }
}

/// Random brightness, contrast, saturation and hue perturbation of an RGB
/// image, applied in that order and clamped to `[0, 1]`.
pub fn color_jitter(img: &Image, cfg: &JitterConfig, rng: &mut impl Rng) -> Image {
    assert_eq!(img.channels(), 3, "colour jitter needs RGB");
    let brightness = factor(rng, cfg.brightness);
    let contrast = factor(rng, cfg.contrast);
    let saturation = factor(rng, cfg.saturation);
    let hue = if cfg.hue > 0.0 {
        rng.random_range(-cfg.hue..=cfg.hue) * std::f32::consts::TAU
    } else {
        0.0
    };
    let n = img.width() * img.height();
    let mut out = img.clone();
    let data = out.data_mut();
    for v in data.iter_mut() {
        *v = (*v * brightness).clamp(0.0, 1.0);
    }
    let luma = |d: &[f32], i: usize| 0.299 * d[i] + 0.587 * d[n + i] + 0.114 * d[2 * n + i];
    let mean = (0..n).map(|i| luma(data, i)).sum::<f32>() / n as f32;
    for v in data.iter_mut() {
        *v = ((*v - mean) * contrast + mean).clamp(0.0, 1.0);
    }
    let (sin, cos) = hue.sin_cos();
    for i in 0..n {
        let (r, g, b) = (data[i], data[n + i], data[2 * n + i]);
        let y = 0.299 * r + 0.587 * g + 0.114 * b;
        // Chroma in YIQ, scaled for saturation and rotated for hue.
        let ci = 0.596 * r - 0.274 * g - 0.322 * b;
        let cq = 0.211 * r - 0.523 * g + 0.312 * b;
        let i2 = saturation * (ci * cos - cq * sin);
        let q2 = saturation * (ci * sin + cq * cos);
        data[i] = (y + 0.956 * i2 + 0.621 * q2).clamp(0.0, 1.0);
        data[n + i] = (y - 0.272 * i2 - 0.647 * q2).clamp(0.0, 1.0);
        data[2 * n + i] = (y - 1.106 * i2 + 1.703 * q2).clamp(0.0, 1.0);
    }
    out
}
