use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{Image, Rect};

use super::skin::SkinBase;
use super::template::TattooTemplate;

/// Ink support threshold for masks.
pub const MASK_EPS: f32 = 0.02;

/// Sampling ranges for the per-sample augmentations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationRanges {
    /// Scaled template side as a fraction of the base's shorter side.
    pub scale: (f32, f32),
    pub color_shift: (f32, f32),
    pub blur_sigma: (f32, f32),
    pub opacity: (f32, f32),
    pub ink_color: [f32; 3],
}

impl Default for AugmentationRanges {
    fn default() -> Self {
        AugmentationRanges {
            scale: (0.5, 1.0),
            color_shift: (0.6, 1.0),
            blur_sigma: (0.0, 2.0),
            opacity: (0.35, 0.95),
            ink_color: [0.06, 0.07, 0.12],
        }
    }
}

impl AugmentationRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f32, f32), min: f32, max: f32| lo <= hi && lo >= min && hi <= max;
        if !ok(self.scale, f32::MIN_POSITIVE, 1.0)
            || !ok(self.color_shift, 0.0, 1.0)
            || !ok(self.blur_sigma, 0.0, f32::MAX)
            || !ok(self.opacity, 0.0, 1.0)
            || !self.ink_color.iter().all(|c| (0.0..=1.0).contains(c))
        {
            return Err(Error::invalid_arg(format!(
                "invalid augmentation ranges {self:?}"
            )));
        }
        Ok(())
    }
}

/// Everything needed to reproduce one composite from a template and a base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationParams {
    pub scale: f32,
    /// (row, col) of the scaled template's top-left corner in the base.
    pub offset: (usize, usize),
    pub color_shift: [f32; 3],
    pub blur_sigma: f32,
    pub opacity: f32,
    pub ink_color: [f32; 3],
    pub seed: u64,
}

impl AugmentationParams {
    /// Side length of the placed template on `base`.
    pub fn scaled_side(&self, base: &SkinBase) -> usize {
        ((self.scale * base.shorter_side() as f32).round() as usize).max(1)
    }

    pub fn sample(
        rng: &mut impl Rng,
        ranges: &AugmentationRanges,
        base: &SkinBase,
        seed: u64,
    ) -> Self {
        let mut draw = |(lo, hi): (f32, f32)| {
            if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        };
        let scale = draw(ranges.scale);
        let color_shift = [
            draw(ranges.color_shift),
            draw(ranges.color_shift),
            draw(ranges.color_shift),
        ];
        let blur_sigma = draw(ranges.blur_sigma);
        let opacity = draw(ranges.opacity);
        let mut params = AugmentationParams {
            scale,
            offset: (0, 0),
            color_shift,
            blur_sigma,
            opacity,
            ink_color: ranges.ink_color,
            seed,
        };
        let side = params.scaled_side(base);
        let img = base.image();
        let max_row = img.height().saturating_sub(side);
        let max_col = img.width().saturating_sub(side);
        params.offset = (rng.random_range(0..=max_row), rng.random_range(0..=max_col));
        params
    }

    fn validate(&self, base: &SkinBase) -> Result<usize> {
        let in01 = |v: f32| (0.0..=1.0).contains(&v);
        if !(self.scale > 0.0 && self.scale <= 1.0)
            || !self.color_shift.iter().all(|&c| in01(c))
            || !self.ink_color.iter().all(|&c| in01(c))
            || !in01(self.opacity)
            || !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite())
        {
            return Err(Error::invalid_arg(format!(
                "augmentation parameters out of range: {self:?}"
            )));
        }
        let side = self.scaled_side(base);
        let img = base.image();
        if self.offset.0 + side > img.height() || self.offset.1 + side > img.width() {
            return Err(Error::invalid_arg(format!(
                "template of side {side} at {:?} does not fit in {}x{} base",
                self.offset,
                img.height(),
                img.width()
            )));
        }
        Ok(side)
    }
}

/// Binary mask over the pre-crop composite.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(y, x));
            }
        }
        Mask {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Tight bounding box of the set pixels, if any.
    pub fn bbox(&self) -> Option<Rect> {
        let (mut top, mut left, mut bottom, mut right) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(y, x) {
                    top = top.min(y);
                    left = left.min(x);
                    bottom = bottom.max(y + 1);
                    right = right.max(x + 1);
                }
            }
        }
        (top != usize::MAX).then(|| Rect {
            top,
            left,
            height: bottom - top,
            width: right - left,
        })
    }

    /// Chebyshev dilation by `r` pixels.
    pub fn dilate(&self, r: usize) -> Mask {
        if r == 0 {
            return self.clone();
        }
        Mask::from_fn(self.width, self.height, |y, x| {
            let (y0, y1) = (y.saturating_sub(r), (y + r).min(self.height - 1));
            let (x0, x1) = (x.saturating_sub(r), (x + r).min(self.width - 1));
            (y0..=y1).any(|yy| (x0..=x1).any(|xx| self.get(yy, xx)))
        })
    }
}

/// A composited tattooed-skin sample and its clean-template target.
///
/// Before [`crop_to_tattoo`] `image` and `target` cover the whole base;
/// afterwards they hold the resized crop and `crop` records the region. The
/// mask always stays aligned with the pre-crop composite.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSample {
    pub image: Image,
    /// Scaled, placed template at full opacity on a white field.
    pub target: Image,
    pub mask: Mask,
    pub template_id: String,
    pub category_label: usize,
    pub params: AugmentationParams,
    pub crop: Option<Rect>,
}

/// Alpha-blends the template onto the base using ink density as alpha:
/// `out = base * (1 - opacity * t') + ink_color * opacity * t'`, where `t'`
/// is the placed ink, scaled per channel by `color_shift`, then blurred.
pub fn compose(
    template: &TattooTemplate,
    base: &SkinBase,
    params: &AugmentationParams,
) -> Result<SyntheticSample> {
    let side = params.validate(base)?;
    let base_img = base.image();
    let (h, w) = (base_img.height(), base_img.width());
    let scaled = template.ink().resize(side, side);
    let (oy, ox) = params.offset;
    let layer = Image::from_fn(1, w, h, |_, y, x| {
        if y >= oy && y < oy + side && x >= ox && x < ox + side {
            scaled.get(0, y - oy, x - ox).clamp(0.0, 1.0)
        } else {
            0.0
        }
    });
    let mask = Mask::from_fn(w, h, |y, x| layer.get(0, y, x) > MASK_EPS);
    let blurred = layer.gaussian_blur(params.blur_sigma);
    let mut image = base_img.clone();
    for c in 0..3 {
        let shift = params.color_shift[c];
        let ink = params.ink_color[c];
        let dst = image.plane_mut(c);
        for (px, &t) in dst.iter_mut().zip(blurred.data()) {
            let alpha = params.opacity * shift * t;
            *px = (*px * (1.0 - alpha) + ink * alpha).clamp(0.0, 1.0);
        }
    }
    let target = Image::from_fn(1, w, h, |_, y, x| 1.0 - layer.get(0, y, x));
    Ok(SyntheticSample {
        image,
        target,
        mask,
        template_id: template.id.clone(),
        category_label: template.category_label,
        params: params.clone(),
        crop: None,
    })
}

/// Bounding box of `mask` grown by `margin_frac` of its size on each side,
/// clamped to the mask extent.
pub fn crop_rect(mask: &Mask, margin_frac: f32) -> Result<Rect> {
    let bb = mask
        .bbox()
        .ok_or_else(|| Error::invalid_state("cannot crop a sample with an empty mask"))?;
    if !(margin_frac >= 0.0 && margin_frac.is_finite()) {
        return Err(Error::invalid_arg(format!(
            "margin fraction {margin_frac} must be >= 0"
        )));
    }
    let my = (margin_frac * bb.height as f32).round() as usize;
    let mx = (margin_frac * bb.width as f32).round() as usize;
    let top = bb.top.saturating_sub(my);
    let left = bb.left.saturating_sub(mx);
    let bottom = (bb.bottom() + my).min(mask.height());
    let right = (bb.right() + mx).min(mask.width());
    Ok(Rect {
        top,
        left,
        height: bottom - top,
        width: right - left,
    })
}

/// Crops image and target to the (expanded) mask bounding box and resizes
/// both to `side` x `side`.
pub fn crop_to_tattoo(
    sample: &SyntheticSample,
    margin_frac: f32,
    side: usize,
) -> Result<SyntheticSample> {
    if sample.crop.is_some() {
        return Err(Error::invalid_state("sample is already cropped"));
    }
    if side == 0 {
        return Err(Error::invalid_arg("output side must be positive"));
    }
    let rect = crop_rect(&sample.mask, margin_frac)?;
    let mut image = sample.image.crop(rect)?.resize(side, side);
    let mut target = sample.target.crop(rect)?.resize(side, side);
    image.clamp_unit();
    target.clamp_unit();
    Ok(SyntheticSample {
        image,
        target,
        mask: sample.mask.clone(),
        template_id: sample.template_id.clone(),
        category_label: sample.category_label,
        params: sample.params.clone(),
        crop: Some(rect),
    })
}
