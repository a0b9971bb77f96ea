use std::f32::consts::PI;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::seed;

/// An RGB skin image tattoos are blended onto.
#[derive(Clone, Debug, PartialEq)]
pub struct SkinBase {
    pub id: String,
    image: Image,
}

impl SkinBase {
    pub fn new(id: impl Into<String>, image: Image) -> Result<Self> {
        if image.channels() != 3 {
            return Err(Error::invalid_arg("skin base must be RGB"));
        }
        if !image.in_unit_range() {
            return Err(Error::invalid_arg("skin base values must lie in [0, 1]"));
        }
        Ok(SkinBase {
            id: id.into(),
            image,
        })
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn shorter_side(&self) -> usize {
        self.image.width().min(self.image.height())
    }
}

// Light and dark ends of the procedural skin-tone range.
const TONE_LIGHT: [f32; 3] = [0.96, 0.82, 0.72];
const TONE_DARK: [f32; 3] = [0.42, 0.28, 0.20];

/// Procedural skin: a random tone with low-frequency shading, fine grain and
/// a few pigmented spots.
pub fn procedural_skin(rng_seed: u64, width: usize, height: usize) -> Result<SkinBase> {
    if width == 0 || height == 0 {
        return Err(Error::invalid_arg("skin base must be non-empty"));
    }
    let mut rng = seed::rng(rng_seed, &[seed::STREAM_SKIN]);
    let t: f32 = rng.random_range(0.0..1.0);
    let tone: Vec<f32> = (0..3)
        .map(|c| TONE_LIGHT[c] * (1.0 - t) + TONE_DARK[c] * t)
        .collect();
    let waves: Vec<(f32, f32, f32, f32)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.5..3.0f32),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.01..0.04f32),
            )
        })
        .collect();
    let spots: Vec<(f32, f32, f32)> = (0..rng.random_range(0..6))
        .map(|_| {
            (
                rng.random_range(0.0..1.0f32),
                rng.random_range(0.0..1.0f32),
                rng.random_range(0.004..0.015f32),
            )
        })
        .collect();
    let grain: Vec<f32> = (0..width * height)
        .map(|_| rng.random_range(-0.015..0.015f32))
        .collect();
    let (w, h) = (width as f32, height as f32);
    let image = Image::from_fn(3, width, height, |c, y, x| {
        let (u, v) = (x as f32 / w, y as f32 / h);
        let shade: f32 = waves
            .iter()
            .map(|&(f, phx, phy, a)| {
                a * ((2.0 * PI * f * u + phx).sin() + (2.0 * PI * f * v + phy).cos())
            })
            .sum();
        let mut val = tone[c] + shade + grain[y * width + x];
        for &(sx, sy, r) in &spots {
            let d = ((u - sx).powi(2) + (v - sy).powi(2)).sqrt();
            if d < r {
                val *= 0.75;
            }
        }
        val.clamp(0.0, 1.0)
    });
    SkinBase::new(format!("skin-{rng_seed}"), image)
}

/// `count` procedural skin bases of the given size.
pub fn procedural_skins(
    count: usize,
    global_seed: u64,
    width: usize,
    height: usize,
) -> Result<Vec<SkinBase>> {
    (0..count)
        .map(|i| {
            procedural_skin(
                seed::derive(global_seed, &[seed::STREAM_SKIN, i as u64]),
                width,
                height,
            )
        })
        .collect()
}

/// Loads every PNG in `dir` as a skin base, rejecting images smaller than
/// `min_side` in either axis.
pub fn load_skin_dir(dir: &Path, min_side: usize) -> Result<Vec<SkinBase>> {
    let paths = super::template::sorted_pngs(dir)?;
    if paths.is_empty() {
        return Err(Error::invalid_arg(format!(
            "no PNG skin images in {}",
            dir.display()
        )));
    }
    paths
        .iter()
        .map(|path| {
            let image = Image::load_png(path, 3)?;
            if image.width() < min_side || image.height() < min_side {
                return Err(Error::invalid_arg(format!(
                    "skin image {} smaller than {min_side}px",
                    path.display()
                )));
            }
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            SkinBase::new(id, image)
        })
        .collect()
}
