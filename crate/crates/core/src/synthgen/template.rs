use std::f32::consts::PI;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::seed;

/// Minimum ink required somewhere in a template.
pub const MIN_PEAK_INK: f32 = 0.05;
pub const MIN_TEMPLATE_SIDE: usize = 32;

/// Clean tattoo artwork as a square single-channel ink-density grid.
/// One template defines one category.
#[derive(Clone, Debug, PartialEq)]
pub struct TattooTemplate {
    pub id: String,
    pub category_label: usize,
    ink: Image,
}

impl TattooTemplate {
    pub fn new(id: impl Into<String>, category_label: usize, ink: Image) -> Result<Self> {
        if ink.channels() != 1 || ink.width() != ink.height() {
            return Err(Error::invalid_arg(
                "template ink must be a square single-channel grid",
            ));
        }
        if !ink.in_unit_range() {
            return Err(Error::invalid_arg("template ink values must lie in [0, 1]"));
        }
        if !ink.data().iter().any(|&v| v > MIN_PEAK_INK) {
            return Err(Error::invalid_arg("template has no ink"));
        }
        Ok(TattooTemplate {
            id: id.into(),
            category_label,
            ink,
        })
    }

    pub fn ink(&self) -> &Image {
        &self.ink
    }

    pub fn side(&self) -> usize {
        self.ink.width()
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.category_label = label;
        self
    }
}

/// Procedural glyph: 2 to 6 random strokes rendered as anti-aliased ink.
/// Deterministic in `rng_seed`; the label is 0 until assigned.
pub fn generate_glyph_template(rng_seed: u64, side: usize) -> Result<TattooTemplate> {
    if side < MIN_TEMPLATE_SIDE {
        return Err(Error::invalid_arg(format!(
            "template side {side} below minimum {MIN_TEMPLATE_SIDE}"
        )));
    }
    let mut rng = seed::rng(rng_seed, &[seed::STREAM_TEMPLATE]);
    let n_strokes = rng.random_range(2..=6);
    let strokes: Vec<Stroke> = (0..n_strokes).map(|_| Stroke::random(&mut rng)).collect();
    let s = side as f32;
    let ink = Image::from_fn(1, side, side, |_, y, x| {
        // Normalised coordinates, one pixel = 1/side.
        let p = ((x as f32 + 0.5) / s, (y as f32 + 0.5) / s);
        strokes
            .iter()
            .map(|st| st.coverage(p, s))
            .fold(0.0f32, f32::max)
    });
    TattooTemplate::new(format!("glyph-{rng_seed}"), 0, ink)
}

/// `count` procedural templates labelled `0..count`.
pub fn procedural_templates(
    count: usize,
    global_seed: u64,
    side: usize,
) -> Result<Vec<TattooTemplate>> {
    (0..count)
        .map(|i| {
            let s = seed::derive(global_seed, &[seed::STREAM_TEMPLATE, i as u64]);
            Ok(generate_glyph_template(s, side)?.with_label(i))
        })
        .collect()
}

/// Loads every PNG in `dir` (sorted by file name) as a template. Dark pixels
/// on a light background become ink; non-square art is padded with white.
pub fn load_template_dir(dir: &Path, side: usize) -> Result<Vec<TattooTemplate>> {
    let paths = sorted_pngs(dir)?;
    if paths.is_empty() {
        return Err(Error::invalid_arg(format!(
            "no PNG templates in {}",
            dir.display()
        )));
    }
    paths
        .iter()
        .enumerate()
        .map(|(label, path)| {
            let gray = Image::load_png(path, 1)?;
            let n = gray.width().max(gray.height());
            let (oy, ox) = ((n - gray.height()) / 2, (n - gray.width()) / 2);
            let square = Image::from_fn(1, n, n, |_, y, x| {
                if y >= oy && y < oy + gray.height() && x >= ox && x < ox + gray.width() {
                    1.0 - gray.get(0, y - oy, x - ox)
                } else {
                    0.0
                }
            });
            let mut ink = square.resize(side, side);
            ink.clamp_unit();
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("template-{label}"));
            TattooTemplate::new(id, label, ink)
        })
        .collect()
}

pub(crate) fn sorted_pngs(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("png"))
        {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

#[derive(Clone, Debug)]
enum Shape {
    Segment {
        a: (f32, f32),
        b: (f32, f32),
    },
    Ring {
        c: (f32, f32),
        r: f32,
        start: f32,
        sweep: f32,
    },
    Disc {
        c: (f32, f32),
        r: f32,
    },
    Curve {
        pts: Vec<(f32, f32)>,
    },
    Triangle {
        v: [(f32, f32); 3],
    },
}

#[derive(Clone, Debug)]
struct Stroke {
    shape: Shape,
    /// Half line width in normalised units.
    half_width: f32,
}

impl Stroke {
    fn random(rng: &mut impl Rng) -> Stroke {
        let half_width = rng.random_range(0.012..0.035f32);
        let shape = match rng.random_range(0..5) {
            0 => Shape::Segment {
                a: pt(rng),
                b: pt(rng),
            },
            1 => {
                let c = (rng.random_range(0.3..0.7f32), rng.random_range(0.3..0.7f32));
                Shape::Ring {
                    c,
                    r: rng.random_range(0.08..0.28f32),
                    start: rng.random_range(0.0..2.0 * PI),
                    sweep: rng.random_range(0.8 * PI..2.0 * PI),
                }
            }
            2 => Shape::Disc {
                c: pt(rng),
                r: rng.random_range(0.04..0.12f32),
            },
            3 => {
                let (p0, p1, p2) = (pt(rng), pt(rng), pt(rng));
                let pts = (0..=16)
                    .map(|i| {
                        let t = i as f32 / 16.0;
                        let u = 1.0 - t;
                        (
                            u * u * p0.0 + 2.0 * u * t * p1.0 + t * t * p2.0,
                            u * u * p0.1 + 2.0 * u * t * p1.1 + t * t * p2.1,
                        )
                    })
                    .collect();
                Shape::Curve { pts }
            }
            _ => Shape::Triangle {
                v: [pt(rng), pt(rng), pt(rng)],
            },
        };
        Stroke { shape, half_width }
    }

    /// Anti-aliased coverage of pixel centre `p`; `side` converts the
    /// signed distance to pixels.
    fn coverage(&self, p: (f32, f32), side: f32) -> f32 {
        let d = match &self.shape {
            Shape::Segment { a, b } => seg_dist(p, *a, *b) - self.half_width,
            Shape::Ring { c, r, start, sweep } => {
                let (dx, dy) = (p.0 - c.0, p.1 - c.1);
                let ang = (dy.atan2(dx) - start).rem_euclid(2.0 * PI);
                if ang <= *sweep {
                    ((dx * dx + dy * dy).sqrt() - r).abs() - self.half_width
                } else {
                    let end = start + sweep;
                    let e0 = (c.0 + r * start.cos(), c.1 + r * start.sin());
                    let e1 = (c.0 + r * end.cos(), c.1 + r * end.sin());
                    dist(p, e0).min(dist(p, e1)) - self.half_width
                }
            }
            Shape::Disc { c, r } => dist(p, *c) - r,
            Shape::Curve { pts } => {
                pts.windows(2)
                    .map(|w| seg_dist(p, w[0], w[1]))
                    .fold(f32::INFINITY, f32::min)
                    - self.half_width
            }
            Shape::Triangle { v } => {
                (0..3)
                    .map(|i| seg_dist(p, v[i], v[(i + 1) % 3]))
                    .fold(f32::INFINITY, f32::min)
                    - self.half_width
            }
        };
        (0.5 - d * side).clamp(0.0, 1.0)
    }
}

fn pt(rng: &mut impl Rng) -> (f32, f32) {
    (
        rng.random_range(0.12..0.88f32),
        rng.random_range(0.12..0.88f32),
    )
}

fn dist(a: (f32, f32), b: (f32, f32)) -> f32 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn seg_dist(p: (f32, f32), a: (f32, f32), b: (f32, f32)) -> f32 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * abx + (p.1 - a.1) * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, (a.0 + t * abx, a.1 + t * aby))
}
