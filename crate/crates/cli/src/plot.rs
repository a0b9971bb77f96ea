//! Minimal PNG rendering of CMC and DET curves: frame, grid, mean curve and
//! a +/- one std band. Axis values live in the CSV the plot is drawn from.

use std::path::Path;

use anyhow::{ensure, Context, Result};
use image::{Rgb, RgbImage};

const WIDTH: u32 = 640;
const HEIGHT: u32 = 480;
const MARGIN: f64 = 40.0;
const BG: Rgb<u8> = Rgb([255, 255, 255]);
const FRAME: Rgb<u8> = Rgb([40, 40, 40]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);
const CURVE: Rgb<u8> = Rgb([31, 119, 180]);
const BAND: Rgb<u8> = Rgb([198, 219, 239]);
/// Lower bound of both log axes of the DET plot.
const DET_FLOOR: f64 = 1e-3;

struct Canvas {
    img: RgbImage,
}

impl Canvas {
    fn new() -> Self {
        Canvas {
            img: RgbImage::from_pixel(WIDTH, HEIGHT, BG),
        }
    }

    /// Maps unit-square coordinates (origin bottom-left) to pixels.
    fn px(&self, u: f64, v: f64) -> (f64, f64) {
        let w = WIDTH as f64 - 2.0 * MARGIN;
        let h = HEIGHT as f64 - 2.0 * MARGIN;
        (
            MARGIN + u.clamp(0.0, 1.0) * w,
            HEIGHT as f64 - MARGIN - v.clamp(0.0, 1.0) * h,
        )
    }

    fn dot(&mut self, x: f64, y: f64, color: Rgb<u8>, radius: i64) {
        let (cx, cy) = (x.round() as i64, y.round() as i64);
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let (px, py) = (cx + dx, cy + dy);
                if px >= 0 && py >= 0 && (px as u32) < WIDTH && (py as u32) < HEIGHT {
                    self.img.put_pixel(px as u32, py as u32, color);
                }
            }
        }
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), color: Rgb<u8>, radius: i64) {
        let (p, q) = (self.px(a.0, a.1), self.px(b.0, b.1));
        let steps = (q.0 - p.0).abs().max((q.1 - p.1).abs()).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            self.dot(p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1), color, radius);
        }
    }

    /// Fills the vertical span `[lo, hi]` at every pixel column between `u0`
    /// and `u1`, interpolating both bounds linearly.
    fn band(&mut self, u0: f64, u1: f64, lo: (f64, f64), hi: (f64, f64)) {
        let (x0, _) = self.px(u0, 0.0);
        let (x1, _) = self.px(u1, 0.0);
        let cols = (x1 - x0).round().max(1.0) as usize;
        for i in 0..=cols {
            let t = i as f64 / cols as f64;
            let u = u0 + t * (u1 - u0);
            let (_, ylo) = self.px(u, lo.0 + t * (lo.1 - lo.0));
            let (_, yhi) = self.px(u, hi.0 + t * (hi.1 - hi.0));
            let x = (x0 + t * (x1 - x0)).round() as u32;
            for y in yhi.round() as u32..=ylo.round() as u32 {
                if x < WIDTH && y < HEIGHT {
                    self.img.put_pixel(x, y, BAND);
                }
            }
        }
    }

    fn grid(&mut self, us: &[f64], vs: &[f64]) {
        for &u in us {
            self.line((u, 0.0), (u, 1.0), GRID, 0);
        }
        for &v in vs {
            self.line((0.0, v), (1.0, v), GRID, 0);
        }
    }

    fn frame(&mut self) {
        for (a, b) in [
            ((0.0, 0.0), (1.0, 0.0)),
            ((1.0, 0.0), (1.0, 1.0)),
            ((1.0, 1.0), (0.0, 1.0)),
            ((0.0, 1.0), (0.0, 0.0)),
        ] {
            self.line(a, b, FRAME, 0);
        }
    }

    fn save(self, path: &Path) -> Result<()> {
        self.img
            .save(path)
            .with_context(|| format!("writing {}", path.display()))
    }
}

fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    let idx = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == *n)
                .with_context(|| format!("{} has no column {n}", path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for rec in r.records() {
        let rec = rec?;
        for (c, &i) in cols.iter_mut().zip(&idx) {
            let field = rec.get(i).unwrap_or_default();
            c.push(
                field
                    .parse::<f64>()
                    .with_context(|| format!("bad number {field:?} in {}", path.display()))?,
            );
        }
    }
    Ok(cols)
}

/// Rank (x) against identification rate (y, 0..1).
pub fn cmc_plot(csv: &Path, out: &Path) -> Result<()> {
    let cols = read_columns(csv, &["rank", "mean_ir", "std_ir"])?;
    let (ranks, mean, std) = (&cols[0], &cols[1], &cols[2]);
    ensure!(!ranks.is_empty(), "{} is empty", csv.display());
    let max_rank = ranks.iter().copied().fold(1.0, f64::max);
    let u = |r: f64| {
        if max_rank > 1.0 {
            (r - 1.0) / (max_rank - 1.0)
        } else {
            0.5
        }
    };
    let mut c = Canvas::new();
    c.grid(
        &(1..10).map(|i| i as f64 / 10.0).collect::<Vec<_>>(),
        &(1..10).map(|i| i as f64 / 10.0).collect::<Vec<_>>(),
    );
    for i in 1..ranks.len() {
        c.band(
            u(ranks[i - 1]),
            u(ranks[i]),
            (mean[i - 1] - std[i - 1], mean[i] - std[i]),
            (mean[i - 1] + std[i - 1], mean[i] + std[i]),
        );
    }
    for i in 1..ranks.len() {
        c.line(
            (u(ranks[i - 1]), mean[i - 1]),
            (u(ranks[i]), mean[i]),
            CURVE,
            1,
        );
    }
    for (&r, &m) in ranks.iter().zip(mean) {
        let (x, y) = c.px(u(r), m);
        c.dot(x, y, CURVE, 2);
    }
    c.frame();
    c.save(out)
}

fn log_unit(v: f64) -> f64 {
    let lo = DET_FLOOR.log10();
    (v.max(DET_FLOOR).log10() - lo) / -lo
}

/// FPIR (x) against FNIR (y), both on log axes from 1e-3 to 1.
pub fn det_plot(csv: &Path, out: &Path) -> Result<()> {
    let cols = read_columns(csv, &["mean_fpir", "mean_fnir"])?;
    let (fpir, fnir) = (&cols[0], &cols[1]);
    ensure!(!fpir.is_empty(), "{} is empty", csv.display());
    let decades: Vec<f64> = (1..3).map(|i| log_unit(10f64.powi(-i))).collect();
    let mut c = Canvas::new();
    c.grid(&decades, &decades);
    for i in 1..fpir.len() {
        c.line(
            (log_unit(fpir[i - 1]), log_unit(fnir[i - 1])),
            (log_unit(fpir[i]), log_unit(fnir[i])),
            CURVE,
            1,
        );
    }
    c.frame();
    c.save(out)
}
