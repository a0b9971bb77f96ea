//! Planar floating-point rasters and the handful of image operations the
//! pipeline needs (resize, blur, crop, PNG I/O).

use std::path::Path;

use crate::error::{Error, Result};

/// Planar (channel-major) image with values nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    channels: usize,
    width: usize,
    height: usize,
    data: Vec<f32>,
}

/// Axis-aligned pixel rectangle, half-open on the bottom/right edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn bottom(&self) -> usize {
        self.top + self.height
    }

    pub fn right(&self) -> usize {
        self.left + self.width
    }
}

impl Image {
    pub fn filled(channels: usize, width: usize, height: usize, value: f32) -> Self {
        assert!(channels > 0, "image needs at least one channel");
        Image {
            channels,
            width,
            height,
            data: vec![value; channels * width * height],
        }
    }

    pub fn zeros(channels: usize, width: usize, height: usize) -> Self {
        Self::filled(channels, width, height, 0.0)
    }

    pub fn from_planar(
        channels: usize,
        width: usize,
        height: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if channels == 0 || data.len() != channels * width * height {
            return Err(Error::invalid_arg(format!(
                "planar buffer of length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Image {
            channels,
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        channels: usize,
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut img = Self::zeros(channels, width, height);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    let i = img.index(c, y, x);
                    img.data[i] = f(c, y, x);
                }
            }
        }
        img
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        let i = self.index(c, y, x);
        self.data[i] = v;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.channels == other.channels && self.width == other.width && self.height == other.height
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Luma for RGB, identity for single-channel images.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        Image::from_fn(1, self.width, self.height, |_, y, x| {
            0.299 * self.get(0, y, x) + 0.587 * self.get(1, y, x) + 0.114 * self.get(2, y, x)
        })
    }

    /// Replicates a single channel into RGB.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        Image::from_fn(3, self.width, self.height, |_, y, x| self.get(0, y, x))
    }

    pub fn crop(&self, rect: Rect) -> Result<Image> {
        if rect.bottom() > self.height
            || rect.right() > self.width
            || rect.width == 0
            || rect.height == 0
        {
            return Err(Error::invalid_arg(format!(
                "crop {rect:?} outside {}x{} image",
                self.height, self.width
            )));
        }
        Ok(Image::from_fn(
            self.channels,
            rect.width,
            rect.height,
            |c, y, x| self.get(c, rect.top + y, rect.left + x),
        ))
    }

    /// Bilinear resampling with pixel-centre alignment. Downscaling by more
    /// than 2x first box-averages so thin strokes are not dropped.
    pub fn resize(&self, width: usize, height: usize) -> Image {
        assert!(width > 0 && height > 0, "resize target must be non-empty");
        if width == self.width && height == self.height {
            return self.clone();
        }
        let fx = self.width / width;
        let fy = self.height / height;
        if fx >= 2 || fy >= 2 {
            return self
                .box_downsample(fx.max(1), fy.max(1))
                .resize(width, height);
        }
        let sx = self.width as f32 / width as f32;
        let sy = self.height as f32 / height as f32;
        let mut out = Image::zeros(self.channels, width, height);
        for y in 0..height {
            let src_y = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f32);
            let y0 = src_y.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let wy = src_y - y0 as f32;
            for x in 0..width {
                let src_x = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f32);
                let x0 = src_x.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let wx = src_x - x0 as f32;
                for c in 0..self.channels {
                    let top = self.get(c, y0, x0) * (1.0 - wx) + self.get(c, y0, x1) * wx;
                    let bot = self.get(c, y1, x0) * (1.0 - wx) + self.get(c, y1, x1) * wx;
                    out.set(c, y, x, top * (1.0 - wy) + bot * wy);
                }
            }
        }
        out
    }

    fn box_downsample(&self, fx: usize, fy: usize) -> Image {
        let w = (self.width / fx).max(1);
        let h = (self.height / fy).max(1);
        let norm = 1.0 / (fx * fy) as f32;
        Image::from_fn(self.channels, w, h, |c, y, x| {
            let mut acc = 0.0;
            for dy in 0..fy {
                for dx in 0..fx {
                    acc += self.get(c, y * fy + dy, x * fx + dx);
                }
            }
            acc * norm
        })
    }

    /// Separable Gaussian blur with kernel radius `ceil(3 sigma)` and
    /// clamp-to-edge borders. `sigma <= 0` returns a copy.
    pub fn gaussian_blur(&self, sigma: f32) -> Image {
        if sigma <= 0.0 {
            return self.clone();
        }
        let kernel = gaussian_kernel(sigma);
        let r = (kernel.len() / 2) as isize;
        let (w, h) = (self.width as isize, self.height as isize);
        let mut tmp = Image::zeros(self.channels, self.width, self.height);
        for c in 0..self.channels {
            for y in 0..self.height {
                for x in 0..self.width {
                    let mut acc = 0.0;
                    for (k, kv) in kernel.iter().enumerate() {
                        let sx = (x as isize + k as isize - r).clamp(0, w - 1) as usize;
                        acc += kv * self.get(c, y, sx);
                    }
                    tmp.set(c, y, x, acc);
                }
            }
        }
        let mut out = Image::zeros(self.channels, self.width, self.height);
        for c in 0..self.channels {
            for y in 0..self.height {
                for x in 0..self.width {
                    let mut acc = 0.0;
                    for (k, kv) in kernel.iter().enumerate() {
                        let sy = (y as isize + k as isize - r).clamp(0, h - 1) as usize;
                        acc += kv * tmp.get(c, sy, x);
                    }
                    out.set(c, y, x, acc);
                }
            }
        }
        out
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let to_u8 = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let res = match self.channels {
            1 => image::GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
                image::Luma([to_u8(self.get(0, y as usize, x as usize))])
            })
            .save_with_format(path, image::ImageFormat::Png),
            3 => image::RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
                let (x, y) = (x as usize, y as usize);
                image::Rgb([
                    to_u8(self.get(0, y, x)),
                    to_u8(self.get(1, y, x)),
                    to_u8(self.get(2, y, x)),
                ])
            })
            .save_with_format(path, image::ImageFormat::Png),
            n => {
                return Err(Error::invalid_arg(format!(
                    "cannot save {n}-channel image as PNG"
                )))
            }
        };
        res.map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Loads any PNG as either a 1- or 3-channel image.
    pub fn load_png(path: &Path, channels: usize) -> Result<Image> {
        let dynimg = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        match channels {
            1 => {
                let g = dynimg.to_luma8();
                let (w, h) = (g.width() as usize, g.height() as usize);
                Ok(Image::from_fn(1, w, h, |_, y, x| {
                    g.get_pixel(x as u32, y as u32)[0] as f32 / 255.0
                }))
            }
            3 => {
                let rgb = dynimg.to_rgb8();
                let (w, h) = (rgb.width() as usize, rgb.height() as usize);
                Ok(Image::from_fn(3, w, h, |c, y, x| {
                    rgb.get_pixel(x as u32, y as u32)[c] as f32 / 255.0
                }))
            }
            n => Err(Error::invalid_arg(format!(
                "cannot load PNG as {n} channels"
            ))),
        }
    }
}

/// Normalised 1-D Gaussian taps, radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f32> = (-r..=r)
        .map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}
