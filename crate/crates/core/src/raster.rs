//! Small raster helpers shared by the image-processing modules.
//!
//! Pixel coordinates follow the convention that integer coordinates sit on
//! pixel centers: pixel `(i, j)` covers `[i - 0.5, i + 0.5] x [j - 0.5, j + 0.5]`.

use image::{ImageBuffer, Pixel, Primitive};
use num_traits::NumCast;

use crate::error::{Error, Result};

/// Row-major real-valued single-channel raster.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatRaster {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
}

impl FloatRaster {
    pub fn new(width: u32, height: u32, fill: f64) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f64) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: f64) {
        let i = self.index(x, y);
        self.data[i] = v;
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

/// Maximum representable channel value for a subpixel type (255 for `u8`,
/// 65535 for `u16`, 1.0 for floats).
pub fn channel_max<S: Primitive>() -> f64 {
    S::DEFAULT_MAX_VALUE.to_f64().unwrap_or(1.0)
}

#[inline]
pub(crate) fn to_f64<S: Primitive>(v: S) -> f64 {
    v.to_f64().unwrap_or(0.0)
}

#[inline]
pub(crate) fn from_f64<S: Primitive>(v: f64) -> S {
    let max = channel_max::<S>();
    let min = S::DEFAULT_MIN_VALUE.to_f64().unwrap_or(0.0);
    let clamped = v.clamp(min, max);
    let rounded = if max > 1.0 { clamped.round() } else { clamped };
    NumCast::from(rounded).unwrap_or(S::DEFAULT_MIN_VALUE)
}

/// Bilinear sample of every channel at a sub-pixel position. Returns `None`
/// when the position falls outside the pixel-center hull of the image.
pub fn sample_bilinear<P>(img: &ImageBuffer<P, Vec<P::Subpixel>>, x: f64, y: f64, out: &mut [f64]) -> bool
where
    P: Pixel,
{
    let (w, h) = img.dimensions();
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return false;
    }
    let x0 = (x.floor() as u32).min(w.saturating_sub(2));
    let y0 = (y.floor() as u32).min(h.saturating_sub(2));
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let p00 = img.get_pixel(x0, y0).channels();
    let p10 = img.get_pixel(x1, y0).channels();
    let p01 = img.get_pixel(x0, y1).channels();
    let p11 = img.get_pixel(x1, y1).channels();
    for (c, o) in out.iter_mut().enumerate().take(P::CHANNEL_COUNT as usize) {
        let top = to_f64(p00[c]) * (1.0 - fx) + to_f64(p10[c]) * fx;
        let bottom = to_f64(p01[c]) * (1.0 - fx) + to_f64(p11[c]) * fx;
        *o = top * (1.0 - fy) + bottom * fy;
    }
    true
}

/// Nearest-neighbour lookup; `None` outside the image.
pub fn sample_nearest(width: u32, height: u32, x: f64, y: f64) -> Option<(u32, u32)> {
    let xi = x.round();
    let yi = y.round();
    if xi < 0.0 || yi < 0.0 || xi > (width - 1) as f64 || yi > (height - 1) as f64 {
        return None;
    }
    Some((xi as u32, yi as u32))
}

/// Centered square crop with side equal to the shorter image dimension.
pub fn centered_square<P: Pixel + 'static>(img: &ImageBuffer<P, Vec<P::Subpixel>>) -> ImageBuffer<P, Vec<P::Subpixel>> {
    let (w, h) = img.dimensions();
    let side = w.min(h);
    let x0 = (w - side) / 2;
    let y0 = (h - side) / 2;
    image::imageops::crop_imm(img, x0, y0, side, side).to_image()
}

/// Centered square crop followed by a bilinear downscale to `size x size`.
pub fn crop_and_resize<P>(img: &ImageBuffer<P, Vec<P::Subpixel>>, size: u32) -> ImageBuffer<P, Vec<P::Subpixel>>
where
    P: Pixel + 'static,
{
    let square = centered_square(img);
    image::imageops::resize(&square, size, size, image::imageops::FilterType::Triangle)
}

pub(crate) fn check_same_size(a: (u32, u32), b: (u32, u32), what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!(
            "{what}: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}
