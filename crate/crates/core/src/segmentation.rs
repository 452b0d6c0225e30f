//! Five-class sky segmentation: sky, cloud, sun, saturation and frame.
//!
//! Cloud and sky are separated by thresholding the normalized blue-to-red
//! ratio `(B - R) / (B + R)` of the long exposure. The threshold comes from a
//! hybrid rule: a fixed value when the ratio distribution is unimodal (low
//! spread), otherwise the split maximizing between-class variance. Inside a
//! circumsolar disk the threshold is lowered by a relative amount so that the
//! bright aureole is not mistaken for cloud.

use std::io::{BufReader, Cursor, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Pixel, Primitive, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{channel_max, check_same_size, to_f64, FloatRaster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum SkyClass {
    Sky = 0,
    Cloud = 1,
    Sun = 2,
    Saturation = 3,
    Frame = 4,
}

impl SkyClass {
    pub const ALL: [SkyClass; 5] = [
        SkyClass::Sky,
        SkyClass::Cloud,
        SkyClass::Sun,
        SkyClass::Saturation,
        SkyClass::Frame,
    ];

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SkyClass::Sky => "sky",
            SkyClass::Cloud => "cloud",
            SkyClass::Sun => "sun",
            SkyClass::Saturation => "saturation",
            SkyClass::Frame => "frame",
        }
    }

    /// Normative palette color of the class in indexed PNG files.
    pub fn color(self) -> [u8; 3] {
        match self {
            SkyClass::Sky => [135, 206, 235],
            SkyClass::Cloud => [128, 128, 128],
            SkyClass::Sun => [255, 215, 0],
            SkyClass::Saturation => [255, 255, 255],
            SkyClass::Frame => [0, 0, 0],
        }
    }
}

/// Per-pixel class ids, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegMap {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u8>,
}

impl SegMap {
    pub fn filled(width: u32, height: u32, class: SkyClass) -> Self {
        Self {
            width,
            height,
            labels: vec![class as u8; width as usize * height as usize],
        }
    }

    pub fn from_labels(width: u32, height: u32, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::Shape(format!(
                "{} labels for a {width}x{height} map",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > SkyClass::Frame as u8) {
            return Err(Error::Domain(format!("invalid class id {bad}")));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> SkyClass {
        // labels are validated on construction
        SkyClass::from_id(self.labels[y as usize * self.width as usize + x as usize])
            .unwrap_or(SkyClass::Frame)
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: SkyClass) {
        let i = y as usize * self.width as usize + x as usize;
        self.labels[i] = c as u8;
    }

    /// Pixel count per class, indexed by class id.
    pub fn histogram(&self) -> [u64; 5] {
        let mut h = [0u64; 5];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.encode_png()?)
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Indexed);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_palette(SkyClass::ALL.iter().flat_map(|c| c.color()).collect::<Vec<_>>());
            let mut writer = enc.write_header()?;
            writer.write_image_data(&self.labels)?;
            writer.finish()?;
        }
        Ok(out)
    }

    pub fn read_png(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::decode_png(&bytes)
    }

    /// Decode an 8-bit indexed PNG whose palette matches the normative one.
    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let mut dec = png::Decoder::new(Cursor::new(bytes));
        dec.set_transformations(png::Transformations::IDENTITY);
        let mut reader = dec.read_info()?;
        let info = reader.info();
        if info.color_type != png::ColorType::Indexed || info.bit_depth != png::BitDepth::Eight {
            return Err(Error::Shape("segmentation PNG must be 8-bit indexed".into()));
        }
        let palette = info.palette.as_ref().map(|p| p.to_vec()).unwrap_or_default();
        for (id, class) in SkyClass::ALL.iter().enumerate() {
            if palette.get(3 * id..3 * id + 3) != Some(&class.color()[..]) {
                return Err(Error::Domain(format!(
                    "palette entry {id} does not match class '{}'",
                    class.name()
                )));
            }
        }
        let (w, h) = (info.width, info.height);
        let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(w as usize * h as usize)];
        let frame = reader.next_frame(&mut buf)?;
        buf.truncate(frame.buffer_size());
        Self::from_labels(w, h, buf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HytaConfig {
    /// Circumsolar disk diameter as a fraction of the image width.
    pub circumsolar_disk_diameter: f64,
    /// Relative decrease of the threshold inside the circumsolar disk.
    pub circumsolar_relaxation: f64,
    pub unimodality_std_threshold: f64,
    pub fixed_threshold: f64,
    /// Sun pixels exceed this fraction of the windowed short-exposure maximum.
    pub sun_fraction: f64,
    /// Remaining pixels whose blue channel exceeds this fraction of the
    /// channel range are saturated.
    pub saturation_fraction: f64,
}

impl Default for HytaConfig {
    fn default() -> Self {
        Self {
            circumsolar_disk_diameter: 0.12,
            circumsolar_relaxation: 0.10,
            unimodality_std_threshold: 0.03,
            fixed_threshold: 0.25,
            sun_fraction: 0.90,
            saturation_fraction: 0.98,
        }
    }
}

impl HytaConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64, name: &str| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        unit(self.circumsolar_disk_diameter, "circumsolar_disk_diameter")?;
        unit(self.circumsolar_relaxation, "circumsolar_relaxation")?;
        unit(self.sun_fraction, "sun_fraction")?;
        unit(self.saturation_fraction, "saturation_fraction")?;
        if !(self.unimodality_std_threshold >= 0.0) {
            return Err(Error::Domain("unimodality_std_threshold must be >= 0".into()));
        }
        Ok(())
    }
}

#[inline]
fn nbrb(r: f64, b: f64) -> f64 {
    let s = b + r;
    if s == 0.0 {
        0.0
    } else {
        (b - r) / s
    }
}

/// Normalized blue-to-red ratio of an RGB image.
pub fn normalized_brb_rgb<S: Primitive>(img: &ImageBuffer<Rgb<S>, Vec<S>>) -> FloatRaster
where
    Rgb<S>: Pixel<Subpixel = S>,
{
    let (w, h) = img.dimensions();
    FloatRaster::from_fn(w, h, |x, y| {
        let p = img.get_pixel(x, y).0;
        nbrb(to_f64(p[0]), to_f64(p[2]))
    })
}

/// Normalized blue-to-red ratio of a decoded image; only 3-channel images
/// are accepted.
pub fn normalized_brb(img: &DynamicImage) -> Result<FloatRaster> {
    match img {
        DynamicImage::ImageRgb8(i) => Ok(normalized_brb_rgb(i)),
        DynamicImage::ImageRgb16(i) => Ok(normalized_brb_rgb(i)),
        DynamicImage::ImageRgb32F(i) => Ok(normalized_brb_rgb(i)),
        other => Err(Error::Shape(format!(
            "expected a 3-channel image, got {:?}",
            other.color()
        ))),
    }
}

pub const HISTOGRAM_BINS: usize = 256;

/// Threshold on nBRB values (frame pixels already excluded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub unimodal: bool,
}

pub fn hyta_threshold(values: &[f64], cfg: &HytaConfig) -> Threshold {
    let fixed = Threshold {
        value: cfg.fixed_threshold,
        unimodal: true,
    };
    if values.is_empty() {
        return fixed;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var.sqrt() < cfg.unimodality_std_threshold {
        return fixed;
    }
    Threshold {
        value: otsu_threshold(values),
        unimodal: false,
    }
}

fn bin_of(v: f64) -> usize {
    let t = (v.clamp(-1.0, 1.0) + 1.0) / 2.0 * HISTOGRAM_BINS as f64;
    (t as usize).min(HISTOGRAM_BINS - 1)
}

fn bin_upper_edge(k: usize) -> f64 {
    -1.0 + (k + 1) as f64 * 2.0 / HISTOGRAM_BINS as f64
}

/// Between-class variance maximization over a 256-bin histogram on [-1, 1].
/// When several splits tie, the middle of the tied range is returned.
fn otsu_threshold(values: &[f64]) -> f64 {
    let mut hist = [0u64; HISTOGRAM_BINS];
    for &v in values {
        hist[bin_of(v)] += 1;
    }
    let total = values.len() as f64;
    let center = |k: usize| -1.0 + (k as f64 + 0.5) * 2.0 / HISTOGRAM_BINS as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(k, &c)| c as f64 * center(k)).sum();

    let mut scores = [f64::NEG_INFINITY; HISTOGRAM_BINS - 1];
    let (mut w0, mut s0) = (0.0, 0.0);
    for k in 0..HISTOGRAM_BINS - 1 {
        w0 += hist[k] as f64;
        s0 += hist[k] as f64 * center(k);
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = s0 / w0;
        let m1 = (sum_all - s0) / w1;
        scores[k] = (w0 / total) * (w1 / total) * (m0 - m1).powi(2);
    }
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        // single occupied bin
        return bin_upper_edge(bin_of(values[0]));
    }
    let tol = best.abs() * 1e-12;
    let first = scores.iter().position(|&s| s >= best - tol).unwrap_or(0);
    let last = scores.iter().rposition(|&s| s >= best - tol).unwrap_or(first);
    0.5 * (bin_upper_edge(first) + bin_upper_edge(last))
}

/// Threshold applied inside the circumsolar disk: always lower than `t`.
pub fn relaxed_threshold(t: f64, relaxation: f64) -> f64 {
    t - relaxation * t.abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub map: SegMap,
    pub threshold: Threshold,
    /// Whether the circumsolar relaxation was applied (a sun position was
    /// available, observed or model-estimated).
    pub circumsolar_applied: bool,
}

/// Segment an exposure pair. `sun` is the sun position in pixel coordinates
/// when known.
pub fn segment<S: Primitive>(
    long_exp: &ImageBuffer<Rgb<S>, Vec<S>>,
    short_exp: &ImageBuffer<Rgb<S>, Vec<S>>,
    sun: Option<(f64, f64)>,
    cfg: &HytaConfig,
) -> Result<Segmentation>
where
    Rgb<S>: Pixel<Subpixel = S>,
{
    check_same_size(long_exp.dimensions(), short_exp.dimensions(), "exposure pair")?;
    cfg.validate()?;
    let (w, h) = long_exp.dimensions();
    let max_value = channel_max::<S>();
    let npix = w as usize * h as usize;
    let mut labels: Vec<Option<SkyClass>> = vec![None; npix];

    let zero = |p: &Rgb<S>| p.0.iter().all(|&c| to_f64(c) == 0.0);
    for (i, (l, s)) in long_exp.pixels().zip(short_exp.pixels()).enumerate() {
        if zero(l) && zero(s) {
            labels[i] = Some(SkyClass::Frame);
        }
    }

    if let Some((sx, sy)) = sun {
        let sigma = w as f64 / 2.0;
        let two_s2 = 2.0 * sigma * sigma;
        let weighted: Vec<f64> = short_exp
            .enumerate_pixels()
            .map(|(x, y, p)| {
                let d2 = (x as f64 - sx).powi(2) + (y as f64 - sy).powi(2);
                to_f64(p.0[2]) * (-d2 / two_s2).exp()
            })
            .collect();
        let peak = weighted
            .iter()
            .zip(&labels)
            .filter(|(_, l)| l.is_none())
            .map(|(v, _)| *v)
            .fold(0.0, f64::max);
        if peak > 0.0 {
            let cut = cfg.sun_fraction * peak;
            for (l, &v) in labels.iter_mut().zip(&weighted) {
                if l.is_none() && v > cut {
                    *l = Some(SkyClass::Sun);
                }
            }
        }
    }

    let sat_cut = cfg.saturation_fraction * max_value;
    for (l, p) in labels.iter_mut().zip(long_exp.pixels()) {
        if l.is_none() && to_f64(p.0[2]) > sat_cut {
            *l = Some(SkyClass::Saturation);
        }
    }

    let ratio = normalized_brb_rgb(long_exp);
    let candidates: Vec<f64> = labels
        .iter()
        .zip(&ratio.data)
        .filter(|(l, _)| l.is_none())
        .map(|(_, &v)| v)
        .collect();
    let threshold = hyta_threshold(&candidates, cfg);
    let relaxed = relaxed_threshold(threshold.value, cfg.circumsolar_relaxation);
    let disk_r2 = (cfg.circumsolar_disk_diameter * w as f64 / 2.0).powi(2);

    let mut map = SegMap::filled(w, h, SkyClass::Frame);
    for y in 0..h {
        for x in 0..w {
            let i = y as usize * w as usize + x as usize;
            let class = labels[i].unwrap_or_else(|| {
                let in_disk = sun
                    .map(|(sx, sy)| (x as f64 - sx).powi(2) + (y as f64 - sy).powi(2) <= disk_r2)
                    .unwrap_or(false);
                let t = if in_disk { relaxed } else { threshold.value };
                if ratio.data[i] < t {
                    SkyClass::Cloud
                } else {
                    SkyClass::Sky
                }
            });
            map.labels[i] = class as u8;
        }
    }

    Ok(Segmentation {
        map,
        threshold,
        circumsolar_applied: sun.is_some(),
    })
}

/// Write a class histogram CSV row body: counts in class-id order.
pub fn write_histogram_row<W: Write>(out: &mut W, name: &str, h: &[u64; 5]) -> std::io::Result<()> {
    writeln!(out, "{name},{},{},{},{},{}", h[0], h[1], h[2], h[3], h[4])
}
