//! Cloud index from greyscale geostationary imagery.
//!
//! `CI = (ρ - ρ_min) / (ρ_max(t) - ρ_min)` where `ρ_min` is the per-pixel
//! minimum at the same time of day over the last `N` days and `ρ_max(t)` is
//! the brightest pixel of the current frame.

use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, Timelike, Utc};
use image::{DynamicImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{file_stem, list_files, write_atomic};
use crate::raster::FloatRaster;
use crate::timefmt;

pub const DEFAULT_CADENCE_MIN: u32 = 5;
pub const DEFAULT_WINDOW_DAYS: u32 = 10;
pub const DEFAULT_MIN_DENOMINATOR: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RadianceStack {
    frames: Vec<(DateTime<Utc>, FloatRaster)>,
    cadence_min: u32,
}

impl RadianceStack {
    /// Frames are sorted by time. All must share one size and sit within one
    /// minute of the cadence grid anchored at the first frame.
    pub fn new(mut frames: Vec<(DateTime<Utc>, FloatRaster)>, cadence_min: u32) -> Result<Self> {
        if cadence_min == 0 {
            return Err(Error::Domain("cadence must be at least one minute".into()));
        }
        frames.sort_by_key(|(t, _)| *t);
        if let Some((_, first)) = frames.first() {
            let dims = first.dimensions();
            for (t, f) in &frames {
                if f.dimensions() != dims {
                    return Err(Error::Shape(format!(
                        "frame {} is {:?}, expected {:?}",
                        timefmt::format_iso(t),
                        f.dimensions(),
                        dims
                    )));
                }
                if f.data.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain(format!("frame {} has non-finite values", timefmt::format_iso(t))));
                }
            }
            let t0 = frames[0].0;
            let step = cadence_min as i64 * 60;
            for (t, _) in &frames {
                let phase = (*t - t0).num_seconds().rem_euclid(step);
                if phase.min(step - phase) > 60 {
                    return Err(Error::Domain(format!(
                        "frame {} is off the {cadence_min}-min cadence",
                        timefmt::format_iso(t)
                    )));
                }
            }
        }
        for w in frames.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Domain(format!("duplicate frame at {}", timefmt::format_iso(&w[0].0))));
            }
        }
        Ok(Self { frames, cadence_min })
    }

    pub fn frames(&self) -> &[(DateTime<Utc>, FloatRaster)] {
        &self.frames
    }

    pub fn cadence_min(&self) -> u32 {
        self.cadence_min
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frame nearest to `t` within half a cadence.
    pub fn frame_at(&self, t: &DateTime<Utc>) -> Option<&(DateTime<Utc>, FloatRaster)> {
        let half = self.half_cadence();
        self.frames
            .iter()
            .filter(|(ft, _)| (*ft - *t).abs() <= half)
            .min_by_key(|(ft, _)| (*ft - *t).abs())
    }

    fn half_cadence(&self) -> Duration {
        Duration::seconds(self.cadence_min as i64 * 30)
    }

    /// Frames at the time of day of `t` on the `n_days` calendar days ending
    /// with `t`'s day.
    pub fn matching_frames(&self, t: &DateTime<Utc>, n_days: u32) -> Vec<&(DateTime<Utc>, FloatRaster)> {
        if n_days == 0 {
            return Vec::new();
        }
        let last: NaiveDate = t.date_naive();
        let first = last - Duration::days(n_days as i64 - 1);
        let tod = t.num_seconds_from_midnight() as i64;
        let half = self.cadence_min as i64 * 30;
        self.frames
            .iter()
            .filter(|(ft, _)| {
                let d = ft.date_naive();
                if d < first || d > last {
                    return false;
                }
                let diff = (ft.num_seconds_from_midnight() as i64 - tod).abs();
                diff.min(86_400 - diff) <= half
            })
            .collect()
    }

    /// Per-pixel minimum over [`matching_frames`](Self::matching_frames).
    pub fn rolling_min_raster(&self, t: &DateTime<Utc>, n_days: u32) -> Result<FloatRaster> {
        let matches = self.matching_frames(t, n_days);
        let Some(((_, first), rest)) = matches.split_first() else {
            return Err(Error::coverage(format!(
                "no frame near {} in the last {n_days} day(s)",
                timefmt::format_iso(t)
            )));
        };
        let mut out = first.clone();
        for (_, f) in rest {
            for (o, v) in out.data.iter_mut().zip(&f.data) {
                *o = o.min(*v);
            }
        }
        Ok(out)
    }
}

pub fn rolling_min(stack: &RadianceStack, pixel: (u32, u32), t: &DateTime<Utc>, n_days: u32) -> Result<f64> {
    let matches = stack.matching_frames(t, n_days);
    let (x, y) = pixel;
    if let Some((_, f)) = matches.first() {
        if x >= f.width || y >= f.height {
            return Err(Error::Shape(format!("pixel ({x}, {y}) outside {}x{} frame", f.width, f.height)));
        }
    }
    matches
        .iter()
        .map(|(_, f)| f.get(x, y))
        .reduce(f64::min)
        .ok_or_else(|| Error::coverage(format!("no frame near {} in the last {n_days} day(s)", timefmt::format_iso(t))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudIndexMap {
    pub timestamp: DateTime<Utc>,
    pub values: FloatRaster,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudIndexConfig {
    pub n_days: u32,
    /// Denominators below this map to CI = 0.
    pub min_denominator: f64,
}

impl Default for CloudIndexConfig {
    fn default() -> Self {
        Self {
            n_days: DEFAULT_WINDOW_DAYS,
            min_denominator: DEFAULT_MIN_DENOMINATOR,
        }
    }
}

/// Scalar form of the cloud index, clamped to `[0, 1]`.
pub fn cloud_index_value(rho: f64, rho_min: f64, rho_max: f64, min_denominator: f64) -> f64 {
    let den = rho_max - rho_min;
    if !(den >= min_denominator) {
        return 0.0;
    }
    ((rho - rho_min) / den).clamp(0.0, 1.0)
}

pub fn cloud_index(stack: &RadianceStack, t: &DateTime<Utc>, cfg: &CloudIndexConfig) -> Result<CloudIndexMap> {
    let (ft, frame) = stack
        .frame_at(t)
        .ok_or_else(|| Error::coverage(format!("no frame at {}", timefmt::format_iso(t))))?;
    let mins = stack.rolling_min_raster(ft, cfg.n_days)?;
    let rho_max = frame.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let data = frame
        .data
        .iter()
        .zip(&mins.data)
        .map(|(&rho, &lo)| cloud_index_value(rho, lo, rho_max, cfg.min_denominator))
        .collect();
    Ok(CloudIndexMap {
        timestamp: *ft,
        values: FloatRaster {
            width: frame.width,
            height: frame.height,
            data,
        },
    })
}

fn greyscale_raster(img: &DynamicImage, origin: &Path) -> Result<FloatRaster> {
    let (w, h) = (img.width(), img.height());
    match img {
        DynamicImage::ImageLuma8(g) => Ok(FloatRaster {
            width: w,
            height: h,
            data: g.as_raw().iter().map(|&v| v as f64).collect(),
        }),
        DynamicImage::ImageLuma16(g) => Ok(FloatRaster {
            width: w,
            height: h,
            data: g.as_raw().iter().map(|&v| v as f64).collect(),
        }),
        _ => Err(Error::Shape(format!("{}: expected a greyscale image", origin.display()))),
    }
}

/// Load `YYYYMMDDhhmm.png` files from `dir`. Files whose stem is not a
/// timestamp are ignored.
pub fn load_stack(dir: &Path, cadence_min: u32) -> Result<RadianceStack> {
    let mut frames = Vec::new();
    for p in list_files(dir, "png")? {
        let Some(t) = timefmt::parse_compact(&file_stem(&p)) else {
            continue;
        };
        let img = image::open(&p)?;
        frames.push((t, greyscale_raster(&img, &p)?));
    }
    RadianceStack::new(frames, cadence_min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudIndexSidecar {
    pub timestamp: String,
    pub n_days: u32,
    pub min_denominator: f64,
    pub width: u32,
    pub height: u32,
    /// PNG value = round(CI · scale).
    pub scale: u32,
}

impl CloudIndexMap {
    /// 16-bit greyscale PNG with value `round(CI · 65535)`.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let px: Vec<u16> = self.values.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16).collect();
        let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(self.values.width, self.values.height, px)
            .ok_or_else(|| Error::Shape("cloud-index raster size".into()))?;
        let mut buf = std::io::Cursor::new(Vec::new());
        img.write_to(&mut buf, image::ImageFormat::Png)?;
        Ok(buf.into_inner())
    }

    pub fn decode_png(bytes: &[u8], timestamp: DateTime<Utc>) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
        let DynamicImage::ImageLuma16(g) = img else {
            return Err(Error::Shape("cloud-index PNG must be 16-bit greyscale".into()));
        };
        Ok(Self {
            timestamp,
            values: FloatRaster {
                width: g.width(),
                height: g.height(),
                data: g.as_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
            },
        })
    }

    /// Writes `<stem>.png` and `<stem>.json` into `dir`; returns the PNG path.
    pub fn write(&self, dir: &Path, cfg: &CloudIndexConfig) -> Result<std::path::PathBuf> {
        let stem = format!("{}_ci", &timefmt::format_compact(&self.timestamp)[..12]);
        let png = dir.join(format!("{stem}.png"));
        write_atomic(&png, &self.encode_png()?)?;
        let sidecar = CloudIndexSidecar {
            timestamp: timefmt::format_iso(&self.timestamp),
            n_days: cfg.n_days,
            min_denominator: cfg.min_denominator,
            width: self.values.width,
            height: self.values.height,
            scale: 65535,
        };
        write_atomic(&dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&sidecar)?.as_bytes())?;
        Ok(png)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at(day: u32, h: u32, m: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2020, 5, day, h, m, 0).unwrap()
    }

    fn constant(v: f64) -> FloatRaster {
        FloatRaster::new(4, 3, v)
    }

    #[test]
    fn rolling_min_over_matching_days() {
        let frames = vec![
            (at(1, 12, 0), constant(9.0)),
            (at(2, 12, 0), constant(7.0)),
            (at(3, 12, 0), constant(8.0)),
            (at(4, 12, 0), constant(12.0)),
            (at(4, 12, 5), constant(1.0)),
        ];
        let stack = RadianceStack::new(frames, 5).unwrap();
        assert_eq!(rolling_min(&stack, (1, 1), &at(4, 12, 0), 10).unwrap(), 7.0);
        assert_eq!(rolling_min(&stack, (1, 1), &at(4, 12, 0), 2).unwrap(), 8.0);
        assert_eq!(rolling_min(&stack, (1, 1), &at(4, 12, 0), 1).unwrap(), 12.0);
        assert!(matches!(
            rolling_min(&stack, (0, 0), &at(4, 15, 0), 10),
            Err(Error::Coverage { .. })
        ));
    }

    #[test]
    fn scalar_formula() {
        assert_eq!(cloud_index_value(120.0, 20.0, 220.0, 1.0), 0.5);
        assert_eq!(cloud_index_value(20.0, 20.0, 220.0, 1.0), 0.0);
        assert_eq!(cloud_index_value(220.0, 20.0, 220.0, 1.0), 1.0);
        assert_eq!(cloud_index_value(50.0, 50.0, 50.5, 1.0), 0.0);
    }

    #[test]
    fn off_cadence_frames_rejected() {
        let frames = vec![(at(1, 12, 0), constant(1.0)), (at(1, 12, 7), constant(1.0))];
        assert!(RadianceStack::new(frames, 5).is_err());
    }

    #[test]
    fn png_round_trip_quantizes() {
        let map = CloudIndexMap {
            timestamp: at(1, 12, 0),
            values: FloatRaster::from_fn(5, 2, |x, y| (x + 5 * y) as f64 / 9.0),
        };
        let back = CloudIndexMap::decode_png(&map.encode_png().unwrap(), map.timestamp).unwrap();
        for (a, b) in map.values.data.iter().zip(&back.values.data) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
    }
}
