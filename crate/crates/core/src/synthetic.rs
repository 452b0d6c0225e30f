//! Deterministic synthetic fixtures: sky scenes with known labels, plane
//! checkerboards, sun arcs, irradiance days, satellite stacks and latent
//! data with known structure. Used by the examples, the tests and anyone
//! wanting to exercise the pipeline without an archive.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::baseline::{analytic_clear_sky, solar_zenith, Site};
use crate::error::Result;
use crate::geometry::CameraModel;
use crate::latent::StateMatrix;
use crate::raster::FloatRaster;
use crate::satellite::RadianceStack;
use crate::segmentation::{SegMap, SkyClass};
use crate::series::IrradianceSeries;
use crate::suntrack::{day_number, normalized_minute, periodic_basis, SunObservation, BASIS_LEN};
use crate::timefmt;

#[derive(Debug, Clone, PartialEq)]
pub enum SkyScene {
    /// Blue sky, a visible sun disk with a saturated halo.
    Clear { sun: (f64, f64) },
    /// Uniform grey dome, sun hidden.
    Overcast,
    /// Blue sky with grey cloud disks `(x, y, radius)` and no visible sun.
    Broken { clouds: Vec<(f64, f64, f64)> },
}

#[derive(Debug, Clone)]
pub struct SkyFixture {
    pub long: RgbImage,
    pub short: RgbImage,
    /// Labels implied by the construction.
    pub expected: SegMap,
    /// Sun position to hand to the segmenter.
    pub sun: Option<(f64, f64)>,
}

/// Sun disk radius as a fraction of the image width.
pub const SUN_RADIUS_FRACTION: f64 = 0.02;
/// Saturated halo radius in sun radii.
pub const HALO_FACTOR: f64 = 2.5;

pub fn sky_fixture(cam: &CameraModel, scene: &SkyScene) -> SkyFixture {
    let (w, h) = cam.image_size;
    let mut long = RgbImage::new(w, h);
    let mut short = RgbImage::new(w, h);
    let mut expected = SegMap::filled(w, h, SkyClass::Frame);
    let dome = cam.dome_radius();
    let rs = SUN_RADIUS_FRACTION * w as f64;
    for y in 0..h {
        for x in 0..w {
            let r = (x as f64 - cam.center.0).hypot(y as f64 - cam.center.1);
            if r > dome {
                continue;
            }
            let rel = r / dome;
            // mild brightening toward the horizon keeps the ratio nearly constant
            let sky = Rgb([(60.0 + 20.0 * rel) as u8, (110.0 + 20.0 * rel) as u8, (200.0 + 20.0 * rel) as u8]);
            let (l, s, class) = match scene {
                SkyScene::Clear { sun } => {
                    let d = (x as f64 - sun.0).hypot(y as f64 - sun.1);
                    if d <= rs {
                        (Rgb([255, 255, 255]), Rgb([255, 255, 255]), SkyClass::Sun)
                    } else if d <= HALO_FACTOR * rs {
                        (Rgb([255, 255, 255]), Rgb([40, 50, 70]), SkyClass::Saturation)
                    } else {
                        (sky, Rgb([10, 15, 30]), SkyClass::Sky)
                    }
                }
                SkyScene::Overcast => (Rgb([150, 150, 158]), Rgb([40, 40, 42]), SkyClass::Cloud),
                SkyScene::Broken { clouds } => {
                    let cloudy = clouds
                        .iter()
                        .any(|&(cx, cy, cr)| (x as f64 - cx).hypot(y as f64 - cy) <= cr);
                    if cloudy {
                        (Rgb([170, 170, 178]), Rgb([45, 45, 47]), SkyClass::Cloud)
                    } else {
                        (sky, Rgb([10, 15, 30]), SkyClass::Sky)
                    }
                }
            };
            long.put_pixel(x, y, l);
            short.put_pixel(x, y, s);
            expected.set(x, y, class);
        }
    }
    let sun = match scene {
        SkyScene::Clear { sun } => Some(*sun),
        _ => None,
    };
    SkyFixture {
        long,
        short,
        expected,
        sun,
    }
}

/// Black/white checkerboard of `cells x cells` squares.
pub fn checkerboard(size: u32, cells: u32) -> RgbImage {
    let cell = (size / cells.max(1)).max(1);
    RgbImage::from_fn(size, size, |x, y| {
        if ((x / cell) + (y / cell)) % 2 == 0 {
            Rgb([255, 255, 255])
        } else {
            Rgb([0, 0, 0])
        }
    })
}

/// Smooth low-contrast test pattern, useful where bilinear resampling error
/// should be small.
pub fn smooth_pattern(width: u32, height: u32) -> RgbImage {
    RgbImage::from_fn(width, height, |x, y| {
        let u = x as f64 / width as f64;
        let v = y as f64 / height as f64;
        Rgb([
            (128.0 + 100.0 * (3.0 * u).sin()) as u8,
            (128.0 + 100.0 * (2.0 * v).cos()) as u8,
            (128.0 + 90.0 * (2.0 * (u + v)).sin()) as u8,
        ])
    })
}

/// Sun trajectory whose per-minute dependence on the day is exactly the
/// periodic basis and whose daily shape is a quartic in the normalized
/// minute, so the tracker can represent it exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SunArcTruth {
    /// `x[k][p]`: coefficient of basis `k` times `t^p`.
    pub x: [[f64; 5]; BASIS_LEN],
    pub y: [[f64; 5]; BASIS_LEN],
}

impl SunArcTruth {
    /// Plausible arcs for a camera of the given width.
    pub fn example(width: u32) -> Self {
        let s = width as f64 / 1024.0;
        let mut x = [[0.0; 5]; BASIS_LEN];
        let mut y = [[0.0; 5]; BASIS_LEN];
        x[0] = [512.0 * s, 600.0 * s, 0.0, -80.0 * s, 0.0];
        x[1] = [0.0, -60.0 * s, 0.0, 10.0 * s, 0.0];
        x[2] = [8.0 * s, 15.0 * s, 0.0, 0.0, 0.0];
        x[3] = [0.0, 6.0 * s, 0.0, 0.0, 0.0];
        y[0] = [260.0 * s, 0.0, 400.0 * s, 0.0, -30.0 * s];
        y[1] = [70.0 * s, 0.0, -20.0 * s, 0.0, 0.0];
        y[2] = [0.0, 5.0 * s, 0.0, 0.0, 0.0];
        y[4] = [3.0 * s, 0.0, 0.0, 0.0, 0.0];
        Self { x, y }
    }

    pub fn position(&self, date: NaiveDate, minute: u16) -> (f64, f64) {
        let b = periodic_basis(day_number(date));
        let t = normalized_minute(minute as f64);
        let eval = |c: &[[f64; 5]; BASIS_LEN]| -> f64 {
            (0..BASIS_LEN)
                .map(|k| b[k] * c[k].iter().rev().fold(0.0, |acc, &a| acc * t + a))
                .sum()
        };
        (eval(&self.x), eval(&self.y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcNoise {
    /// Gaussian jitter on inliers (pixels).
    pub sigma_px: f64,
    /// Fraction of visible observations replaced by uniform positions.
    pub outlier_fraction: f64,
    /// Fraction of observations marked not visible.
    pub hidden_fraction: f64,
}

impl ArcNoise {
    pub const NONE: ArcNoise = ArcNoise {
        sigma_px: 0.0,
        outlier_fraction: 0.0,
        hidden_fraction: 0.0,
    };
}

/// Observations at `minutes` on every date, drawn from `truth`.
pub fn sun_arcs(
    truth: &SunArcTruth,
    dates: &[NaiveDate],
    minutes: &[u16],
    image_width: u32,
    noise: ArcNoise,
    seed: u64,
) -> Vec<SunObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(dates.len() * minutes.len());
    for &date in dates {
        for &m in minutes {
            let t = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("midnight")) + Duration::minutes(m as i64);
            let (x, y) = truth.position(date, m);
            let position = if rng.gen::<f64>() < noise.hidden_fraction {
                None
            } else if rng.gen::<f64>() < noise.outlier_fraction {
                Some((
                    rng.gen_range(0.0..image_width as f64),
                    rng.gen_range(0.0..image_width as f64 * 0.75),
                ))
            } else {
                let jx: f64 = rng.sample(StandardNormal);
                let jy: f64 = rng.sample(StandardNormal);
                Some((x + noise.sigma_px * jx, y + noise.sigma_px * jy))
            };
            out.push(SunObservation { timestamp: t, position });
        }
    }
    out
}

/// Every `step`-th day starting at `start`, `count` dates.
pub fn date_grid(start: NaiveDate, step_days: i64, count: usize) -> Vec<NaiveDate> {
    (0..count as i64).map(|k| start + Duration::days(k * step_days)).collect()
}

/// One day of GHI at `cadence_min` while the sun is up: analytic clear sky
/// modulated by randomly placed cloud passages.
pub fn ghi_day(date: NaiveDate, site: &Site, cadence_min: u32, seed: u64) -> IrradianceSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ day_number(date) as u64);
    let passages: Vec<(f64, f64, f64)> = (0..6)
        .map(|_| {
            let center = rng.gen_range(360.0..1080.0);
            let half = rng.gen_range(4.0..25.0);
            let depth = rng.gen_range(0.3..0.8);
            (center, half, depth)
        })
        .collect();
    let start = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("midnight"));
    let mut samples = Vec::new();
    for m in (0..1440).step_by(cadence_min.max(1) as usize) {
        let t = start + Duration::minutes(m as i64);
        let z = solar_zenith(&t, site.latitude_deg, site.longitude_deg);
        if z >= 90.0 {
            continue;
        }
        let mut k: f64 = 1.0;
        for &(c, half, depth) in &passages {
            let d = (m as f64 - c).abs();
            if d < half {
                k = k.min(1.0 - depth * (1.0 - (d / half).powi(2)));
            }
        }
        samples.push((t, analytic_clear_sky(z) * k));
    }
    IrradianceSeries::new(samples).expect("synthetic series is ordered")
}

/// Analytic clear-sky series on the same instants as `like`.
pub fn clear_sky_like(like: &IrradianceSeries, site: &Site) -> IrradianceSeries {
    let samples = like
        .samples()
        .iter()
        .map(|(t, _)| (*t, analytic_clear_sky(solar_zenith(t, site.latitude_deg, site.longitude_deg))))
        .collect();
    IrradianceSeries::new(samples).expect("same instants")
}

/// Write exposure pairs `<stamp>_long.png` / `<stamp>_short.png` for each
/// time, using a clear-sky scene. Returns the written timestamps.
pub fn write_frames(dir: &Path, times: &[DateTime<Utc>], width: u32, height: u32) -> Result<Vec<PathBuf>> {
    let cam = CameraModel::centered(width, height);
    let fx = sky_fixture(
        &cam,
        &SkyScene::Clear {
            sun: (cam.center.0 + 0.2 * cam.dome_radius(), cam.center.1),
        },
    );
    let mut paths = Vec::new();
    for t in times {
        let stamp = timefmt::format_compact(t);
        for (kind, img) in [("long", &fx.long), ("short", &fx.short)] {
            let p = dir.join(format!("{stamp}_{kind}.png"));
            let mut buf = std::io::Cursor::new(Vec::new());
            img.write_to(&mut buf, image::ImageFormat::Png)?;
            crate::io::write_atomic(&p, &buf.into_inner())?;
            paths.push(p);
        }
    }
    Ok(paths)
}

/// Greyscale stack: ground value `ground` everywhere plus a bright cloud
/// square whose position drifts from day to day.
pub fn radiance_stack(days: u32, frames_per_day: u32, size: u32, ground: f64, cloud: f64, cadence_min: u32) -> RadianceStack {
    let start = Utc.with_ymd_and_hms(2021, 4, 1, 10, 0, 0).unwrap();
    let mut frames = Vec::new();
    for d in 0..days {
        for f in 0..frames_per_day {
            let t = start + Duration::days(d as i64) + Duration::minutes((f * cadence_min) as i64);
            let off = (d * 7 + f * 3) % size.max(1);
            let raster = FloatRaster::from_fn(size, size, |x, y| {
                let inside = (x + size - off) % size < size / 4 && (y + off) % size < size / 4;
                if inside {
                    cloud
                } else {
                    ground
                }
            });
            frames.push((t, raster));
        }
    }
    RadianceStack::new(frames, cadence_min).expect("regular synthetic stack")
}

/// Rows lying exactly on a 2-D affine plane in `cols` dimensions.
pub fn rank2_states(rows: usize, cols: usize, seed: u64) -> StateMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut n = || -> f64 { rng.sample(StandardNormal) };
    let a: Vec<f64> = (0..cols).map(|_| n()).collect();
    let b: Vec<f64> = (0..cols).map(|_| n()).collect();
    let offset: Vec<f64> = (0..cols).map(|_| n()).collect();
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let (s, t) = (3.0 * n(), n());
        data.extend((0..cols).map(|c| offset[c] + s * a[c] + t * b[c]));
    }
    StateMatrix::new(rows, cols, data).expect("finite")
}

/// Isotropic standard-normal rows.
pub fn white_noise_states(rows: usize, cols: usize, seed: u64) -> StateMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    StateMatrix::new(rows, cols, data).expect("finite")
}

/// Two spherical unit-variance blobs `separation` apart; returns the points
/// and their true labels.
pub fn two_blobs(per_blob: usize, separation: f64, seed: u64) -> (Vec<[f64; 2]>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(2 * per_blob);
    let mut labels = Vec::with_capacity(2 * per_blob);
    for label in 0..2 {
        let cx = label as f64 * separation;
        for _ in 0..per_blob {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            pts.push([cx + dx, 0.5 * separation + dy]);
            labels.push(label);
        }
    }
    (pts, labels)
}
