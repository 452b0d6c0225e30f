//! Image-based sun tracking.
//!
//! The sun is located directly when the short exposure contains a large
//! enough saturated blob. To place it when hidden, positions are first
//! modelled separately for every minute of the day as a function of the day
//! number with a yearly + half-yearly harmonic basis, fitted under an L1 loss
//! (iteratively reweighted least squares). A ridge-regularized polynomial over
//! the minutes of a given day then turns those per-minute estimates into a
//! smooth trajectory.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::TAU;
use std::path::Path;

use chrono::{DateTime, NaiveDate, Timelike, Utc};
use image::{ImageBuffer, Pixel, Primitive, Rgb};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::to_f64;
use crate::timefmt;

pub const YEAR_DAYS: f64 = 365.25;
pub const MINUTES_PER_DAY: u16 = 1440;
pub const BASIS_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SunObservation {
    pub timestamp: DateTime<Utc>,
    /// Pixel position `(x, y)`; `None` when the sun is not visible.
    pub position: Option<(f64, f64)>,
}

impl SunObservation {
    pub fn visible(&self) -> bool {
        self.position.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    /// Blue-channel level at or above which a pixel counts as saturated.
    pub saturation_level: f64,
    /// Minimum blob area (pixels) for the sun to count as visible.
    pub area_min: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            saturation_level: 250.0,
            area_min: 10,
        }
    }
}

/// Centroid of the largest 4-connected saturated component of the blue
/// channel, if its area reaches `area_min`.
pub fn detect_sun<S: Primitive>(
    short_exposure: &ImageBuffer<Rgb<S>, Vec<S>>,
    timestamp: DateTime<Utc>,
    cfg: &DetectConfig,
) -> SunObservation
where
    Rgb<S>: Pixel<Subpixel = S>,
{
    let (w, h) = short_exposure.dimensions();
    let (wu, hu) = (w as usize, h as usize);
    let hot: Vec<bool> = short_exposure
        .pixels()
        .map(|p| to_f64(p.0[2]) >= cfg.saturation_level)
        .collect();
    let mut seen = vec![false; hot.len()];
    let mut best: Option<(usize, f64, f64)> = None;
    let mut queue = VecDeque::new();
    for start in 0..hot.len() {
        if !hot[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut area, mut sx, mut sy) = (0usize, 0.0, 0.0);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % wu, i / wu);
            area += 1;
            sx += x as f64;
            sy += y as f64;
            let mut push = |j: usize| {
                if hot[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < wu {
                push(i + 1);
            }
            if y > 0 {
                push(i - wu);
            }
            if y + 1 < hu {
                push(i + wu);
            }
        }
        if best.map_or(true, |(a, _, _)| area > a) {
            best = Some((area, sx / area as f64, sy / area as f64));
        }
    }
    let position = best
        .filter(|&(area, _, _)| area >= cfg.area_min)
        .map(|(_, x, y)| (x, y));
    SunObservation {
        timestamp,
        position,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub min_observations: usize,
    pub min_days: usize,
    pub irls_iterations: usize,
    pub irls_epsilon: f64,
    pub degree: usize,
    pub ridge: f64,
    pub loss: Loss,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            min_observations: 5,
            min_days: 30,
            irls_iterations: 20,
            irls_epsilon: 1e-6,
            degree: 4,
            ridge: 1e-3,
            loss: Loss::L1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinuteFit {
    pub x: [f64; BASIS_LEN],
    pub y: [f64; BASIS_LEN],
    pub observations: usize,
}

impl MinuteFit {
    pub fn position(&self, day: f64) -> (f64, f64) {
        let b = periodic_basis(day);
        (dot(&self.x, &b), dot(&self.y, &b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SunTrajectoryModel {
    pub minutes: BTreeMap<u16, MinuteFit>,
    /// Minutes that had some visible observations but too few to fit.
    pub unfitted: Vec<u16>,
    pub degree: usize,
    pub ridge: f64,
    pub image_width: u32,
}

fn dot(a: &[f64; BASIS_LEN], b: &[f64; BASIS_LEN]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `{1, cos(2πd/P), sin(2πd/P), cos(4πd/P), sin(4πd/P)}` with `P` one year.
pub fn periodic_basis(day: f64) -> [f64; BASIS_LEN] {
    let w = TAU * day / YEAR_DAYS;
    [1.0, w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin()]
}

/// Day number used by the periodic basis: days since 2000-01-01.
pub fn day_number(date: NaiveDate) -> f64 {
    let epoch = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid epoch");
    (date - epoch).num_days() as f64
}

pub fn minute_of_day(t: &DateTime<Utc>) -> u16 {
    (t.hour() * 60 + t.minute()) as u16
}

/// Weighted least squares via the normal equations; `None` if singular.
fn weighted_lstsq(a: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, ridge: &[f64]) -> Option<DVector<f64>> {
    let aw = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * w[i]);
    let mut normal = aw.transpose() * a;
    for (k, r) in ridge.iter().enumerate() {
        normal[(k, k)] += r;
    }
    let rhs = aw.transpose() * y;
    match normal.clone().cholesky() {
        Some(ch) => Some(ch.solve(&rhs)),
        None => normal.lu().solve(&rhs),
    }
}

/// L1 (IRLS) or L2 regression of `y` on the rows of `a`.
pub fn robust_fit(a: &DMatrix<f64>, y: &DVector<f64>, loss: Loss, iterations: usize, eps: f64) -> Option<DVector<f64>> {
    let zero_ridge = vec![0.0; a.ncols()];
    let mut w = DVector::from_element(a.nrows(), 1.0);
    let mut coef = weighted_lstsq(a, y, &w, &zero_ridge)?;
    if loss == Loss::L2 {
        return Some(coef);
    }
    for _ in 0..iterations {
        let resid = y - a * &coef;
        for (wi, r) in w.iter_mut().zip(resid.iter()) {
            *wi = 1.0 / r.abs().max(eps);
        }
        // rescaling keeps the normal matrix well conditioned
        let wmax = w.max();
        w /= wmax;
        coef = weighted_lstsq(a, y, &w, &zero_ridge)?;
    }
    Some(coef)
}

/// Fit the per-minute periodic model from all observations.
pub fn fit_trajectory(obs: &[SunObservation], image_width: u32, cfg: &TrackerConfig) -> Result<SunTrajectoryModel> {
    let mut by_minute: BTreeMap<u16, Vec<(f64, f64, f64)>> = BTreeMap::new();
    let mut days = BTreeSet::new();
    for o in obs {
        if let Some((x, y)) = o.position {
            let date = o.timestamp.date_naive();
            days.insert(date);
            by_minute
                .entry(minute_of_day(&o.timestamp))
                .or_default()
                .push((day_number(date), x, y));
        }
    }
    if days.len() < cfg.min_days {
        return Err(Error::Coverage {
            message: format!(
                "visible observations cover {} distinct days, need {}",
                days.len(),
                cfg.min_days
            ),
            minutes: by_minute.keys().copied().collect(),
        });
    }

    let mut minutes = BTreeMap::new();
    let mut unfitted = Vec::new();
    for (&minute, samples) in &by_minute {
        let fit = if samples.len() >= cfg.min_observations {
            fit_minute(samples, cfg)
        } else {
            None
        };
        match fit {
            Some(f) => {
                minutes.insert(minute, f);
            }
            None => unfitted.push(minute),
        }
    }
    if minutes.is_empty() {
        return Err(Error::Coverage {
            message: format!("no minute of day has {} usable observations", cfg.min_observations),
            minutes: unfitted,
        });
    }
    Ok(SunTrajectoryModel {
        minutes,
        unfitted,
        degree: cfg.degree,
        ridge: cfg.ridge,
        image_width,
    })
}

fn fit_minute(samples: &[(f64, f64, f64)], cfg: &TrackerConfig) -> Option<MinuteFit> {
    let n = samples.len();
    let a = DMatrix::from_fn(n, BASIS_LEN, |i, j| periodic_basis(samples[i].0)[j]);
    let xs = DVector::from_iterator(n, samples.iter().map(|s| s.1));
    let ys = DVector::from_iterator(n, samples.iter().map(|s| s.2));
    let cx = robust_fit(&a, &xs, cfg.loss, cfg.irls_iterations, cfg.irls_epsilon)?;
    let cy = robust_fit(&a, &ys, cfg.loss, cfg.irls_iterations, cfg.irls_epsilon)?;
    if cx.iter().chain(cy.iter()).any(|v| !v.is_finite()) {
        return None;
    }
    let mut fit = MinuteFit {
        x: [0.0; BASIS_LEN],
        y: [0.0; BASIS_LEN],
        observations: n,
    };
    fit.x.copy_from_slice(cx.as_slice());
    fit.y.copy_from_slice(cy.as_slice());
    Some(fit)
}

/// Minute of day mapped onto [-1, 1].
pub fn normalized_minute(minute: f64) -> f64 {
    2.0 * minute / (MINUTES_PER_DAY - 1) as f64 - 1.0
}

/// Smooth minute-by-minute trajectory of one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTrajectory {
    /// Monomial coefficients in the normalized minute, lowest order first.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub first_minute: u16,
    pub last_minute: u16,
}

impl DayTrajectory {
    pub fn at(&self, minute: f64) -> (f64, f64) {
        let t = normalized_minute(minute);
        let eval = |c: &[f64]| c.iter().rev().fold(0.0, |acc, &k| acc * t + k);
        (eval(&self.x), eval(&self.y))
    }

    pub fn covers(&self, minute: u16) -> bool {
        (self.first_minute..=self.last_minute).contains(&minute)
    }

    /// Positions for every minute of the covered range.
    pub fn positions(&self) -> Vec<(u16, (f64, f64))> {
        (self.first_minute..=self.last_minute)
            .map(|m| (m, self.at(m as f64)))
            .collect()
    }
}

/// Ridge-regularized polynomial fit of per-minute positions. The intercept is
/// not penalized.
pub fn smooth_positions(samples: &[(u16, (f64, f64))], degree: usize, ridge: f64) -> Result<DayTrajectory> {
    if degree < 2 {
        return Err(Error::Domain(format!("polynomial degree must be >= 2, got {degree}")));
    }
    if samples.len() < degree + 1 {
        return Err(Error::coverage(format!(
            "{} minute estimates cannot determine a degree-{degree} polynomial",
            samples.len()
        )));
    }
    let n = samples.len();
    let a = DMatrix::from_fn(n, degree + 1, |i, j| normalized_minute(samples[i].0 as f64).powi(j as i32));
    let xs = DVector::from_iterator(n, samples.iter().map(|s| s.1 .0));
    let ys = DVector::from_iterator(n, samples.iter().map(|s| s.1 .1));
    let w = DVector::from_element(n, 1.0);
    let mut penalty = vec![ridge; degree + 1];
    penalty[0] = 0.0;
    let solve = |v: &DVector<f64>| {
        weighted_lstsq(&a, v, &w, &penalty)
            .ok_or_else(|| Error::coverage("singular smoothing system"))
    };
    let cx = solve(&xs)?;
    let cy = solve(&ys)?;
    let first = samples.iter().map(|s| s.0).min().unwrap_or(0);
    let last = samples.iter().map(|s| s.0).max().unwrap_or(0);
    Ok(DayTrajectory {
        x: cx.iter().copied().collect(),
        y: cy.iter().copied().collect(),
        first_minute: first,
        last_minute: last,
    })
}

impl SunTrajectoryModel {
    /// Per-minute estimates of the periodic model for a date.
    pub fn minute_estimates(&self, date: NaiveDate) -> Vec<(u16, (f64, f64))> {
        let d = day_number(date);
        self.minutes.iter().map(|(&m, f)| (m, f.position(d))).collect()
    }

    pub fn smooth_day(&self, date: NaiveDate) -> Result<DayTrajectory> {
        smooth_positions(&self.minute_estimates(date), self.degree, self.ridge)
    }

    pub fn sun_position(&self, t: &DateTime<Utc>) -> Result<(f64, f64)> {
        let day = self.smooth_day(t.date_naive())?;
        let m = minute_of_day(t);
        if !day.covers(m) {
            return Err(Error::Coverage {
                message: format!(
                    "minute {m} outside the fitted range {}..={}",
                    day.first_minute, day.last_minute
                ),
                minutes: vec![m],
            });
        }
        // seconds within the minute are ignored: positions are per minute
        Ok(day.at(m as f64))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn sun_position(model: &SunTrajectoryModel, t: &DateTime<Utc>) -> Result<(f64, f64)> {
    model.sun_position(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingError {
    pub evaluated: usize,
    pub skipped: usize,
    pub mae_px: f64,
    /// MAE as a fraction of the image width.
    pub mae_width_fraction: f64,
}

/// Mean absolute Euclidean distance between model positions and visible
/// observations. Observations outside the model's coverage are skipped.
pub fn tracking_error(model: &SunTrajectoryModel, obs: &[SunObservation]) -> TrackingError {
    let mut by_date: BTreeMap<NaiveDate, Vec<&SunObservation>> = BTreeMap::new();
    for o in obs.iter().filter(|o| o.visible()) {
        by_date.entry(o.timestamp.date_naive()).or_default().push(o);
    }
    let (mut sum, mut n, mut skipped) = (0.0, 0usize, 0usize);
    for (date, day_obs) in by_date {
        let Ok(day) = model.smooth_day(date) else {
            skipped += day_obs.len();
            continue;
        };
        for o in day_obs {
            let m = minute_of_day(&o.timestamp);
            match o.position {
                Some((x, y)) if day.covers(m) => {
                    let (px, py) = day.at(m as f64);
                    sum += (px - x).hypot(py - y);
                    n += 1;
                }
                _ => skipped += 1,
            }
        }
    }
    let mae = if n > 0 { sum / n as f64 } else { f64::NAN };
    TrackingError {
        evaluated: n,
        skipped,
        mae_px: mae,
        mae_width_fraction: mae / model.image_width.max(1) as f64,
    }
}

/// Read observations from CSV `timestamp_iso,visible,x_px,y_px`.
pub fn read_observations(path: &Path) -> Result<Vec<SunObservation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| schema_err(path, 1, e.to_string()))?;
    let headers = rdr.headers().map_err(|e| schema_err(path, 1, e.to_string()))?.clone();
    let expected = ["timestamp_iso", "visible", "x_px", "y_px"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(schema_err(path, 1, format!("expected header {}", expected.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            schema_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let ts = timefmt::parse_iso(&rec[0]).map_err(|m| schema_err(path, line, m))?;
        let visible = match rec[1].trim() {
            "true" | "1" => true,
            "false" | "0" => false,
            other => return Err(schema_err(path, line, format!("bad visible flag '{other}'"))),
        };
        let position = if visible {
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| schema_err(path, line, format!("bad coordinate '{s}'")))
            };
            Some((num(&rec[2])?, num(&rec[3])?))
        } else {
            None
        };
        out.push(SunObservation {
            timestamp: ts,
            position,
        });
    }
    Ok(out)
}

pub fn write_observations(path: &Path, obs: &[SunObservation]) -> Result<()> {
    let mut s = String::from("timestamp_iso,visible,x_px,y_px\n");
    for o in obs {
        match o.position {
            Some((x, y)) => s.push_str(&format!("{},true,{x},{y}\n", timefmt::format_iso(&o.timestamp))),
            None => s.push_str(&format!("{},false,,\n", timefmt::format_iso(&o.timestamp))),
        }
    }
    crate::io::write_atomic(path, s.as_bytes())
}

fn schema_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}
