//! `key = value` run configuration.
//!
//! Files hold one assignment per line; `#` starts a comment. Unknown keys are
//! rejected. Command-line overrides are applied after the file.

use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::baseline::{Site, DEFAULT_LOW_IRRADIANCE};
use crate::dataset::{IndexConfig, SplitConfig, WindowSpec};
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, DEFAULT_MAX_ZENITH_DEG, DEFAULT_OUT_SIZE};
use crate::latent::GmmConfig;
use crate::metrics::Protocol;
use crate::satellite::{CloudIndexConfig, DEFAULT_CADENCE_MIN as SATELLITE_CADENCE_MIN};
use crate::segmentation::HytaConfig;
use crate::suntrack::{DetectConfig, Loss, TrackerConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CameraConfig {
    pub width: u32,
    pub height: u32,
    /// `None` means the image center.
    pub center_x: Option<f64>,
    pub center_y: Option<f64>,
    /// `None` means the dome fills the shorter image side.
    pub radius_per_radian: Option<f64>,
    pub max_zenith_deg: f64,
    pub azimuth_offset_deg: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            width: 1024,
            height: 768,
            center_x: None,
            center_y: None,
            radius_per_radian: None,
            max_zenith_deg: DEFAULT_MAX_ZENITH_DEG,
            azimuth_offset_deg: 0.0,
        }
    }
}

impl CameraConfig {
    pub fn model(&self) -> Result<CameraModel> {
        let auto = CameraModel::centered(self.width, self.height);
        CameraModel::new(
            (
                self.center_x.unwrap_or(auto.center.0),
                self.center_y.unwrap_or(auto.center.1),
            ),
            self.radius_per_radian.unwrap_or(auto.radius_per_radian),
            (self.width, self.height),
            self.max_zenith_deg.to_radians(),
            self.azimuth_offset_deg.to_radians(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub site: Site,
    pub camera: CameraConfig,
    pub undistort_size: u32,
    pub hyta: HytaConfig,
    pub detect: DetectConfig,
    pub tracker: TrackerConfig,
    pub index: IndexConfig,
    pub split: SplitConfig,
    pub window: WindowSpec,
    pub protocol: Protocol,
    pub plot_day: Option<NaiveDate>,
    pub plot_horizon: Option<u32>,
    pub low_irradiance: f64,
    pub horizons: Vec<u32>,
    pub cloud: CloudIndexConfig,
    pub satellite_cadence_min: u32,
    pub pca_components: usize,
    pub pca_standardize: bool,
    pub gmm_components: usize,
    pub gmm_seed: u64,
    pub gmm: GmmConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            site: Site::SIRTA,
            camera: CameraConfig::default(),
            undistort_size: DEFAULT_OUT_SIZE,
            hyta: HytaConfig::default(),
            detect: DetectConfig::default(),
            tracker: TrackerConfig::default(),
            index: IndexConfig::default(),
            split: SplitConfig::default(),
            window: WindowSpec::default(),
            protocol: Protocol::default(),
            plot_day: None,
            plot_horizon: None,
            low_irradiance: DEFAULT_LOW_IRRADIANCE,
            horizons: vec![2, 6, 10],
            cloud: CloudIndexConfig::default(),
            satellite_cadence_min: SATELLITE_CADENCE_MIN,
            pca_components: 4,
            pca_standardize: false,
            gmm_components: 10,
            gmm_seed: 0,
            gmm: GmmConfig::default(),
        }
    }
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("site.latitude_deg", "site latitude"),
    ("site.longitude_deg", "site longitude, east positive"),
    ("site.altitude_m", "site altitude"),
    ("camera.width", "fisheye image width in pixels"),
    ("camera.height", "fisheye image height in pixels"),
    ("camera.center_x", "optical center x in pixels, auto = image center"),
    ("camera.center_y", "optical center y in pixels, auto = image center"),
    ("camera.radius_per_radian", "equidistant scale k in r = k*zenith, auto = dome fills the short side"),
    ("camera.max_zenith_deg", "zenith clip of the undistorted plane"),
    ("camera.azimuth_offset_deg", "azimuth of image-up, clockwise from north"),
    ("undistort.size", "side of undistorted output images"),
    ("segment.circumsolar_disk_diameter", "circumsolar disk diameter / image width"),
    ("segment.circumsolar_relaxation", "relative threshold decrease inside the circumsolar disk"),
    ("segment.unimodality_std", "nBRB std below which the fixed threshold is used"),
    ("segment.fixed_threshold", "nBRB threshold for unimodal images"),
    ("segment.sun_fraction", "sun pixels exceed this fraction of the windowed maximum"),
    ("segment.saturation_fraction", "saturated pixels exceed this fraction of the blue range"),
    ("suntrack.saturation_level", "blue level counted as saturated when detecting the sun"),
    ("suntrack.area_min", "minimum sun blob area in pixels"),
    ("suntrack.min_observations", "visible observations needed to fit a minute"),
    ("suntrack.min_days", "distinct days a fit should span"),
    ("suntrack.irls_iterations", "IRLS iterations for the L1 fit"),
    ("suntrack.degree", "degree of the daily smoothing polynomial"),
    ("suntrack.ridge", "ridge penalty of the daily smoothing polynomial"),
    ("suntrack.loss", "per-minute regression loss (l1|l2)"),
    ("index.min_elevation_deg", "minimum solar elevation kept in the index"),
    ("index.ghi_tolerance_s", "maximum image-to-GHI time offset"),
    ("index.cadence_min", "nominal image cadence"),
    ("split.train_years", "comma-separated training years"),
    ("split.eval_year", "year split into val (even days) and test (odd days)"),
    ("window.context_frames", "input frames per window"),
    ("window.horizon_frames", "target frames per window"),
    ("window.step_min", "spacing of window frames"),
    ("window.input_mode", "rgb|rgbi"),
    ("window.target_mode", "absolute|change"),
    ("window.geometry_mode", "distorted|undistorted"),
    ("window.exposure", "exposure used as model input (long|short)"),
    ("window.size", "side of window images"),
    ("window.tolerance_s", "allowed frame time jitter"),
    ("metrics.windows", "TDI windows sampled per horizon"),
    ("metrics.window_len", "samples per TDI window"),
    ("metrics.step_min", "nominal issue-time spacing"),
    ("metrics.quantile", "error quantile level"),
    ("metrics.seed", "TDI window sampling seed"),
    ("evaluate.plot_day", "day plotted by evaluate (YYYY-MM-DD), auto = first day"),
    ("evaluate.plot_horizon", "horizon plotted by evaluate, auto = longest"),
    ("baseline.low_irradiance", "clear-sky level below which smart persistence falls back to persistence"),
    ("baseline.horizons", "comma-separated forecast horizons in minutes"),
    ("satellite.n_days", "days in the cloud-index rolling minimum"),
    ("satellite.min_denominator", "cloud-index denominator below which CI = 0"),
    ("satellite.cadence_min", "satellite image cadence"),
    ("pca.components", "principal components kept"),
    ("pca.standardize", "scale features to unit variance before PCA"),
    ("gmm.components", "mixture components"),
    ("gmm.seed", "initialization seed"),
    ("gmm.max_iterations", "EM iteration cap"),
    ("gmm.tolerance", "EM stop threshold on mean log-likelihood gain"),
    ("gmm.covariance_floor", "covariance eigenvalue floor"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_auto(key: &str, value: &str) -> Result<Option<f64>> {
    if value.trim().eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true|false, got {value:?}"))),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn auto(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".into(), |x| x.to_string())
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "site.latitude_deg" => self.site.latitude_deg = parse(key, v)?,
            "site.longitude_deg" => self.site.longitude_deg = parse(key, v)?,
            "site.altitude_m" => self.site.altitude_m = parse(key, v)?,
            "camera.width" => self.camera.width = parse(key, v)?,
            "camera.height" => self.camera.height = parse(key, v)?,
            "camera.center_x" => self.camera.center_x = parse_auto(key, v)?,
            "camera.center_y" => self.camera.center_y = parse_auto(key, v)?,
            "camera.radius_per_radian" => self.camera.radius_per_radian = parse_auto(key, v)?,
            "camera.max_zenith_deg" => self.camera.max_zenith_deg = parse(key, v)?,
            "camera.azimuth_offset_deg" => self.camera.azimuth_offset_deg = parse(key, v)?,
            "undistort.size" => self.undistort_size = parse(key, v)?,
            "segment.circumsolar_disk_diameter" => self.hyta.circumsolar_disk_diameter = parse(key, v)?,
            "segment.circumsolar_relaxation" => self.hyta.circumsolar_relaxation = parse(key, v)?,
            "segment.unimodality_std" => self.hyta.unimodality_std_threshold = parse(key, v)?,
            "segment.fixed_threshold" => self.hyta.fixed_threshold = parse(key, v)?,
            "segment.sun_fraction" => self.hyta.sun_fraction = parse(key, v)?,
            "segment.saturation_fraction" => self.hyta.saturation_fraction = parse(key, v)?,
            "suntrack.saturation_level" => self.detect.saturation_level = parse(key, v)?,
            "suntrack.area_min" => self.detect.area_min = parse(key, v)?,
            "suntrack.min_observations" => self.tracker.min_observations = parse(key, v)?,
            "suntrack.min_days" => self.tracker.min_days = parse(key, v)?,
            "suntrack.irls_iterations" => self.tracker.irls_iterations = parse(key, v)?,
            "suntrack.degree" => self.tracker.degree = parse(key, v)?,
            "suntrack.ridge" => self.tracker.ridge = parse(key, v)?,
            "suntrack.loss" => {
                self.tracker.loss = match v.trim().to_ascii_lowercase().as_str() {
                    "l1" => Loss::L1,
                    "l2" => Loss::L2,
                    _ => return Err(Error::Config(format!("{key}: expected l1|l2, got {v:?}"))),
                }
            }
            "index.min_elevation_deg" => self.index.min_elevation_deg = parse(key, v)?,
            "index.ghi_tolerance_s" => self.index.ghi_tolerance_s = parse(key, v)?,
            "index.cadence_min" => self.index.cadence_min = parse(key, v)?,
            "split.train_years" => self.split.train_years = parse_list(key, v)?,
            "split.eval_year" => self.split.eval_year = parse(key, v)?,
            "window.context_frames" => self.window.context_frames = parse(key, v)?,
            "window.horizon_frames" => self.window.horizon_frames = parse(key, v)?,
            "window.step_min" => self.window.step_min = parse(key, v)?,
            "window.input_mode" => self.window.input_mode = v.trim().parse()?,
            "window.target_mode" => self.window.target_mode = v.trim().parse()?,
            "window.geometry_mode" => self.window.geometry_mode = v.trim().parse()?,
            "window.exposure" => self.window.exposure = v.trim().parse()?,
            "window.size" => self.window.size = parse(key, v)?,
            "window.tolerance_s" => self.window.tolerance_s = parse(key, v)?,
            "metrics.windows" => self.protocol.windows = parse(key, v)?,
            "metrics.window_len" => self.protocol.window_len = parse(key, v)?,
            "metrics.step_min" => self.protocol.step_min = parse(key, v)?,
            "metrics.quantile" => self.protocol.quantile = parse(key, v)?,
            "metrics.seed" => self.protocol.seed = parse(key, v)?,
            "evaluate.plot_day" => {
                self.plot_day = if v.trim().eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(
                        NaiveDate::parse_from_str(v.trim(), "%Y-%m-%d")
                            .map_err(|_| Error::Config(format!("{key}: expected YYYY-MM-DD, got {v:?}")))?,
                    )
                }
            }
            "evaluate.plot_horizon" => {
                self.plot_horizon = if v.trim().eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "baseline.low_irradiance" => self.low_irradiance = parse(key, v)?,
            "baseline.horizons" => self.horizons = parse_list(key, v)?,
            "satellite.n_days" => self.cloud.n_days = parse(key, v)?,
            "satellite.min_denominator" => self.cloud.min_denominator = parse(key, v)?,
            "satellite.cadence_min" => self.satellite_cadence_min = parse(key, v)?,
            "pca.components" => self.pca_components = parse(key, v)?,
            "pca.standardize" => self.pca_standardize = parse_bool(key, v)?,
            "gmm.components" => self.gmm_components = parse(key, v)?,
            "gmm.seed" => self.gmm_seed = parse(key, v)?,
            "gmm.max_iterations" => self.gmm.max_iterations = parse(key, v)?,
            "gmm.tolerance" => self.gmm.tolerance = parse(key, v)?,
            "gmm.covariance_floor" => self.gmm.covariance_floor = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "site.latitude_deg" => self.site.latitude_deg.to_string(),
            "site.longitude_deg" => self.site.longitude_deg.to_string(),
            "site.altitude_m" => self.site.altitude_m.to_string(),
            "camera.width" => self.camera.width.to_string(),
            "camera.height" => self.camera.height.to_string(),
            "camera.center_x" => auto(self.camera.center_x),
            "camera.center_y" => auto(self.camera.center_y),
            "camera.radius_per_radian" => auto(self.camera.radius_per_radian),
            "camera.max_zenith_deg" => self.camera.max_zenith_deg.to_string(),
            "camera.azimuth_offset_deg" => self.camera.azimuth_offset_deg.to_string(),
            "undistort.size" => self.undistort_size.to_string(),
            "segment.circumsolar_disk_diameter" => self.hyta.circumsolar_disk_diameter.to_string(),
            "segment.circumsolar_relaxation" => self.hyta.circumsolar_relaxation.to_string(),
            "segment.unimodality_std" => self.hyta.unimodality_std_threshold.to_string(),
            "segment.fixed_threshold" => self.hyta.fixed_threshold.to_string(),
            "segment.sun_fraction" => self.hyta.sun_fraction.to_string(),
            "segment.saturation_fraction" => self.hyta.saturation_fraction.to_string(),
            "suntrack.saturation_level" => self.detect.saturation_level.to_string(),
            "suntrack.area_min" => self.detect.area_min.to_string(),
            "suntrack.min_observations" => self.tracker.min_observations.to_string(),
            "suntrack.min_days" => self.tracker.min_days.to_string(),
            "suntrack.irls_iterations" => self.tracker.irls_iterations.to_string(),
            "suntrack.degree" => self.tracker.degree.to_string(),
            "suntrack.ridge" => self.tracker.ridge.to_string(),
            "suntrack.loss" => match self.tracker.loss {
                Loss::L1 => "l1".into(),
                Loss::L2 => "l2".into(),
            },
            "index.min_elevation_deg" => self.index.min_elevation_deg.to_string(),
            "index.ghi_tolerance_s" => self.index.ghi_tolerance_s.to_string(),
            "index.cadence_min" => self.index.cadence_min.to_string(),
            "split.train_years" => join(&self.split.train_years),
            "split.eval_year" => self.split.eval_year.to_string(),
            "window.context_frames" => self.window.context_frames.to_string(),
            "window.horizon_frames" => self.window.horizon_frames.to_string(),
            "window.step_min" => self.window.step_min.to_string(),
            "window.input_mode" => self.window.input_mode.to_string(),
            "window.target_mode" => self.window.target_mode.to_string(),
            "window.geometry_mode" => self.window.geometry_mode.to_string(),
            "window.exposure" => self.window.exposure.to_string(),
            "window.size" => self.window.size.to_string(),
            "window.tolerance_s" => self.window.tolerance_s.to_string(),
            "metrics.windows" => self.protocol.windows.to_string(),
            "metrics.window_len" => self.protocol.window_len.to_string(),
            "metrics.step_min" => self.protocol.step_min.to_string(),
            "metrics.quantile" => self.protocol.quantile.to_string(),
            "metrics.seed" => self.protocol.seed.to_string(),
            "evaluate.plot_day" => self.plot_day.map_or_else(|| "auto".into(), |d| d.to_string()),
            "evaluate.plot_horizon" => self.plot_horizon.map_or_else(|| "auto".into(), |h| h.to_string()),
            "baseline.low_irradiance" => self.low_irradiance.to_string(),
            "baseline.horizons" => join(&self.horizons),
            "satellite.n_days" => self.cloud.n_days.to_string(),
            "satellite.min_denominator" => self.cloud.min_denominator.to_string(),
            "satellite.cadence_min" => self.satellite_cadence_min.to_string(),
            "pca.components" => self.pca_components.to_string(),
            "pca.standardize" => self.pca_standardize.to_string(),
            "gmm.components" => self.gmm_components.to_string(),
            "gmm.seed" => self.gmm_seed.to_string(),
            "gmm.max_iterations" => self.gmm.max_iterations.to_string(),
            "gmm.tolerance" => self.gmm.tolerance.to_string(),
            "gmm.covariance_floor" => self.gmm.covariance_floor.to_string(),
            _ => return None,
        })
    }

    /// Apply `key = value` lines.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Schema {
                path: origin.into(),
                line: i as u64 + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(k.trim(), v.trim()).map_err(|e| Error::Schema {
                path: origin.into(),
                line: i as u64 + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {assignment:?}")))?;
        self.set(k.trim(), v.trim())
    }

    /// Defaults, then the optional file, then overrides.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(p) = file {
            cfg.apply_text(&crate::io::read_to_string(p)?, &p.display().to_string())?;
        }
        for o in overrides {
            cfg.apply_override(o)?;
        }
        Ok(cfg)
    }

    /// All keys with their current values, in `key = value` form.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|(k, _)| format!("{k} = {}\n", self.get(k).expect("listed key")))
            .collect()
    }
}

/// Help text listing every key, its default and its meaning.
pub fn keys_help() -> String {
    let d = RunConfig::default();
    let width = KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from("Configuration keys (default in brackets):\n");
    for (k, desc) in KEYS {
        s.push_str(&format!("  {k:<width$}  [{}]  {desc}\n", d.get(k).expect("listed key")));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips() {
        let d = RunConfig::default();
        for (k, _) in KEYS {
            let v = d.get(k).unwrap_or_else(|| panic!("no getter for {k}"));
            let mut c = RunConfig::default();
            c.set(k, &v).unwrap_or_else(|e| panic!("{k}: {e}"));
            assert_eq!(c, d, "{k}");
        }
    }

    #[test]
    fn text_then_overrides() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nmetrics.seed = 7\nwindow.input_mode = rgbi  # trailing\n", "cfg")
            .unwrap();
        c.apply_override("metrics.seed=9").unwrap();
        assert_eq!(c.protocol.seed, 9);
        assert_eq!(c.window.input_mode, crate::dataset::InputMode::Rgbi);
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let err = RunConfig::default().apply_text("\nbogus = 1\n", "x.cfg").unwrap_err();
        assert!(matches!(err, Error::Schema { line: 2, .. }), "{err}");
        assert!(RunConfig::default().apply_override("nope=1").is_err());
    }

    #[test]
    fn help_lists_all_keys() {
        let h = keys_help();
        for (k, _) in KEYS {
            assert!(h.contains(k));
        }
        assert!(h.contains("[200]"));
    }

    #[test]
    fn dump_reloads() {
        let mut c = RunConfig::default();
        c.set("camera.center_x", "500.5").unwrap();
        let mut d = RunConfig::default();
        d.apply_text(&c.to_text(), "dump").unwrap();
        assert_eq!(c, d);
    }
}
