//! Sample indexing, the train/val/test split and window assembly.
//!
//! Frames are stored as exposure pairs named `<YYYYMMDDhhmm[ss]>_long.png`
//! and `<YYYYMMDDhhmm[ss]>_short.png`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, Utc};
use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::baseline::{solar_zenith, Site};
use crate::error::{Error, Result};
use crate::geometry::{undistort_image, undistort_labels, CameraModel};
use crate::io::{file_stem, list_files, write_atomic};
use crate::raster::crop_and_resize;
use crate::segmentation::{segment, HytaConfig, SegMap, SkyClass};
use crate::series::IrradianceSeries;
use crate::suntrack::SunTrajectoryModel;
use crate::table::BIN_RANGE_WM2;
use crate::timefmt;

pub const DEFAULT_MIN_ELEVATION_DEG: f64 = 10.0;
pub const DEFAULT_CADENCE_MIN: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub timestamp: DateTime<Utc>,
    pub long_path: PathBuf,
    pub short_path: PathBuf,
    pub ghi: f64,
    pub zenith_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleIndex {
    pub entries: Vec<SampleEntry>,
    pub cadence_min: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// ISO timestamp, or the file stem when the name carries none.
    pub timestamp: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub min_elevation_deg: f64,
    pub ghi_tolerance_s: i64,
    pub cadence_min: u32,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            min_elevation_deg: DEFAULT_MIN_ELEVATION_DEG,
            ghi_tolerance_s: 60,
            cadence_min: DEFAULT_CADENCE_MIN,
        }
    }
}

/// Sample counts per month, solar zenith (10° bins) and GHI (100 W/m² bins,
/// last bin open-ended).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histograms {
    pub month: [u64; 12],
    pub zenith: [u64; 9],
    pub ghi: [u64; 14],
}

impl Histograms {
    pub fn from_entries(entries: &[SampleEntry]) -> Self {
        let mut h = Histograms {
            month: [0; 12],
            zenith: [0; 9],
            ghi: [0; 14],
        };
        for e in entries {
            h.month[e.timestamp.month0() as usize] += 1;
            h.zenith[((e.zenith_deg / 10.0).floor().max(0.0) as usize).min(8)] += 1;
            h.ghi[((e.ghi / 100.0).floor().max(0.0) as usize).min(13)] += 1;
        }
        h
    }

    /// Rows `histogram,bin_lo,bin_hi,count`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("histogram,bin_lo,bin_hi,count\n");
        for (m, c) in self.month.iter().enumerate() {
            s.push_str(&format!("month,{},{},{c}\n", m + 1, m + 1));
        }
        for (b, c) in self.zenith.iter().enumerate() {
            s.push_str(&format!("zenith_deg,{},{},{c}\n", b * 10, b * 10 + 10));
        }
        for (b, c) in self.ghi.iter().enumerate() {
            let hi = if b == 13 { "inf".to_string() } else { (b * 100 + 100).to_string() };
            s.push_str(&format!("ghi_wm2,{},{hi},{c}\n", b * 100));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexBuild {
    pub index: SampleIndex,
    pub rejects: Vec<Reject>,
    pub histograms: Histograms,
}

pub fn rejects_csv(rejects: &[Reject]) -> String {
    let mut s = String::from("timestamp,reason\n");
    for r in rejects {
        s.push_str(&format!("{},{}\n", r.timestamp, r.reason));
    }
    s
}

/// Elevation filter; samples exactly at the threshold are kept.
pub fn elevation_ok(elevation_deg: f64, min_elevation_deg: f64) -> bool {
    elevation_deg >= min_elevation_deg
}

#[derive(Default)]
struct Pair {
    long: Option<PathBuf>,
    short: Option<PathBuf>,
}

/// Join exposure pairs in `image_dir` to the irradiance series.
pub fn build_index(image_dir: &Path, irradiance: &IrradianceSeries, site: &Site, cfg: &IndexConfig) -> Result<IndexBuild> {
    let mut pairs: BTreeMap<DateTime<Utc>, Pair> = BTreeMap::new();
    let mut rejects = Vec::new();
    for p in list_files(image_dir, "png")? {
        let stem = file_stem(&p);
        let parsed = stem
            .rsplit_once('_')
            .and_then(|(ts, kind)| timefmt::parse_compact(ts).map(|t| (t, kind.to_ascii_lowercase())));
        match parsed {
            Some((t, kind)) if kind == "long" => pairs.entry(t).or_default().long = Some(p),
            Some((t, kind)) if kind == "short" => pairs.entry(t).or_default().short = Some(p),
            _ => rejects.push(Reject {
                timestamp: stem,
                reason: "bad_name".into(),
            }),
        }
    }

    let tolerance = Duration::seconds(cfg.ghi_tolerance_s);
    let mut entries = Vec::new();
    for (t, pair) in pairs {
        let reject = |reason: &str| Reject {
            timestamp: timefmt::format_iso(&t),
            reason: reason.into(),
        };
        let (long_path, short_path) = match (pair.long, pair.short) {
            (Some(l), Some(s)) => (l, s),
            (None, _) => {
                rejects.push(reject("no_long"));
                continue;
            }
            (_, None) => {
                rejects.push(reject("no_short"));
                continue;
            }
        };
        let Some((_, ghi)) = irradiance.nearest(t, tolerance) else {
            rejects.push(reject("no_ghi"));
            continue;
        };
        let zenith_deg = solar_zenith(&t, site.latitude_deg, site.longitude_deg);
        if !elevation_ok(90.0 - zenith_deg, cfg.min_elevation_deg) {
            rejects.push(reject("low_sun"));
            continue;
        }
        entries.push(SampleEntry {
            timestamp: t,
            long_path,
            short_path,
            ghi,
            zenith_deg,
        });
    }
    let histograms = Histograms::from_entries(&entries);
    Ok(IndexBuild {
        index: SampleIndex {
            entries,
            cadence_min: cfg.cadence_min,
        },
        rejects,
        histograms,
    })
}

impl SampleIndex {
    pub fn new(mut entries: Vec<SampleEntry>, cadence_min: u32) -> Result<Self> {
        entries.sort_by_key(|e| e.timestamp);
        if let Some(w) = entries.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
            return Err(Error::Domain(format!("duplicate entry at {}", timefmt::format_iso(&w[0].timestamp))));
        }
        Ok(Self { entries, cadence_min })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry nearest to `t` within `tolerance`.
    pub fn find(&self, t: DateTime<Utc>, tolerance: Duration) -> Option<&SampleEntry> {
        let k = self.entries.partition_point(|e| e.timestamp < t);
        [k.checked_sub(1), Some(k)]
            .into_iter()
            .flatten()
            .filter_map(|i| self.entries.get(i))
            .filter(|e| (e.timestamp - t).abs() <= tolerance)
            .min_by_key(|e| (e.timestamp - t).abs())
    }

    /// CSV `timestamp_iso,long_path,short_path,ghi_wm2,sza_deg`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("timestamp_iso,long_path,short_path,ghi_wm2,sza_deg\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                timefmt::format_iso(&e.timestamp),
                e.long_path.display(),
                e.short_path.display(),
                e.ghi,
                e.zenith_deg
            ));
        }
        s
    }

    pub fn parse_csv(text: &str, origin: &str, cadence_min: u32) -> Result<Self> {
        let schema = |line: u64, message: String| Error::Schema {
            path: origin.into(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "timestamp_iso,long_path,short_path,ghi_wm2,sza_deg" => {}
            _ => return Err(schema(1, "expected header timestamp_iso,long_path,short_path,ghi_wm2,sza_deg".into())),
        }
        let mut entries = Vec::new();
        for (i, line) in lines {
            let n = i as u64 + 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(schema(n, format!("expected 5 fields, found {}", f.len())));
            }
            let num = |s: &str, what: &str| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| schema(n, format!("bad {what} {s:?}")))
            };
            entries.push(SampleEntry {
                timestamp: timefmt::parse_iso(f[0]).map_err(|m| schema(n, m))?,
                long_path: PathBuf::from(f[1]),
                short_path: PathBuf::from(f[2]),
                ghi: num(f[3], "ghi")?,
                zenith_deg: num(f[4], "zenith")?,
            });
        }
        Self::new(entries, cadence_min)
    }

    pub fn read_csv(path: &Path, cadence_min: u32) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        Self::parse_csv(&text, &path.display().to_string(), cadence_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
    /// Outside the configured years.
    Unassigned,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
            SplitName::Unassigned => "unassigned",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_years: Vec<i32>,
    pub eval_year: i32,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_years: vec![2017, 2018],
            eval_year: 2019,
        }
    }
}

/// Training years go to train; in the evaluation year even days of the
/// month go to validation and odd days to test.
pub fn assign_split(t: &DateTime<Utc>, cfg: &SplitConfig) -> SplitName {
    if cfg.train_years.contains(&t.year()) {
        SplitName::Train
    } else if t.year() == cfg.eval_year {
        if t.day() % 2 == 0 {
            SplitName::Val
        } else {
            SplitName::Test
        }
    } else {
        SplitName::Unassigned
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<SampleEntry>,
    pub val: Vec<SampleEntry>,
    pub test: Vec<SampleEntry>,
    pub unassigned: Vec<SampleEntry>,
}

pub fn split(index: &SampleIndex, cfg: &SplitConfig) -> Split {
    let mut out = Split::default();
    for e in &index.entries {
        let bucket = match assign_split(&e.timestamp, cfg) {
            SplitName::Train => &mut out.train,
            SplitName::Val => &mut out.val,
            SplitName::Test => &mut out.test,
            SplitName::Unassigned => &mut out.unassigned,
        };
        bucket.push(e.clone());
    }
    out
}

/// CSV `timestamp_iso,split`.
pub fn split_csv(index: &SampleIndex, cfg: &SplitConfig) -> String {
    let mut s = String::from("timestamp_iso,split\n");
    for e in &index.entries {
        s.push_str(&format!(
            "{},{}\n",
            timefmt::format_iso(&e.timestamp),
            assign_split(&e.timestamp, cfg).as_str()
        ));
    }
    s
}

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub const NAMES: &'static [&'static str] = &[$($text),+];
        }
        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $text),+ })
            }
        }
        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::Config(format!(
                        "unknown {} {s:?}, expected one of {}",
                        stringify!($name),
                        $name::NAMES.join("|")
                    ))),
                }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputMode {
    Rgb,
    Rgbi,
}
string_enum!(InputMode { Rgb => "rgb", Rgbi => "rgbi" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetMode {
    Absolute,
    Change,
}
string_enum!(TargetMode { Absolute => "absolute", Change => "change" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryMode {
    Distorted,
    Undistorted,
}
string_enum!(GeometryMode { Distorted => "distorted", Undistorted => "undistorted" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exposure {
    Long,
    Short,
}
string_enum!(Exposure { Long => "long", Short => "short" });

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub context_frames: usize,
    pub horizon_frames: usize,
    pub step_min: u32,
    pub input_mode: InputMode,
    pub target_mode: TargetMode,
    pub geometry_mode: GeometryMode,
    pub exposure: Exposure,
    /// Side of the square model input.
    pub size: u32,
    /// Allowed deviation of a frame from its nominal time.
    pub tolerance_s: i64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            context_frames: 5,
            horizon_frames: 5,
            step_min: 2,
            input_mode: InputMode::Rgb,
            target_mode: TargetMode::Absolute,
            geometry_mode: GeometryMode::Undistorted,
            exposure: Exposure::Long,
            size: 128,
            tolerance_s: 15,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.context_frames == 0 || self.horizon_frames == 0 {
            return Err(Error::Config("context and horizon frame counts must be at least 1".into()));
        }
        if self.step_min == 0 || self.size == 0 {
            return Err(Error::Config("step and size must be positive".into()));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        match self.input_mode {
            InputMode::Rgb => 3,
            InputMode::Rgbi => 4,
        }
    }
}

/// Supplies decoded exposures for index entries.
pub trait FrameSource {
    fn load(&self, entry: &SampleEntry, exposure: Exposure) -> Result<RgbImage>;
}

/// Reads PNGs from the paths recorded in the index.
pub struct FsFrameSource;

impl FrameSource for FsFrameSource {
    fn load(&self, entry: &SampleEntry, exposure: Exposure) -> Result<RgbImage> {
        let path = match exposure {
            Exposure::Long => &entry.long_path,
            Exposure::Short => &entry.short_path,
        };
        Ok(image::open(path)?.into_rgb8())
    }
}

pub struct WindowContext<'a> {
    pub camera: &'a CameraModel,
    pub source: &'a dyn FrameSource,
    /// When set, horizon frames are segmented with sun positions from this
    /// model.
    pub segmentation: Option<(&'a SunTrajectoryModel, HytaConfig)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub issue_time: DateTime<Utc>,
    pub ghi_t: f64,
    /// `context_frames x channels x size x size`, values in `[0, 1]`.
    pub input: Vec<f32>,
    pub channels: usize,
    pub size: u32,
    pub target_times: Vec<DateTime<Utc>>,
    pub targets: Vec<f64>,
    pub target_mode: TargetMode,
    pub segmaps: Vec<SegMap>,
}

fn nominal_times(t: DateTime<Utc>, spec: &WindowSpec) -> (Vec<DateTime<Utc>>, Vec<DateTime<Utc>>) {
    let step = Duration::minutes(spec.step_min as i64);
    let context = (0..spec.context_frames)
        .map(|k| t - step * (spec.context_frames - 1 - k) as i32)
        .collect();
    let horizon = (1..=spec.horizon_frames).map(|i| t + step * i as i32).collect();
    (context, horizon)
}

/// Resolve every frame of the window, or name the first missing one.
pub fn window_entries<'a>(
    index: &'a SampleIndex,
    t: DateTime<Utc>,
    spec: &WindowSpec,
) -> Result<(Vec<&'a SampleEntry>, Vec<&'a SampleEntry>)> {
    spec.validate()?;
    let (ctx, hor) = nominal_times(t, spec);
    let tol = Duration::seconds(spec.tolerance_s);
    let day = t.date_naive();
    let resolve = |times: &[DateTime<Utc>]| -> Result<Vec<&'a SampleEntry>> {
        times
            .iter()
            .map(|nt| {
                if nt.date_naive() != day {
                    return Err(Error::Gap(format!("{} (crosses the day boundary)", timefmt::format_iso(nt))));
                }
                index.find(*nt, tol).ok_or_else(|| Error::Gap(timefmt::format_iso(nt)))
            })
            .collect()
    };
    Ok((resolve(&ctx)?, resolve(&hor)?))
}

fn crop_labels(map: &SegMap, size: u32) -> SegMap {
    let side = map.width.min(map.height);
    let (x0, y0) = ((map.width - side) / 2, (map.height - side) / 2);
    let mut out = SegMap::filled(size, size, SkyClass::Frame);
    let scale = side as f64 / size as f64;
    for j in 0..size {
        for i in 0..size {
            let sx = ((i as f64 + 0.5) * scale - 0.5).round().clamp(0.0, (side - 1) as f64) as u32;
            let sy = ((j as f64 + 0.5) * scale - 0.5).round().clamp(0.0, (side - 1) as f64) as u32;
            out.set(i, j, map.get(x0 + sx, y0 + sy));
        }
    }
    out
}

/// Irradiance-channel value for a frame.
pub fn irradiance_plane_value(ghi: f64) -> f32 {
    (ghi / BIN_RANGE_WM2) as f32
}

pub fn assemble_window(index: &SampleIndex, t: DateTime<Utc>, spec: &WindowSpec, ctx: &WindowContext) -> Result<Window> {
    let (context, horizon) = window_entries(index, t, spec)?;
    let current = context.last().expect("at least one context frame");
    let ghi_t = current.ghi;
    let size = spec.size;
    let plane = size as usize * size as usize;
    let channels = spec.channels();
    let mut input = Vec::with_capacity(context.len() * channels * plane);
    for e in &context {
        let raw = ctx.source.load(e, spec.exposure)?;
        let img = match spec.geometry_mode {
            GeometryMode::Undistorted => undistort_image(&raw, ctx.camera, (size, size))?,
            GeometryMode::Distorted => crop_and_resize(&raw, size),
        };
        for c in 0..3 {
            input.extend(img.pixels().map(|p| p.0[c] as f32 / 255.0));
        }
        if spec.input_mode == InputMode::Rgbi {
            input.extend(std::iter::repeat(irradiance_plane_value(e.ghi)).take(plane));
        }
    }

    let targets = horizon
        .iter()
        .map(|e| match spec.target_mode {
            TargetMode::Absolute => e.ghi,
            TargetMode::Change => e.ghi - ghi_t,
        })
        .collect();

    let mut segmaps = Vec::new();
    if let Some((model, hyta)) = &ctx.segmentation {
        for e in &horizon {
            let long = ctx.source.load(e, Exposure::Long)?;
            let short = ctx.source.load(e, Exposure::Short)?;
            let sun = model.sun_position(&e.timestamp).ok();
            let seg = segment(&long, &short, sun, hyta)?;
            segmaps.push(match spec.geometry_mode {
                GeometryMode::Undistorted => undistort_labels(&seg.map, ctx.camera, (size, size))?,
                GeometryMode::Distorted => crop_labels(&seg.map, size),
            });
        }
    }

    Ok(Window {
        issue_time: current.timestamp,
        ghi_t,
        input,
        channels,
        size,
        target_times: horizon.iter().map(|e| e.timestamp).collect(),
        targets,
        target_mode: spec.target_mode,
        segmaps,
    })
}

impl Window {
    pub fn frames(&self) -> usize {
        self.input.len() / (self.channels * self.size as usize * self.size as usize)
    }

    /// Header + f32 payload in the latent matrix format, one row per frame.
    pub fn input_bytes(&self) -> Vec<u8> {
        let frames = self.frames();
        let cols = self.input.len() / frames.max(1);
        let mut out = Vec::with_capacity(crate::latent::HEADER_LEN + self.input.len() * 4);
        out.extend_from_slice(crate::latent::MAGIC);
        for v in [frames as u32, cols as u32, self.channels as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.input {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// CSV `horizon_index,target_time_iso,target_mode,value,ghi_t`.
    pub fn targets_csv(&self) -> String {
        let mut s = String::from("horizon_index,target_time_iso,target_mode,value,ghi_t\n");
        for (i, (t, v)) in self.target_times.iter().zip(&self.targets).enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                timefmt::format_iso(t),
                self.target_mode,
                v,
                self.ghi_t
            ));
        }
        s
    }

    /// Writes `<stem>_input.bin`, `<stem>_targets.csv` and one
    /// `<stem>_seg<i>.png` per horizon frame; returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let stem = timefmt::format_compact(&self.issue_time);
        let mut written = Vec::new();
        let p = dir.join(format!("{stem}_input.bin"));
        write_atomic(&p, &self.input_bytes())?;
        written.push(p);
        let p = dir.join(format!("{stem}_targets.csv"));
        write_atomic(&p, self.targets_csv().as_bytes())?;
        written.push(p);
        for (i, m) in self.segmaps.iter().enumerate() {
            let p = dir.join(format!("{stem}_seg{}.png", i + 1));
            m.write_png(&p)?;
            written.push(p);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use std::collections::HashMap;

    #[test]
    fn split_examples() {
        let cfg = SplitConfig::default();
        let d = |y, m, day| Utc.with_ymd_and_hms(y, m, day, 12, 0, 0).unwrap();
        assert_eq!(assign_split(&d(2019, 3, 4), &cfg), SplitName::Val);
        assert_eq!(assign_split(&d(2019, 3, 5), &cfg), SplitName::Test);
        assert_eq!(assign_split(&d(2018, 7, 3), &cfg), SplitName::Train);
        assert_eq!(assign_split(&d(2020, 1, 2), &cfg), SplitName::Unassigned);
    }

    #[test]
    fn elevation_threshold() {
        assert!(!elevation_ok(9.9, 10.0));
        assert!(elevation_ok(10.0, 10.0));
    }

    #[test]
    fn enum_parsing() {
        assert_eq!("RGBI".parse::<InputMode>().unwrap(), InputMode::Rgbi);
        assert_eq!(TargetMode::Change.to_string(), "change");
        assert!("sideways".parse::<GeometryMode>().is_err());
    }

    struct Solid(HashMap<DateTime<Utc>, u8>);

    impl FrameSource for Solid {
        fn load(&self, e: &SampleEntry, _: Exposure) -> Result<RgbImage> {
            let v = self.0[&e.timestamp];
            Ok(RgbImage::from_pixel(8, 6, image::Rgb([v, v, v])))
        }
    }

    fn entry(t: DateTime<Utc>, ghi: f64) -> SampleEntry {
        SampleEntry {
            timestamp: t,
            long_path: "l.png".into(),
            short_path: "s.png".into(),
            ghi,
            zenith_deg: 40.0,
        }
    }

    #[test]
    fn window_targets_and_irradiance_plane() {
        let t0 = Utc.with_ymd_and_hms(2019, 6, 1, 10, 0, 0).unwrap();
        let entries: Vec<_> = (0..10)
            .map(|k| entry(t0 + Duration::minutes(2 * k) + Duration::seconds(k % 3 * 5), 600.0 + 10.0 * k as f64))
            .collect();
        let src = Solid(entries.iter().enumerate().map(|(k, e)| (e.timestamp, 20 * k as u8)).collect());
        let index = SampleIndex::new(entries, 2).unwrap();
        let cam = CameraModel::centered(8, 6);
        let ctx = WindowContext {
            camera: &cam,
            source: &src,
            segmentation: None,
        };
        let mut spec = WindowSpec {
            context_frames: 3,
            horizon_frames: 2,
            input_mode: InputMode::Rgbi,
            geometry_mode: GeometryMode::Distorted,
            size: 4,
            ..WindowSpec::default()
        };
        let t = t0 + Duration::minutes(4);
        let abs = assemble_window(&index, t, &spec, &ctx).unwrap();
        assert_eq!(abs.frames(), 3);
        assert_eq!(abs.input.len(), 3 * 4 * 16);
        assert_eq!(abs.targets, vec![630.0, 640.0]);
        assert!(abs.input[48..64].iter().all(|&v| v == (600.0 / 1300.0) as f32));
        spec.target_mode = TargetMode::Change;
        let chg = assemble_window(&index, t, &spec, &ctx).unwrap();
        for (a, c) in abs.targets.iter().zip(&chg.targets) {
            assert_eq!(*a, c + abs.ghi_t);
        }
        assert_eq!(abs.input, chg.input);

        let late = t0 + Duration::minutes(18);
        assert!(matches!(assemble_window(&index, late, &spec, &ctx), Err(Error::Gap(m)) if m.contains("10:20:00")));
    }

    #[test]
    fn irradiance_channel_scaling() {
        assert_eq!(irradiance_plane_value(650.0), 0.5);
    }
}
