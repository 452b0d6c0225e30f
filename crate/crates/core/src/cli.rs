//! Command-line front end. Exit codes: 0 success, 1 partial failure,
//! 2 usage, configuration or schema error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, TimeZone, Timelike, Utc};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use image::DynamicImage;
use serde::Serialize;

use crate::baseline::{smart_persistence_table, ClearSkySource};
use crate::config::{keys_help, RunConfig};
use crate::dataset::{
    assemble_window, build_index, rejects_csv, split_csv, FsFrameSource, SampleIndex, WindowContext,
};
use crate::error::{Error, Result};
use crate::geometry::undistort_image;
use crate::io::{file_stem, list_files, write_atomic};
use crate::latent::{gmm_fit, pca_fit, pca_project, scores_csv, StateMatrix};
use crate::metrics::evaluate_run;
use crate::plot::{line_chart, Series};
use crate::satellite::{cloud_index, load_stack};
use crate::segmentation::{segment, SkyClass};
use crate::series::IrradianceSeries;
use crate::suntrack::{
    detect_sun, fit_trajectory, read_observations, tracking_error, write_observations, SunObservation,
    SunTrajectoryModel,
};
use crate::table::ForecastTable;
use crate::timefmt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "skycast", version, about = "Sky-image solar nowcasting toolkit")]
pub struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resample fisheye images onto the ground-parallel plane.
    Undistort(DirPair),
    /// Segment exposure pairs into sky, cloud, sun, saturation and frame.
    Segment {
        #[command(flatten)]
        dirs: DirPair,
        /// Sun trajectory model used for sun positions; otherwise the sun is
        /// detected in each short exposure.
        #[arg(long, value_name = "JSON")]
        suntrack_model: Option<PathBuf>,
    },
    /// Score a forecast table against a reference forecast.
    Evaluate(EvaluateArgs),
    /// Smart-persistence forecast table from measured irradiance.
    Baseline {
        #[arg(long, value_name = "CSV")]
        truth: PathBuf,
        /// Clear-sky GHI series; the analytic model is used otherwise.
        #[arg(long, value_name = "CSV")]
        clear_sky: Option<PathBuf>,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },
    /// Cloud-index maps from a directory of greyscale satellite images.
    Cloudindex {
        #[command(flatten)]
        dirs: DirPair,
        /// Only this instant (ISO 8601); all frames otherwise.
        #[arg(long)]
        time: Option<String>,
    },
    /// Sun detection, trajectory fitting and prediction.
    #[command(subcommand)]
    Suntrack(SuntrackCommand),
    /// PCA of a state matrix plus mixture clustering of the first two scores.
    Pca {
        #[arg(long, value_name = "BIN")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        output: PathBuf,
        /// Skip the mixture clustering.
        #[arg(long)]
        no_gmm: bool,
    },
    /// Sample index, split and window assembly.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Print the effective configuration.
    Config,
}

#[derive(Debug, Args)]
pub struct DirPair {
    #[arg(long, value_name = "DIR")]
    pub input: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Forecast table to score.
    #[arg(long, value_name = "CSV")]
    pub pred: PathBuf,
    /// Reference forecast table (usually smart persistence).
    #[arg(long, value_name = "CSV", required_unless_present = "truth")]
    pub reference: Option<PathBuf>,
    /// Measured GHI; the smart-persistence reference is built from it when
    /// no reference table is given.
    #[arg(long, value_name = "CSV")]
    pub truth: Option<PathBuf>,
    /// Clear-sky GHI for the built reference; the analytic model otherwise.
    #[arg(long, value_name = "CSV", requires = "truth")]
    pub clear_sky: Option<PathBuf>,
    /// Directory receiving report.json, report.csv and plot.svg.
    #[arg(long, value_name = "DIR")]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SuntrackCommand {
    /// Detect the sun in short exposures (`*_short.png`, or any timestamped PNG).
    Detect {
        #[arg(long, value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },
    /// Fit the per-minute trajectory model to observations.
    Fit {
        #[arg(long, value_name = "CSV")]
        observations: PathBuf,
        /// Image width in pixels, used to express errors relative to width.
        #[arg(long)]
        width: u32,
        #[arg(long, value_name = "JSON")]
        out: PathBuf,
    },
    /// Minute-by-minute positions for one day.
    Predict {
        #[arg(long, value_name = "JSON")]
        model: PathBuf,
        #[arg(long, value_name = "YYYY-MM-DD")]
        date: String,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Join exposure pairs to measured GHI and filter low sun.
    Index {
        #[arg(long, value_name = "DIR")]
        images: PathBuf,
        #[arg(long, value_name = "CSV")]
        irradiance: PathBuf,
        #[arg(long, value_name = "DIR")]
        output: PathBuf,
    },
    /// Assign index entries to train, val and test.
    Split {
        #[arg(long, value_name = "CSV")]
        index: PathBuf,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },
    /// Assemble and write every complete window of the index.
    Windows {
        #[arg(long, value_name = "CSV")]
        index: PathBuf,
        #[arg(long, value_name = "DIR")]
        output: PathBuf,
        /// Also write horizon segmentations using this sun model.
        #[arg(long, value_name = "JSON")]
        suntrack_model: Option<PathBuf>,
    },
}

#[derive(Debug, Default, Serialize)]
pub struct Manifest {
    pub command: String,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize)]
pub struct ManifestEntry {
    pub input: String,
    pub output: Option<String>,
    pub status: &'static str,
    pub reason: Option<String>,
}

impl Manifest {
    fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            entries: Vec::new(),
        }
    }

    fn ok(&mut self, input: impl Into<String>, output: &Path) {
        self.entries.push(ManifestEntry {
            input: input.into(),
            output: Some(output.display().to_string()),
            status: "ok",
            reason: None,
        });
    }

    fn fail(&mut self, input: impl Into<String>, status: &'static str, reason: impl Into<String>) {
        self.entries.push(ManifestEntry {
            input: input.into(),
            output: None,
            status,
            reason: Some(reason.into()),
        });
    }

    fn write(&self, dir: &Path) -> Result<i32> {
        write_atomic(&dir.join("manifest.json"), serde_json::to_string_pretty(self)?.as_bytes())?;
        let bad = self.entries.iter().filter(|e| e.status != "ok").count();
        println!("{}: {} ok, {bad} not processed", self.command, self.entries.len() - bad);
        Ok(if bad == 0 { EXIT_OK } else { EXIT_PARTIAL })
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Schema { .. } | Error::Config(_) | Error::Join { .. } => EXIT_USAGE,
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => EXIT_USAGE,
        _ => EXIT_PARTIAL,
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cmd = Cli::command().after_long_help(keys_help()).after_help(keys_help());
    let cli = match cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let cfg = match RunConfig::load(cli.config.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match dispatch(&cli.command, &cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<i32> {
    match cmd {
        Command::Undistort(d) => cmd_undistort(&d.input, &d.output, cfg),
        Command::Segment { dirs, suntrack_model } => cmd_segment(&dirs.input, &dirs.output, suntrack_model.as_deref(), cfg),
        Command::Evaluate(a) => cmd_evaluate(a, cfg),
        Command::Baseline { truth, clear_sky, out } => cmd_baseline(truth, clear_sky.as_deref(), out, cfg),
        Command::Cloudindex { dirs, time } => cmd_cloudindex(&dirs.input, &dirs.output, time.as_deref(), cfg),
        Command::Suntrack(s) => cmd_suntrack(s, cfg),
        Command::Pca { input, output, no_gmm } => cmd_pca(input, output, !no_gmm, cfg),
        Command::Dataset(d) => cmd_dataset(d, cfg),
        Command::Config => {
            print!("{}", cfg.to_text());
            Ok(EXIT_OK)
        }
    }
}

fn encode_png(img: &DynamicImage) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)?;
    Ok(buf.into_inner())
}

fn undistort_one(path: &Path, cfg: &RunConfig) -> Result<Vec<u8>> {
    let cam = cfg.camera.model()?;
    let size = (cfg.undistort_size, cfg.undistort_size);
    let img = image::open(path)?;
    let out = match img {
        DynamicImage::ImageRgb16(i) => DynamicImage::ImageRgb16(undistort_image(&i, &cam, size)?),
        DynamicImage::ImageLuma8(i) => DynamicImage::ImageLuma8(undistort_image(&i, &cam, size)?),
        DynamicImage::ImageLuma16(i) => DynamicImage::ImageLuma16(undistort_image(&i, &cam, size)?),
        other => DynamicImage::ImageRgb8(undistort_image(&other.to_rgb8(), &cam, size)?),
    };
    encode_png(&out)
}

pub fn cmd_undistort(input: &Path, output: &Path, cfg: &RunConfig) -> Result<i32> {
    cfg.camera.model()?;
    let files = list_files(input, "png")?;
    std::fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
    let mut manifest = Manifest::new("undistort");
    for f in files {
        let name = f.file_name().expect("listed file").to_os_string();
        let dst = output.join(&name);
        match undistort_one(&f, cfg).and_then(|bytes| write_atomic(&dst, &bytes)) {
            Ok(()) => manifest.ok(f.display().to_string(), &dst),
            Err(e) => manifest.fail(f.display().to_string(), "error", e.to_string()),
        }
    }
    manifest.write(output)
}

fn exposure_pairs(dir: &Path) -> Result<std::collections::BTreeMap<String, (Option<PathBuf>, Option<PathBuf>)>> {
    let mut pairs: std::collections::BTreeMap<String, (Option<PathBuf>, Option<PathBuf>)> = Default::default();
    for p in list_files(dir, "png")? {
        let stem = file_stem(&p);
        if let Some(s) = stem.strip_suffix("_long") {
            pairs.entry(s.to_string()).or_default().0 = Some(p);
        } else if let Some(s) = stem.strip_suffix("_short") {
            pairs.entry(s.to_string()).or_default().1 = Some(p);
        }
    }
    Ok(pairs)
}

pub fn cmd_segment(input: &Path, output: &Path, model: Option<&Path>, cfg: &RunConfig) -> Result<i32> {
    cfg.hyta.validate()?;
    let model = match model {
        Some(p) => Some(SunTrajectoryModel::from_json(&crate::io::read_to_string(p)?)?),
        None => None,
    };
    let pairs = exposure_pairs(input)?;
    std::fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
    let mut manifest = Manifest::new("segment");
    let mut hist = String::from("image,");
    hist.push_str(&SkyClass::ALL.map(SkyClass::name).join(","));
    hist.push('\n');
    for (stem, pair) in pairs {
        let (long, short) = match pair {
            (Some(l), Some(s)) => (l, s),
            (None, _) => {
                manifest.fail(stem, "skipped", "no_long");
                continue;
            }
            (_, None) => {
                manifest.fail(stem, "skipped", "no_short");
                continue;
            }
        };
        let result = (|| -> Result<(PathBuf, [u64; 5])> {
            let l = image::open(&long)?.to_rgb8();
            let s = image::open(&short)?.to_rgb8();
            let t = timefmt::parse_compact(&stem);
            let sun = match (&model, t) {
                (Some(m), Some(t)) => m.sun_position(&t).ok(),
                _ => detect_sun(&s, t.unwrap_or_default(), &cfg.detect).position,
            };
            let seg = segment(&l, &s, sun, &cfg.hyta)?;
            let dst = output.join(format!("{stem}_seg.png"));
            seg.map.write_png(&dst)?;
            Ok((dst, seg.map.histogram()))
        })();
        match result {
            Ok((dst, h)) => {
                let mut row = Vec::new();
                crate::segmentation::write_histogram_row(&mut row, &stem, &h).expect("in-memory write");
                hist.push_str(&String::from_utf8_lossy(&row));
                manifest.ok(stem, &dst);
            }
            Err(e) => manifest.fail(stem, "error", e.to_string()),
        }
    }
    write_atomic(&output.join("histograms.csv"), hist.as_bytes())?;
    manifest.write(output)
}

fn clear_sky_source(path: Option<&Path>, cfg: &RunConfig) -> Result<ClearSkySource> {
    Ok(match path {
        Some(p) => ClearSkySource::series(IrradianceSeries::read_csv(p)?),
        None => ClearSkySource::Analytic(cfg.site),
    })
}

pub fn cmd_baseline(truth: &Path, clear: Option<&Path>, out: &Path, cfg: &RunConfig) -> Result<i32> {
    let series = IrradianceSeries::read_csv(truth)?;
    let src = clear_sky_source(clear, cfg)?;
    let table = smart_persistence_table(&series, &src, &cfg.horizons, Duration::seconds(30), cfg.low_irradiance)?;
    table.write_csv(out)?;
    println!("baseline: {} rows", table.rows.len());
    Ok(EXIT_OK)
}

pub fn cmd_evaluate(a: &EvaluateArgs, cfg: &RunConfig) -> Result<i32> {
    let pred = ForecastTable::read_csv(&a.pred)?;
    let reference = match (&a.reference, &a.truth) {
        (Some(r), _) => ForecastTable::read_csv(r)?,
        (None, Some(t)) => {
            let series = IrradianceSeries::read_csv(t)?;
            let src = clear_sky_source(a.clear_sky.as_deref(), cfg)?;
            let full = smart_persistence_table(&series, &src, &pred.horizons(), Duration::seconds(30), cfg.low_irradiance)?;
            let keys: std::collections::BTreeSet<_> = pred.rows.iter().map(|r| r.key()).collect();
            ForecastTable::new(full.rows.into_iter().filter(|r| keys.contains(&r.key())).collect())
        }
        (None, None) => return Err(Error::Config("either --reference or --truth is required".into())),
    };
    let report = evaluate_run(&pred, &reference, &cfg.protocol)?;
    write_atomic(&a.output.join("report.json"), report.to_json()?.as_bytes())?;
    write_atomic(&a.output.join("report.csv"), report.to_csv().as_bytes())?;
    write_atomic(&a.output.join("plot.svg"), day_plot(&pred, &reference, cfg).as_bytes())?;
    print!("{}", report.to_csv());
    Ok(EXIT_OK)
}

/// Forecast, target and reference for one day and horizon, against the
/// target time in hours UTC.
fn day_plot(pred: &ForecastTable, reference: &ForecastTable, cfg: &RunConfig) -> String {
    let horizon = cfg.plot_horizon.or_else(|| pred.horizons().last().copied()).unwrap_or(0);
    let day: Option<NaiveDate> = cfg
        .plot_day
        .or_else(|| pred.rows.iter().map(|r| r.issue_time.date_naive()).min());
    let hours = |t: &chrono::DateTime<Utc>| t.num_seconds_from_midnight() as f64 / 3600.0;
    let select = |tab: &ForecastTable| -> Vec<(f64, f64, f64)> {
        tab.horizon_rows(horizon)
            .into_iter()
            .filter(|r| Some(r.target_time().date_naive()) == day)
            .map(|r| (hours(&r.target_time()), r.y_true, r.y_pred))
            .collect()
    };
    let p = select(pred);
    let r = select(reference);
    let title = format!(
        "{}-min ahead forecasts, {}",
        horizon,
        day.map_or_else(|| "no data".into(), |d| d.to_string())
    );
    line_chart(
        &title,
        "time of day (h, UTC)",
        "GHI (W/m²)",
        &[
            Series::new("target", "black", p.iter().map(|v| (v.0, v.1)).collect()),
            Series::new("forecast", "#d62728", p.iter().map(|v| (v.0, v.2)).collect()),
            Series::new("smart persistence", "#1f77b4", r.iter().map(|v| (v.0, v.2)).collect()),
        ],
    )
}

pub fn cmd_cloudindex(input: &Path, output: &Path, time: Option<&str>, cfg: &RunConfig) -> Result<i32> {
    let stack = load_stack(input, cfg.satellite_cadence_min)?;
    let times = match time {
        Some(s) => vec![timefmt::parse_iso(s).map_err(Error::Config)?],
        None => stack.frames().iter().map(|(t, _)| *t).collect(),
    };
    std::fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
    let mut manifest = Manifest::new("cloudindex");
    for t in times {
        let label = timefmt::format_iso(&t);
        match cloud_index(&stack, &t, &cfg.cloud).and_then(|m| m.write(output, &cfg.cloud)) {
            Ok(p) => manifest.ok(label, &p),
            Err(e) => manifest.fail(label, "error", e.to_string()),
        }
    }
    manifest.write(output)
}

#[derive(Debug, Serialize)]
struct FitReport {
    minutes_fitted: usize,
    minutes_unfitted: usize,
    #[serde(flatten)]
    error: crate::suntrack::TrackingError,
}

pub fn cmd_suntrack(cmd: &SuntrackCommand, cfg: &RunConfig) -> Result<i32> {
    match cmd {
        SuntrackCommand::Detect { input, out } => {
            let mut obs = Vec::new();
            for p in list_files(input, "png")? {
                let stem = file_stem(&p);
                let stamp = stem.strip_suffix("_short").unwrap_or(&stem);
                if stem.ends_with("_long") {
                    continue;
                }
                let Some(t) = timefmt::parse_compact(stamp) else {
                    continue;
                };
                let img = image::open(&p)?.to_rgb8();
                obs.push(detect_sun(&img, t, &cfg.detect));
            }
            write_observations(out, &obs)?;
            let visible = obs.iter().filter(|o| o.visible()).count();
            println!("suntrack detect: {} images, {visible} with a visible sun", obs.len());
            Ok(EXIT_OK)
        }
        SuntrackCommand::Fit { observations, width, out } => {
            let obs = read_observations(observations)?;
            let model = fit_trajectory(&obs, *width, &cfg.tracker)?;
            write_atomic(out, model.to_json()?.as_bytes())?;
            let report = FitReport {
                minutes_fitted: model.minutes.len(),
                minutes_unfitted: model.unfitted.len(),
                error: tracking_error(&model, &obs),
            };
            let text = serde_json::to_string_pretty(&report)?;
            write_atomic(&out.with_extension("report.json"), text.as_bytes())?;
            println!("{text}");
            Ok(EXIT_OK)
        }
        SuntrackCommand::Predict { model, date, out } => {
            let model = SunTrajectoryModel::from_json(&crate::io::read_to_string(model)?)?;
            let date = NaiveDate::parse_from_str(date, "%Y-%m-%d")
                .map_err(|_| Error::Config(format!("expected YYYY-MM-DD, got {date:?}")))?;
            let day = model.smooth_day(date)?;
            let midnight = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("midnight"));
            let obs: Vec<SunObservation> = day
                .positions()
                .into_iter()
                .map(|(m, p)| SunObservation {
                    timestamp: midnight + Duration::minutes(m as i64),
                    position: Some(p),
                })
                .collect();
            write_observations(out, &obs)?;
            Ok(EXIT_OK)
        }
    }
}

#[derive(Debug, Serialize)]
struct PcaSummary {
    rows: usize,
    cols: usize,
    components: usize,
    standardized: bool,
    explained_variance_ratio: Vec<f64>,
    eigenvalues: Vec<f64>,
    gmm: Option<GmmSummary>,
}

#[derive(Debug, Serialize)]
struct GmmSummary {
    components: usize,
    seed: u64,
    iterations: usize,
    converged: bool,
    final_log_likelihood: f64,
}

pub fn cmd_pca(input: &Path, output: &Path, with_gmm: bool, cfg: &RunConfig) -> Result<i32> {
    let x = StateMatrix::read(input)?;
    let model = pca_fit(&x, cfg.pca_components, cfg.pca_standardize)?;
    let scores = pca_project(&model, &x)?;
    let (clusters, gmm) = if with_gmm && scores.ncols() >= 2 {
        let pts: Vec<[f64; 2]> = (0..scores.nrows()).map(|r| [scores[(r, 0)], scores[(r, 1)]]).collect();
        let g = gmm_fit(&pts, cfg.gmm_components, cfg.gmm_seed, &cfg.gmm)?;
        write_atomic(&output.join("gmm.json"), serde_json::to_string_pretty(&g)?.as_bytes())?;
        let summary = GmmSummary {
            components: g.k(),
            seed: cfg.gmm_seed,
            iterations: g.log_likelihood.len(),
            converged: g.converged,
            final_log_likelihood: g.log_likelihood.last().copied().unwrap_or(f64::NAN),
        };
        (Some(g.predict(&pts)), Some(summary))
    } else {
        (None, None)
    };
    write_atomic(&output.join("pca_model.json"), model.to_json()?.as_bytes())?;
    write_atomic(&output.join("scores.csv"), scores_csv(&scores, clusters.as_deref()).as_bytes())?;
    let summary = PcaSummary {
        rows: x.rows,
        cols: x.cols,
        components: model.n_components(),
        standardized: cfg.pca_standardize,
        explained_variance_ratio: model.explained_variance_ratio.clone(),
        eigenvalues: model.eigenvalues.clone(),
        gmm,
    };
    let text = serde_json::to_string_pretty(&summary)?;
    write_atomic(&output.join("summary.json"), text.as_bytes())?;
    println!("{text}");
    Ok(EXIT_OK)
}

pub fn cmd_dataset(cmd: &DatasetCommand, cfg: &RunConfig) -> Result<i32> {
    match cmd {
        DatasetCommand::Index { images, irradiance, output } => {
            let series = IrradianceSeries::read_csv(irradiance)?;
            let built = build_index(images, &series, &cfg.site, &cfg.index)?;
            write_atomic(&output.join("index.csv"), built.index.to_csv().as_bytes())?;
            write_atomic(&output.join("rejects.csv"), rejects_csv(&built.rejects).as_bytes())?;
            write_atomic(&output.join("histograms.csv"), built.histograms.to_csv().as_bytes())?;
            println!(
                "dataset index: {} entries, {} rejects",
                built.index.len(),
                built.rejects.len()
            );
            Ok(EXIT_OK)
        }
        DatasetCommand::Split { index, out } => {
            let idx = SampleIndex::read_csv(index, cfg.index.cadence_min)?;
            write_atomic(out, split_csv(&idx, &cfg.split).as_bytes())?;
            Ok(EXIT_OK)
        }
        DatasetCommand::Windows {
            index,
            output,
            suntrack_model,
        } => {
            let idx = SampleIndex::read_csv(index, cfg.index.cadence_min)?;
            let cam = cfg.camera.model()?;
            let model = match suntrack_model {
                Some(p) => Some(SunTrajectoryModel::from_json(&crate::io::read_to_string(p)?)?),
                None => None,
            };
            let ctx = WindowContext {
                camera: &cam,
                source: &FsFrameSource,
                segmentation: model.as_ref().map(|m| (m, cfg.hyta)),
            };
            std::fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
            let mut manifest = Manifest::new("dataset windows");
            let mut complete = 0usize;
            for e in &idx.entries {
                let label = timefmt::format_iso(&e.timestamp);
                match assemble_window(&idx, e.timestamp, &cfg.window, &ctx) {
                    Ok(w) => {
                        let paths = w.write(output)?;
                        manifest.ok(label, &paths[0]);
                        complete += 1;
                    }
                    // incomplete windows are expected at day edges and gaps
                    Err(Error::Gap(m)) => manifest.entries.push(ManifestEntry {
                        input: label,
                        output: None,
                        status: "skipped",
                        reason: Some(format!("gap: {m}")),
                    }),
                    Err(err) => manifest.fail(label, "error", err.to_string()),
                }
            }
            write_atomic(&output.join("manifest.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
            println!("dataset windows: {complete} written of {}", idx.len());
            let failed = manifest.entries.iter().any(|e| e.status == "error");
            Ok(if failed { EXIT_PARTIAL } else { EXIT_OK })
        }
    }
}
