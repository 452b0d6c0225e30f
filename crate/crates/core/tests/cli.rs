use std::path::{Path, PathBuf};
use std::process::Command;

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use serde_json::Value;

use skycast::baseline::{smart_persistence_table, ClearSkySource, Site};
use skycast::cli::run;
use skycast::config::KEYS;
use skycast::geometry::CameraModel;
use skycast::segmentation::{SegMap, SkyClass};
use skycast::series::IrradianceSeries;
use skycast::suntrack::write_observations;
use skycast::synthetic::{date_grid, ghi_day, rank2_states, sky_fixture, sun_arcs, write_frames, ArcNoise, SkyScene, SunArcTruth};
use skycast::table::{ForecastRow, ForecastTable};

fn skycast(args: &[&str]) -> i32 {
    let mut argv = vec!["skycast"];
    argv.extend_from_slice(args);
    run(argv)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_lists_every_key_with_its_default() {
    let out = Command::new(env!("CARGO_BIN_EXE_skycast")).arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for (key, _) in KEYS {
        let line = text
            .lines()
            .find(|l| l.split_whitespace().next() == Some(key))
            .unwrap_or_else(|| panic!("{key} missing from --help"));
        assert!(line.contains('[') && line.contains(']'), "{key} has no default: {line}");
    }
}

#[test]
fn usage_and_config_errors_exit_2() {
    let out = Command::new(env!("CARGO_BIN_EXE_skycast")).arg("no-such-command").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(skycast(&["--set", "camera.lens=fisheye", "config"]), 2);
    assert_eq!(skycast(&["--set", "metrics.windows=many", "config"]), 2);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# comment\nmetrics.seed = 7\nbogus.key = 1\n").unwrap();
    assert_eq!(skycast(&["--config", s(&cfg), "config"]), 2);
    std::fs::write(&cfg, "metrics.seed = 7\n").unwrap();
    assert_eq!(skycast(&["--config", s(&cfg), "--set", "metrics.seed=9", "config"]), 0);
}

#[test]
fn undistort_empty_corrupt_and_rerun() {
    let root = tempfile::tempdir().unwrap();
    let (input, output) = (root.path().join("in"), root.path().join("out"));
    std::fs::create_dir_all(&input).unwrap();

    assert_eq!(skycast(&["undistort", "--input", s(&input), "--output", s(&output)]), 0);
    assert_eq!(manifest(&output)["entries"].as_array().unwrap().len(), 0);

    let cam = CameraModel::centered(160, 120);
    let fx = sky_fixture(&cam, &SkyScene::Clear { sun: (100.0, 50.0) });
    fx.long.save(input.join("a.png")).unwrap();
    std::fs::write(input.join("b.png"), b"not a png").unwrap();
    let args = [
        "--set",
        "camera.width=160",
        "--set",
        "camera.height=120",
        "--set",
        "undistort.size=64",
        "undistort",
        "--input",
        s(&input),
        "--output",
        s(&output),
    ];
    assert_eq!(skycast(&args), 1);
    let m = manifest(&output);
    let entries = m["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[0]["status"], "ok");
    assert_eq!(entries[1]["status"], "error");
    let first = std::fs::read(output.join("a.png")).unwrap();
    assert_eq!(image::load_from_memory(&first).unwrap().width(), 64);

    assert_eq!(skycast(&args), 1);
    assert_eq!(std::fs::read(output.join("a.png")).unwrap(), first);
}

#[test]
fn segment_pairs_and_reports_missing_exposures() {
    let root = tempfile::tempdir().unwrap();
    let (input, output) = (root.path().join("in"), root.path().join("out"));
    std::fs::create_dir_all(&input).unwrap();
    let cam = CameraModel::centered(200, 150);
    let fx = sky_fixture(&cam, &SkyScene::Clear { sun: (120.0, 60.0) });
    fx.long.save(input.join("20190601120000_long.png")).unwrap();
    fx.short.save(input.join("20190601120000_short.png")).unwrap();
    fx.long.save(input.join("20190601120200_long.png")).unwrap();

    assert_eq!(skycast(&["segment", "--input", s(&input), "--output", s(&output)]), 1);
    let m = manifest(&output);
    let entries = m["entries"].as_array().unwrap();
    assert_eq!(entries[1]["input"], "20190601120200");
    assert_eq!(entries[1]["reason"], "no_short");

    let map = SegMap::read_png(&output.join("20190601120000_seg.png")).unwrap();
    let h = map.histogram();
    let sky = h[SkyClass::Sky as usize];
    let inside_dome: u64 = h.iter().sum::<u64>() - h[SkyClass::Frame as usize];
    assert!(sky as f64 > 0.8 * inside_dome as f64, "{h:?}");

    let csv = std::fs::read_to_string(output.join("histograms.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "image,sky,cloud,sun,saturation,frame");
    assert!(lines.next().unwrap().starts_with("20190601120000,"));
}

fn truth_fixture(dir: &Path) -> (PathBuf, IrradianceSeries) {
    let site = Site::SIRTA;
    let mut samples = Vec::new();
    for (k, d) in date_grid(NaiveDate::from_ymd_opt(2019, 6, 10).unwrap(), 1, 3).into_iter().enumerate() {
        samples.extend_from_slice(ghi_day(d, &site, 2, 10 + k as u64).samples());
    }
    let series = IrradianceSeries::new(samples).unwrap();
    let path = dir.join("truth.csv");
    std::fs::write(&path, series.to_csv()).unwrap();
    (path, series)
}

#[test]
fn evaluate_against_smart_persistence() {
    let root = tempfile::tempdir().unwrap();
    let (truth_path, truth) = truth_fixture(root.path());
    let sp = smart_persistence_table(&truth, &ClearSkySource::Analytic(Site::SIRTA), &[2, 6, 10], Duration::seconds(30), 10.0)
        .unwrap();
    let sp_path = root.path().join("sp.csv");
    sp.write_csv(&sp_path).unwrap();
    let baseline_path = root.path().join("baseline.csv");
    assert_eq!(skycast(&["baseline", "--truth", s(&truth_path), "--out", s(&baseline_path)]), 0);
    assert_eq!(std::fs::read_to_string(&baseline_path).unwrap(), sp.to_csv());

    let out1 = root.path().join("r1");
    assert_eq!(skycast(&["evaluate", "--pred", s(&sp_path), "--truth", s(&truth_path), "--output", s(&out1)]), 0);
    let report = json(out1.join("report.json"));
    for h in report["horizons"].as_array().unwrap() {
        assert!(h["fs_percent"].as_f64().unwrap().abs() <= 1e-9);
    }
    let svg = std::fs::read_to_string(out1.join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("smart persistence"));

    let perfect = ForecastTable::new(sp.rows.iter().map(|r| ForecastRow::new(r.issue_time, r.horizon_min, r.y_true, r.y_true)).collect());
    let perfect_path = root.path().join("perfect.csv");
    perfect.write_csv(&perfect_path).unwrap();
    let (out2, out3) = (root.path().join("r2"), root.path().join("r3"));
    for out in [&out2, &out3] {
        let code = skycast(&["evaluate", "--pred", s(&perfect_path), "--reference", s(&sp_path), "--output", s(out)]);
        assert_eq!(code, 0);
    }
    let report = json(out2.join("report.json"));
    for h in report["horizons"].as_array().unwrap() {
        assert_eq!(h["fs_percent"].as_f64().unwrap(), 100.0);
        assert_eq!(h["tdi"]["tdi"].as_f64().unwrap(), 0.0);
    }
    assert_eq!(
        std::fs::read(out2.join("report.json")).unwrap(),
        std::fs::read(out3.join("report.json")).unwrap()
    );
    let csv = std::fs::read_to_string(out2.join("report.csv")).unwrap();
    assert!(csv.starts_with("horizon,rmse,fs_percent,tdi,tdi_adv,tdi_late,q95\n"));
}

#[test]
fn evaluate_schema_error_exits_2() {
    let root = tempfile::tempdir().unwrap();
    let bad = root.path().join("bad.csv");
    std::fs::write(
        &bad,
        "issue_time_iso,horizon_min,y_true_wm2,y_pred_wm2\n2019-06-10T10:00:00Z,2,1,1\n2019-06-10T10:02:00Z,2,1,oops\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_skycast"))
        .args(["evaluate", "--pred", s(&bad), "--reference", s(&bad), "--output"])
        .arg(root.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn evaluate_misaligned_tables_exit_2() {
    let root = tempfile::tempdir().unwrap();
    let t = Utc.with_ymd_and_hms(2019, 6, 10, 10, 0, 0).unwrap();
    let a = ForecastTable::new(vec![ForecastRow::new(t, 2, 1.0, 1.0)]);
    let b = ForecastTable::new(vec![ForecastRow::new(t, 6, 1.0, 1.0)]);
    let (pa, pb) = (root.path().join("a.csv"), root.path().join("b.csv"));
    a.write_csv(&pa).unwrap();
    b.write_csv(&pb).unwrap();
    let out = root.path().join("o");
    assert_eq!(skycast(&["evaluate", "--pred", s(&pa), "--reference", s(&pb), "--output", s(&out)]), 2);
}

#[test]
fn suntrack_fit_recovers_synthetic_arcs() {
    let root = tempfile::tempdir().unwrap();
    let width = 640;
    let truth = SunArcTruth::example(width);
    let dates = date_grid(NaiveDate::from_ymd_opt(2018, 1, 5).unwrap(), 6, 61);
    let minutes: Vec<u16> = (540..=900).step_by(15).collect();
    let obs = sun_arcs(&truth, &dates, &minutes, width, ArcNoise::NONE, 3);
    let obs_path = root.path().join("obs.csv");
    write_observations(&obs_path, &obs).unwrap();
    let model = root.path().join("model.json");
    let code = skycast(&[
        "--set",
        "suntrack.ridge=0",
        "suntrack",
        "fit",
        "--observations",
        s(&obs_path),
        "--width",
        "640",
        "--out",
        s(&model),
    ]);
    assert_eq!(code, 0);
    let report = json(model.with_extension("report.json"));
    assert!(report["mae_px"].as_f64().unwrap() < 1e-6, "{report}");
    assert_eq!(report["skipped"], 0);

    let day = root.path().join("day.csv");
    assert_eq!(skycast(&["suntrack", "predict", "--model", s(&model), "--date", "2018-07-01", "--out", s(&day)]), 0);
    let rows = std::fs::read_to_string(&day).unwrap().lines().count() - 1;
    assert_eq!(rows, 900 - 540 + 1);
}

#[test]
fn pca_reports_rank_two_ratios() {
    let root = tempfile::tempdir().unwrap();
    let states = root.path().join("states.bin");
    rank2_states(120, 30, 11).write(&states).unwrap();
    let out = root.path().join("pca");
    assert_eq!(skycast(&["--set", "gmm.components=3", "pca", "--input", s(&states), "--output", s(&out)]), 0);
    let summary = json(out.join("summary.json"));
    let r: Vec<f64> = summary["explained_variance_ratio"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!((r[0] + r[1] - 1.0).abs() < 1e-9, "{r:?}");
    let scores = std::fs::read_to_string(out.join("scores.csv")).unwrap();
    assert_eq!(scores.lines().next().unwrap(), "pc1,pc2,pc3,pc4,cluster");
    assert_eq!(scores.lines().count(), 121);

    let again = root.path().join("pca2");
    assert_eq!(skycast(&["--set", "gmm.components=3", "pca", "--input", s(&states), "--output", s(&again)]), 0);
    assert_eq!(
        std::fs::read(out.join("scores.csv")).unwrap(),
        std::fs::read(again.join("scores.csv")).unwrap()
    );
}

#[test]
fn cloudindex_over_a_png_directory() {
    let root = tempfile::tempdir().unwrap();
    let (input, output) = (root.path().join("sat"), root.path().join("ci"));
    std::fs::create_dir_all(&input).unwrap();
    for d in 0..3 {
        let day = Utc.with_ymd_and_hms(2020, 3, 1 + d, 12, 0, 0).unwrap();
        let img = image::GrayImage::from_fn(4, 4, |x, _| image::Luma([if d == 2 && x == 0 { 200 } else { 30 + d as u8 }]));
        img.save(input.join(format!("{}.png", day.format("%Y%m%d%H%M")))).unwrap();
    }
    let code = skycast(&["cloudindex", "--input", s(&input), "--output", s(&output), "--time", "2020-03-03T12:00:00Z"]);
    assert_eq!(code, 0);
    let sidecar = json(output.join("202003031200_ci.json"));
    assert_eq!(sidecar["n_days"], 10);
    let png = image::open(output.join("202003031200_ci.png")).unwrap().to_luma16();
    assert_eq!(png.get_pixel(0, 0).0[0], u16::MAX);
    // ground brightened from 30 to 32 over the window; rho_max is 200
    let v = png.get_pixel(1, 0).0[0] as f64 / u16::MAX as f64;
    assert!((v - 2.0 / 170.0).abs() <= 1.0 / u16::MAX as f64, "{v}");
}

#[test]
fn dataset_index_split_and_windows() {
    let root = tempfile::tempdir().unwrap();
    let images = root.path().join("images");
    std::fs::create_dir_all(&images).unwrap();
    let start = Utc.with_ymd_and_hms(2019, 6, 4, 10, 0, 0).unwrap();
    let times: Vec<_> = (0..12).map(|k| start + Duration::minutes(2 * k)).collect();
    write_frames(&images, &times, 96, 72).unwrap();
    // a lone long exposure and a night frame become rejects
    std::fs::copy(images.join("20190604100000_long.png"), images.join("20190604110000_long.png")).unwrap();
    let ghi = IrradianceSeries::new((0..120).map(|m| (start + Duration::minutes(m), 700.0 + m as f64)).collect()).unwrap();
    let ghi_path = root.path().join("ghi.csv");
    std::fs::write(&ghi_path, ghi.to_csv()).unwrap();

    let idx_dir = root.path().join("index");
    let code = skycast(&["dataset", "index", "--images", s(&images), "--irradiance", s(&ghi_path), "--output", s(&idx_dir)]);
    assert_eq!(code, 0);
    let index_csv = std::fs::read_to_string(idx_dir.join("index.csv")).unwrap();
    assert_eq!(index_csv.lines().count(), 13);
    let rejects = std::fs::read_to_string(idx_dir.join("rejects.csv")).unwrap();
    assert_eq!(rejects, "timestamp,reason\n2019-06-04T11:00:00Z,no_short\n");

    let split_path = root.path().join("split.csv");
    assert_eq!(skycast(&["dataset", "split", "--index", s(&idx_dir.join("index.csv")), "--out", s(&split_path)]), 0);
    let split = std::fs::read_to_string(&split_path).unwrap();
    assert!(split.lines().skip(1).all(|l| l.ends_with(",val")), "{split}");

    let windows = root.path().join("windows");
    let code = skycast(&[
        "--set",
        "camera.width=96",
        "--set",
        "camera.height=72",
        "--set",
        "window.size=32",
        "dataset",
        "windows",
        "--index",
        s(&idx_dir.join("index.csv")),
        "--output",
        s(&windows),
    ]);
    assert_eq!(code, 0);
    // 12 frames, 5 context and 5 horizon frames: issue times 4..=6 are complete
    let bins: Vec<_> = std::fs::read_dir(&windows)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with("_input.bin"))
        .collect();
    assert_eq!(bins.len(), 3);
    let m = manifest(&windows);
    assert_eq!(m["entries"].as_array().unwrap().iter().filter(|e| e["status"] == "skipped").count(), 9);
    let tensor = skycast::latent::StateMatrix::read(&windows.join("20190604100800_input.bin")).unwrap();
    assert_eq!((tensor.rows, tensor.cols, tensor.channels), (5, 3 * 32 * 32, 3));
}

#[test]
fn split_of_a_2019_fixture_lists_even_days_as_val() {
    let root = tempfile::tempdir().unwrap();
    let mut text = String::from("timestamp_iso,long_path,short_path,ghi_wm2,sza_deg\n");
    for d in 1..=6 {
        text.push_str(&format!("2019-03-0{d}T12:00:00Z,l.png,s.png,400,50\n"));
    }
    let idx = root.path().join("index.csv");
    std::fs::write(&idx, text).unwrap();
    let out = root.path().join("split.csv");
    assert_eq!(skycast(&["dataset", "split", "--index", s(&idx), "--out", s(&out)]), 0);
    let got = std::fs::read_to_string(&out).unwrap();
    let expected = "timestamp_iso,split\n\
        2019-03-01T12:00:00Z,test\n2019-03-02T12:00:00Z,val\n2019-03-03T12:00:00Z,test\n\
        2019-03-04T12:00:00Z,val\n2019-03-05T12:00:00Z,test\n2019-03-06T12:00:00Z,val\n";
    assert_eq!(got, expected);
}
