//! Build a sample index from exposure pairs and GHI, split it, and assemble
//! one training window.
//!
//! `cargo run --example dataset_windows`

use chrono::{Duration, TimeZone, Utc};
use skycast::baseline::Site;
use skycast::dataset::{assemble_window, build_index, split, FsFrameSource, IndexConfig, SplitConfig, WindowContext, WindowSpec};
use skycast::geometry::CameraModel;
use skycast::series::IrradianceSeries;
use skycast::synthetic::write_frames;

fn main() -> skycast::Result<()> {
    let dir = std::env::temp_dir().join("skycast-dataset");
    let images = dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| skycast::Error::io(&images, e))?;
    let start = Utc.with_ymd_and_hms(2019, 5, 14, 9, 0, 0).unwrap();
    let times: Vec<_> = (0..15).map(|k| start + Duration::minutes(2 * k)).collect();
    write_frames(&images, &times, 128, 96)?;
    let ghi = IrradianceSeries::new((0..40).map(|m| (start + Duration::minutes(m), 550.0 + 3.0 * m as f64)).collect())?;

    let built = build_index(&images, &ghi, &Site::SIRTA, &IndexConfig::default())?;
    println!("index: {} entries, {} rejects", built.index.len(), built.rejects.len());
    let s = split(&built.index, &SplitConfig::default());
    println!("split: train {}, val {}, test {}", s.train.len(), s.val.len(), s.test.len());

    let cam = CameraModel::centered(128, 96);
    let ctx = WindowContext {
        camera: &cam,
        source: &FsFrameSource,
        segmentation: None,
    };
    let spec = WindowSpec {
        size: 64,
        ..Default::default()
    };
    let t = times[6];
    let w = assemble_window(&built.index, t, &spec, &ctx)?;
    println!(
        "window at {t}: {} frames x {} channels x {}^2, targets {:?}",
        w.frames(),
        w.channels,
        w.size,
        w.targets
    );
    let written = w.write(&dir)?;
    println!("wrote {}", written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "));
    Ok(())
}
