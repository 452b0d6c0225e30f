//! Fit the per-minute sun trajectory model to a year of noisy detections and
//! compare the robust and least-squares fits.
//!
//! `cargo run --release --example sun_tracking`

use chrono::{NaiveDate, TimeZone, Utc};
use skycast::suntrack::{fit_trajectory, minute_of_day, tracking_error, Loss, TrackerConfig};
use skycast::synthetic::{date_grid, sun_arcs, ArcNoise, SunArcTruth};

fn main() -> skycast::Result<()> {
    let width = 1024;
    let truth = SunArcTruth::example(width);
    let dates = date_grid(NaiveDate::from_ymd_opt(2018, 1, 2).unwrap(), 3, 120);
    let minutes: Vec<u16> = (420..=1020).step_by(5).collect();
    let noise = ArcNoise {
        sigma_px: 0.8,
        outlier_fraction: 0.15,
        hidden_fraction: 0.3,
    };
    let obs = sun_arcs(&truth, &dates, &minutes, width, noise, 7);
    let visible = obs.iter().filter(|o| o.visible()).count();
    println!("{} detections, {visible} with a visible sun", obs.len());

    for loss in [Loss::L1, Loss::L2] {
        let cfg = TrackerConfig { loss, ..Default::default() };
        let model = fit_trajectory(&obs, width, &cfg)?;
        let err = tracking_error(&model, &obs);
        let mut vs_truth: Vec<f64> = obs
            .iter()
            .map(|o| {
                let (px, py) = model.sun_position(&o.timestamp).unwrap_or((f64::NAN, f64::NAN));
                let (tx, ty) = truth.position(o.timestamp.date_naive(), minute_of_day(&o.timestamp));
                (px - tx).hypot(py - ty)
            })
            .collect();
        vs_truth.sort_by(f64::total_cmp);
        let t = Utc.with_ymd_and_hms(2018, 9, 21, 12, 0, 0).unwrap();
        let (x, y) = model.sun_position(&t)?;
        let (tx, ty) = truth.position(t.date_naive(), 720);
        println!(
            "{loss:?}: MAE vs detections {:.2} px ({:.3}% of width), median vs truth {:.3} px; \
             equinox noon ({x:.1}, {y:.1}), truth ({tx:.1}, {ty:.1})",
            err.mae_px,
            100.0 * err.mae_width_fraction,
            vs_truth[vs_truth.len() / 2]
        );
    }
    Ok(())
}
