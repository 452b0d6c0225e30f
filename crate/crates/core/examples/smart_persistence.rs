//! Smart-persistence baseline on a synthetic cloudy day, and forecast skill
//! of a slightly better forecast against it.
//!
//! `cargo run --example smart_persistence`

use chrono::{Duration, NaiveDate};
use skycast::baseline::{smart_persistence_table, solar_zenith, ClearSkySource, Site};
use skycast::metrics::{forecast_skill, rmse};
use skycast::synthetic::ghi_day;

fn main() -> skycast::Result<()> {
    let site = Site::SIRTA;
    let day = NaiveDate::from_ymd_opt(2019, 7, 12).unwrap();
    let truth = ghi_day(day, &site, 1, 3);
    let (noon, ghi) = truth.samples()[truth.len() / 2];
    println!(
        "{} samples; at {noon} GHI {ghi:.0} W/m2, zenith {:.1} deg",
        truth.len(),
        solar_zenith(&noon, site.latitude_deg, site.longitude_deg)
    );

    let table = smart_persistence_table(&truth, &ClearSkySource::Analytic(site), &[2, 6, 10], Duration::seconds(30), 10.0)?;
    for h in table.horizons() {
        let rows = table.horizon_rows(h);
        let y: Vec<f64> = rows.iter().map(|r| r.y_true).collect();
        let sp: Vec<f64> = rows.iter().map(|r| r.y_pred).collect();
        // a forecast that closes a quarter of the persistence error
        let better: Vec<f64> = sp.iter().zip(&y).map(|(p, t)| p + 0.25 * (t - p)).collect();
        let (e_sp, e_b) = (rmse(&sp, &y)?, rmse(&better, &y)?);
        println!(
            "{h:>2} min: persistence RMSE {e_sp:6.1}, improved RMSE {e_b:6.1}, FS {:5.1}%",
            forecast_skill(e_b, e_sp)?
        );
    }
    println!("FS(109.1, 143.6) = {:.1}%", forecast_skill(109.1, 143.6)?);
    Ok(())
}
