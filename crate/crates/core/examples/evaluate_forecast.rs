//! Score a lagging forecast against smart persistence with the full protocol:
//! RMSE, forecast skill, 95% quantile and windowed TDI.
//!
//! `cargo run --release --example evaluate_forecast`

use chrono::{Duration, NaiveDate};
use skycast::baseline::{smart_persistence_table, ClearSkySource, Site};
use skycast::metrics::{evaluate_run, Protocol};
use skycast::series::IrradianceSeries;
use skycast::synthetic::{date_grid, ghi_day};
use skycast::table::{ForecastRow, ForecastTable};

fn main() -> skycast::Result<()> {
    let site = Site::SIRTA;
    let mut samples = Vec::new();
    for (k, d) in date_grid(NaiveDate::from_ymd_opt(2019, 6, 1).unwrap(), 1, 5).into_iter().enumerate() {
        samples.extend_from_slice(ghi_day(d, &site, 2, k as u64).samples());
    }
    let truth = IrradianceSeries::new(samples)?;
    let reference = smart_persistence_table(&truth, &ClearSkySource::Analytic(site), &[2, 6, 10], Duration::seconds(30), 10.0)?;

    // blend persistence with the truth: better than the baseline, still lagging
    let forecast = ForecastTable::new(
        reference
            .rows
            .iter()
            .map(|r| ForecastRow::new(r.issue_time, r.horizon_min, r.y_true, 0.6 * r.y_pred + 0.4 * r.y_true))
            .collect(),
    );
    let report = evaluate_run(&forecast, &reference, &Protocol::default())?;
    print!("{}", report.to_csv());
    Ok(())
}
