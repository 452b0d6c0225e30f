//! Clear-sky irradiance and the smart-persistence reference forecast.

use chrono::{DateTime, Datelike, Duration, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::IrradianceSeries;
use crate::table::{ForecastRow, ForecastTable};
use crate::timefmt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_m: f64,
}

impl Site {
    /// SIRTA, Palaiseau.
    pub const SIRTA: Site = Site {
        latitude_deg: 48.713,
        longitude_deg: 2.208,
        altitude_m: 156.0,
    };
}

/// Solar zenith angle in degrees from the Spencer day-angle series for the
/// declination and the equation of time (accuracy of a few tenths of a degree).
pub fn solar_zenith(t: &DateTime<Utc>, latitude_deg: f64, longitude_deg: f64) -> f64 {
    let hours = t.hour() as f64 + t.minute() as f64 / 60.0 + t.second() as f64 / 3600.0;
    let day_angle = std::f64::consts::TAU / 365.0 * (t.ordinal() as f64 - 1.0 + (hours - 12.0) / 24.0);
    let (s1, c1) = day_angle.sin_cos();
    let (s2, c2) = (2.0 * day_angle).sin_cos();
    let (s3, c3) = (3.0 * day_angle).sin_cos();
    let declination = 0.006918 - 0.399912 * c1 + 0.070257 * s1 - 0.006758 * c2 + 0.000907 * s2
        - 0.002697 * c3
        + 0.00148 * s3;
    let eot_min = 229.18 * (0.000075 + 0.001868 * c1 - 0.032077 * s1 - 0.014615 * c2 - 0.040849 * s2);
    let solar_minutes = hours * 60.0 + 4.0 * longitude_deg + eot_min;
    let hour_angle = (solar_minutes / 4.0 - 180.0).to_radians();
    let lat = latitude_deg.to_radians();
    let cos_z = lat.sin() * declination.sin() + lat.cos() * declination.cos() * hour_angle.cos();
    cos_z.clamp(-1.0, 1.0).acos().to_degrees()
}

pub fn solar_elevation(t: &DateTime<Utc>, site: &Site) -> f64 {
    90.0 - solar_zenith(t, site.latitude_deg, site.longitude_deg)
}

pub const CLEAR_SKY_SCALE: f64 = 1098.0;
pub const CLEAR_SKY_EXTINCTION: f64 = 0.057;

/// Analytic clear-sky GHI as a function of the zenith angle in degrees.
pub fn analytic_clear_sky(zenith_deg: f64) -> f64 {
    if zenith_deg >= 90.0 {
        return 0.0;
    }
    let c = zenith_deg.to_radians().cos();
    CLEAR_SKY_SCALE * c * (-CLEAR_SKY_EXTINCTION / c).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClearSkySource {
    /// Externally modelled clear-sky GHI; values are looked up within
    /// `tolerance` of the requested time.
    Series {
        series: IrradianceSeries,
        tolerance: Duration,
    },
    Analytic(Site),
}

impl ClearSkySource {
    pub fn series(series: IrradianceSeries) -> Self {
        ClearSkySource::Series {
            series,
            tolerance: Duration::seconds(30),
        }
    }
}

pub fn clear_sky_ghi(t: &DateTime<Utc>, src: &ClearSkySource) -> Result<f64> {
    match src {
        ClearSkySource::Series { series, tolerance } => series
            .nearest(*t, *tolerance)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::coverage(format!("clear-sky series has no value at {}", timefmt::format_iso(t)))),
        ClearSkySource::Analytic(site) => Ok(analytic_clear_sky(solar_zenith(t, site.latitude_deg, site.longitude_deg))),
    }
}

/// Clear-sky level below which the clear-sky index is not trusted.
pub const DEFAULT_LOW_IRRADIANCE: f64 = 10.0;

/// `ŷ = (y_t / yclr_t) · yclr_future`, falling back to plain persistence when
/// `yclr_t < low_irradiance`.
pub fn smart_persistence(y_t: f64, yclr_t: f64, yclr_future: f64, low_irradiance: f64) -> Result<f64> {
    if !(y_t >= 0.0 && yclr_t >= 0.0 && yclr_future >= 0.0) {
        return Err(Error::Domain(format!(
            "smart persistence needs non-negative inputs, got y={y_t}, clr={yclr_t}, clr_future={yclr_future}"
        )));
    }
    if yclr_t < low_irradiance {
        return Ok(y_t);
    }
    Ok(y_t / yclr_t * yclr_future)
}

/// Smart-persistence forecasts for every measured issue time and horizon
/// whose target is also measured. Targets are matched within `tolerance`.
pub fn smart_persistence_table(
    truth: &IrradianceSeries,
    clear: &ClearSkySource,
    horizons_min: &[u32],
    tolerance: Duration,
    low_irradiance: f64,
) -> Result<ForecastTable> {
    let mut rows = Vec::new();
    for &(t, y) in truth.samples() {
        let clr_t = clear_sky_ghi(&t, clear)?;
        for &h in horizons_min {
            let target_t = t + Duration::minutes(h as i64);
            let Some((_, y_true)) = truth.nearest(target_t, tolerance) else {
                continue;
            };
            let clr_f = clear_sky_ghi(&target_t, clear)?;
            let pred = smart_persistence(y.max(0.0), clr_t, clr_f, low_irradiance)?;
            rows.push(ForecastRow::new(t, h, y_true, pred));
        }
    }
    Ok(ForecastTable::new(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn noon_zenith(y: i32, m: u32, d: u32, lat: f64, lon: f64) -> f64 {
        let start = Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap();
        (0..24 * 60)
            .map(|k| solar_zenith(&(start + Duration::minutes(k)), lat, lon))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn equinox_noon_at_equator_is_overhead() {
        let z = noon_zenith(2019, 3, 20, 0.0, 0.0);
        assert!(z < 1.0, "{z}");
    }

    #[test]
    fn midnight_is_below_horizon() {
        let t = Utc.with_ymd_and_hms(2019, 6, 21, 0, 0, 0).unwrap();
        assert!(solar_zenith(&t, 48.713, 2.208) > 90.0);
    }

    #[test]
    fn sirta_summer_solstice_noon() {
        let z = noon_zenith(2019, 6, 21, 48.713, 2.208);
        assert!((z - (48.713 - 23.44)).abs() < 0.7, "{z}");
    }

    #[test]
    fn clear_sky_is_zero_below_horizon_and_decreasing() {
        assert_eq!(analytic_clear_sky(90.0), 0.0);
        assert_eq!(analytic_clear_sky(120.0), 0.0);
        let mut prev = f64::INFINITY;
        for z in 0..90 {
            let v = analytic_clear_sky(z as f64);
            assert!(v < prev, "not decreasing at {z}°");
            prev = v;
        }
    }

    #[test]
    fn external_series_passthrough_and_gap() {
        let t = Utc.with_ymd_and_hms(2019, 6, 1, 12, 0, 0).unwrap();
        let src = ClearSkySource::series(IrradianceSeries::new(vec![(t, 812.25)]).unwrap());
        assert_eq!(clear_sky_ghi(&t, &src).unwrap(), 812.25);
        assert!(matches!(
            clear_sky_ghi(&(t + Duration::minutes(5)), &src),
            Err(Error::Coverage { .. })
        ));
    }

    #[test]
    fn smart_persistence_examples() {
        assert_eq!(smart_persistence(400.0, 800.0, 800.0, 10.0).unwrap(), 400.0);
        assert_eq!(smart_persistence(400.0, 800.0, 700.0, 10.0).unwrap(), 350.0);
        assert_eq!(smart_persistence(800.0, 800.0, 640.0, 10.0).unwrap(), 640.0);
        assert_eq!(smart_persistence(30.0, 5.0, 50.0, 10.0).unwrap(), 30.0);
        assert!(smart_persistence(-1.0, 5.0, 50.0, 10.0).is_err());
    }
}
