//! Forecast verification.
//!
//! Besides the usual RMSE and skill score against a reference forecast, this
//! module measures temporal misalignment with the Temporal Distortion Index
//! (TDI). A forecast and its target are aligned with dynamic time warping
//! (absolute-difference cost, steps `(1,0)`, `(0,1)`, `(1,1)`); the offsets
//! `i - j` of the path vertices are then summed separately for late
//! (`i > j`, forecast index ahead of the target index it reproduces) and
//! advance (`j > i`) distortion, and normalized by `(N-1)²`, the offset sum
//! of a path running along two edges of the lattice.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{ForecastRow, ForecastTable};
use crate::timefmt;

fn check_lengths(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "prediction has {} samples, target {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target)?;
    if pred.is_empty() {
        return Err(Error::Domain("rmse of empty series".into()));
    }
    let sse: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// Skill score in percent: `(1 - err_forecast / err_reference) * 100`.
pub fn forecast_skill(err_forecast: f64, err_reference: f64) -> Result<f64> {
    if !(err_reference > 0.0) {
        return Err(Error::Domain(format!(
            "reference error must be positive, got {err_reference}"
        )));
    }
    Ok((1.0 - err_forecast / err_reference) * 100.0)
}

/// Lower empirical quantile of absolute errors: the `ceil(q·N)`-th smallest.
pub fn quantile_abs_error(pred: &[f64], target: &[f64], q: f64) -> Result<f64> {
    check_lengths(pred, target)?;
    if pred.is_empty() {
        return Err(Error::Domain("quantile of empty series".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let mut errs: Vec<f64> = pred.iter().zip(target).map(|(p, t)| (p - t).abs()).collect();
    errs.sort_by(f64::total_cmp);
    // guard against q·N landing a hair above an integer
    let rank = ((q * errs.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(errs[rank.min(errs.len()) - 1])
}

/// Monotone alignment path; `(i, j)` pairs forecast index `i` with target
/// index `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarpPath {
    pub vertices: Vec<(usize, usize)>,
}

impl WarpPath {
    /// Checks the lattice-path invariants for series of length `n`.
    pub fn is_valid(&self, n: usize) -> bool {
        let v = &self.vertices;
        if n == 0 || v.first() != Some(&(0, 0)) || v.last() != Some(&(n - 1, n - 1)) {
            return false;
        }
        v.windows(2).all(|w| {
            let di = w[1].0 as isize - w[0].0 as isize;
            let dj = w[1].1 as isize - w[0].1 as isize;
            matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
        })
    }

    pub fn cost(&self, pred: &[f64], target: &[f64]) -> f64 {
        self.vertices.iter().map(|&(i, j)| (pred[i] - target[j]).abs()).sum()
    }

    /// `(late, advance)` offset sums.
    pub fn offsets(&self) -> (usize, usize) {
        self.vertices.iter().fold((0, 0), |(late, adv), &(i, j)| {
            (late + i.saturating_sub(j), adv + j.saturating_sub(i))
        })
    }

    /// TDI of this path for series of length `n`.
    pub fn tdi(&self, n: usize) -> TdiResult {
        let (late, adv) = self.offsets();
        let norm = ((n - 1) * (n - 1)) as f64;
        let late = 100.0 * late as f64 / norm;
        let adv = 100.0 * adv as f64 / norm;
        TdiResult {
            tdi: adv + late,
            adv,
            late,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdiResult {
    pub tdi: f64,
    pub adv: f64,
    pub late: f64,
}

/// Optimal alignment together with its cost.
pub fn dtw_align_with_cost(pred: &[f64], target: &[f64]) -> Result<(WarpPath, f64)> {
    check_lengths(pred, target)?;
    let n = pred.len();
    if n < 2 {
        return Err(Error::Domain(format!("DTW needs at least 2 samples, got {n}")));
    }
    let at = |i: usize, j: usize| i * n + j;
    let mut acc = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            let c = (pred[i] - target[j]).abs();
            let prev = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => acc[at(0, j - 1)],
                (_, 0) => acc[at(i - 1, 0)],
                _ => acc[at(i - 1, j - 1)].min(acc[at(i - 1, j)]).min(acc[at(i, j - 1)]),
            };
            acc[at(i, j)] = c + prev;
        }
    }

    let mut vertices = vec![(n - 1, n - 1)];
    let (mut i, mut j) = (n - 1, n - 1);
    while (i, j) != (0, 0) {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            // diagonal first, then (1,0), then (0,1)
            let mut best = (i - 1, j - 1);
            for cand in [(i - 1, j), (i, j - 1)] {
                if acc[at(cand.0, cand.1)] < acc[at(best.0, best.1)] {
                    best = cand;
                }
            }
            best
        };
        vertices.push((i, j));
    }
    vertices.reverse();
    Ok((WarpPath { vertices }, acc[at(n - 1, n - 1)]))
}

pub fn dtw_align(pred: &[f64], target: &[f64]) -> Result<WarpPath> {
    dtw_align_with_cost(pred, target).map(|(p, _)| p)
}

pub fn tdi(pred: &[f64], target: &[f64]) -> Result<TdiResult> {
    let path = dtw_align(pred, target)?;
    Ok(path.tdi(pred.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    /// Number of TDI windows sampled per horizon.
    pub windows: usize,
    /// Consecutive samples per TDI window.
    pub window_len: usize,
    /// Nominal spacing of issue times (minutes).
    pub step_min: u32,
    pub quantile: f64,
    pub seed: u64,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            windows: 200,
            window_len: 100,
            step_min: 2,
            quantile: 0.95,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub horizon_min: u32,
    pub samples: usize,
    pub rmse: f64,
    pub rmse_reference: f64,
    pub fs_percent: Option<f64>,
    pub q95: f64,
    pub q95_reference: f64,
    /// Number of TDI windows averaged (0 when no gap-free window exists).
    pub tdi_windows: usize,
    pub tdi: Option<TdiResult>,
    pub tdi_reference: Option<TdiResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub protocol: Protocol,
    pub horizons: Vec<HorizonReport>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per horizon: `horizon,rmse,fs_percent,tdi,tdi_adv,tdi_late,q95`.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut s = String::from("horizon,rmse,fs_percent,tdi,tdi_adv,tdi_late,q95\n");
        for h in &self.horizons {
            s.push_str(&format!(
                "{},{:.6},{},{},{},{},{:.6}\n",
                h.horizon_min,
                h.rmse,
                opt(h.fs_percent),
                opt(h.tdi.map(|t| t.tdi)),
                opt(h.tdi.map(|t| t.adv)),
                opt(h.tdi.map(|t| t.late)),
                h.q95
            ));
        }
        s
    }
}

fn key_string(r: &ForecastRow) -> String {
    format!("{}@{}min", timefmt::format_iso(&r.issue_time), r.horizon_min)
}

/// Start indices of gap-free runs of `len` rows.
fn window_starts(rows: &[&ForecastRow], len: usize, step_min: u32) -> Vec<usize> {
    if len == 0 || rows.len() < len {
        return Vec::new();
    }
    let max_gap = chrono::Duration::minutes(step_min as i64);
    // run[k] = length of the gap-free run starting at k
    let mut run = vec![1usize; rows.len()];
    for k in (0..rows.len() - 1).rev() {
        if rows[k + 1].issue_time - rows[k].issue_time <= max_gap {
            run[k] = run[k + 1] + 1;
        }
    }
    (0..rows.len()).filter(|&k| run[k] >= len).collect()
}

fn sample_windows(starts: &[usize], count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if starts.is_empty() || count == 0 {
        return Vec::new();
    }
    if starts.len() >= count {
        let mut picked: Vec<usize> = index::sample(rng, starts.len(), count).into_iter().map(|k| starts[k]).collect();
        picked.sort_unstable();
        picked
    } else {
        (0..count).map(|_| starts[rng.gen_range(0..starts.len())]).collect()
    }
}

fn mean_tdi(results: &[TdiResult]) -> Option<TdiResult> {
    if results.is_empty() {
        return None;
    }
    let n = results.len() as f64;
    let adv = results.iter().map(|r| r.adv).sum::<f64>() / n;
    let late = results.iter().map(|r| r.late).sum::<f64>() / n;
    Some(TdiResult {
        tdi: adv + late,
        adv,
        late,
    })
}

/// Evaluate a forecast table against a reference table sharing its keys.
pub fn evaluate_run(table: &ForecastTable, reference: &ForecastTable, protocol: &Protocol) -> Result<Report> {
    if !(protocol.quantile > 0.0 && protocol.quantile < 1.0) {
        return Err(Error::Domain(format!("quantile must lie in (0, 1), got {}", protocol.quantile)));
    }
    if protocol.window_len < 2 {
        return Err(Error::Domain("TDI windows need at least 2 samples".into()));
    }
    let fidx = table.index();
    let ridx = reference.index();
    let fkeys: BTreeSet<_> = fidx.keys().collect();
    let rkeys: BTreeSet<_> = ridx.keys().collect();
    let mut offending: Vec<String> = fkeys
        .symmetric_difference(&rkeys)
        .map(|k| key_string(fidx.get(*k).or_else(|| ridx.get(*k)).expect("key from one side")))
        .collect();
    for (k, f) in &fidx {
        if let Some(r) = ridx.get(k) {
            if (f.y_true - r.y_true).abs() > 1e-6 * f.y_true.abs().max(1.0) {
                offending.push(format!("{} (y_true differs)", key_string(f)));
            }
        }
    }
    if !offending.is_empty() {
        return Err(Error::Join { keys: offending });
    }
    if table.rows.is_empty() {
        return Err(Error::Domain("empty forecast table".into()));
    }

    let mut horizons = Vec::new();
    for h in table.horizons() {
        let rows = table.horizon_rows(h);
        let target: Vec<f64> = rows.iter().map(|r| r.y_true).collect();
        let pred: Vec<f64> = rows.iter().map(|r| r.y_pred).collect();
        let refp: Vec<f64> = rows.iter().map(|r| ridx[&r.key()].y_pred).collect();

        let rmse_f = rmse(&pred, &target)?;
        let rmse_r = rmse(&refp, &target)?;

        let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed ^ (h as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let starts = window_starts(&rows, protocol.window_len, protocol.step_min);
        let picked = sample_windows(&starts, protocol.windows, &mut rng);
        let mut tdi_f = Vec::with_capacity(picked.len());
        let mut tdi_r = Vec::with_capacity(picked.len());
        for &s in &picked {
            let e = s + protocol.window_len;
            tdi_f.push(tdi(&pred[s..e], &target[s..e])?);
            tdi_r.push(tdi(&refp[s..e], &target[s..e])?);
        }

        horizons.push(HorizonReport {
            horizon_min: h,
            samples: rows.len(),
            rmse: rmse_f,
            rmse_reference: rmse_r,
            fs_percent: forecast_skill(rmse_f, rmse_r).ok(),
            q95: quantile_abs_error(&pred, &target, protocol.quantile)?,
            q95_reference: quantile_abs_error(&refp, &target, protocol.quantile)?,
            tdi_windows: picked.len(),
            tdi: mean_tdi(&tdi_f),
            tdi_reference: mean_tdi(&tdi_r),
        });
    }
    Ok(Report {
        protocol: *protocol,
        horizons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!((rmse(&[4.0, 5.0], &[1.5, 2.5]).unwrap() - 2.5).abs() < 1e-15);
        assert!((rmse(&[1.0, 2.0], &[0.0, 0.0]).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn skill_examples() {
        assert_eq!(forecast_skill(5.0, 5.0).unwrap(), 0.0);
        assert_eq!(forecast_skill(0.0, 5.0).unwrap(), 100.0);
        assert!((forecast_skill(109.1, 143.6).unwrap() - 24.0).abs() < 0.05);
        assert!(forecast_skill(1.0, 0.0).is_err());
        assert!(forecast_skill(1.0, -2.0).is_err());
    }

    #[test]
    fn quantile_examples() {
        let t = vec![0.0; 100];
        let p: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        assert_eq!(quantile_abs_error(&p, &t, 0.95).unwrap(), 95.0);
        assert_eq!(quantile_abs_error(&[3.0; 7], &[1.0; 7], 0.95).unwrap(), 2.0);
        let mut rev = p.clone();
        rev.reverse();
        assert_eq!(quantile_abs_error(&rev, &t, 0.95).unwrap(), 95.0);
        assert!(quantile_abs_error(&[], &[], 0.95).is_err());
        assert!(quantile_abs_error(&[1.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn identical_series_align_diagonally() {
        let s = [3.0, 1.0, 1.0, 4.0, 1.0, 5.0];
        let p = dtw_align(&s, &s).unwrap();
        assert_eq!(p.vertices, (0..6).map(|k| (k, k)).collect::<Vec<_>>());
        let t = tdi(&s, &s).unwrap();
        assert_eq!((t.tdi, t.adv, t.late), (0.0, 0.0, 0.0));
    }

    #[test]
    fn delayed_forecast_is_late() {
        let target: Vec<f64> = (0..10).map(|k| (k * k) as f64).collect();
        let pred: Vec<f64> = (0..10).map(|k| target[k.max(2) - 2]).collect();
        let path = dtw_align(&pred, &target).unwrap();
        assert!(path.is_valid(10));
        let r = path.tdi(10);
        assert_eq!(r.adv, 0.0);
        assert!(r.late > 0.0);
        for &(i, j) in &path.vertices[3..path.vertices.len() - 3] {
            assert_eq!(i as isize - j as isize, 2);
        }
    }

    #[test]
    fn edge_path_has_full_distortion() {
        let n = 6;
        let mut v: Vec<(usize, usize)> = (0..n).map(|i| (i, 0)).collect();
        v.extend((1..n).map(|j| (n - 1, j)));
        let path = WarpPath { vertices: v };
        assert!(path.is_valid(n));
        let r = path.tdi(n);
        assert!((r.tdi - 100.0).abs() < 1e-12 && r.adv == 0.0);
    }

    #[test]
    fn too_short_for_dtw() {
        assert!(matches!(dtw_align(&[1.0], &[1.0]), Err(Error::Domain(_))));
        assert!(matches!(dtw_align(&[1.0, 2.0], &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn windows_skip_gaps() {
        use chrono::{TimeZone, Utc};
        let base = Utc.with_ymd_and_hms(2019, 1, 1, 10, 0, 0).unwrap();
        let mins = [0, 2, 4, 6, 10, 12, 14];
        let rows: Vec<ForecastRow> = mins
            .iter()
            .map(|&m| ForecastRow::new(base + chrono::Duration::minutes(m), 2, 0.0, 0.0))
            .collect();
        let refs: Vec<&ForecastRow> = rows.iter().collect();
        assert_eq!(window_starts(&refs, 3, 2), vec![0, 1, 4]);
        assert_eq!(window_starts(&refs, 5, 2), Vec::<usize>::new());
    }
}
