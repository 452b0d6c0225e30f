//! Temporal Distortion Index of lagging and leading forecasts.
//!
//! `cargo run --example temporal_distortion`

use skycast::metrics::{dtw_align, tdi};

fn ramp(n: usize, shift: isize) -> Vec<f64> {
    (0..n as isize)
        .map(|i| if i - shift >= n as isize / 2 { 800.0 } else { 200.0 })
        .collect()
}

fn main() -> skycast::Result<()> {
    let n = 20;
    let target = ramp(n, 0);
    for shift in [-3, -1, 0, 1, 3] {
        let pred = ramp(n, shift);
        let r = tdi(&pred, &target)?;
        println!("shift {shift:+}: TDI {:5.2}%  advance {:5.2}%  late {:5.2}%", r.tdi, r.adv, r.late);
    }
    let path = dtw_align(&ramp(8, 2), &ramp(8, 0))?;
    println!("warping path of a 2-step lag: {:?}", path.vertices);
    Ok(())
}
