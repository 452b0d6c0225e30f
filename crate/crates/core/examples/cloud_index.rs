//! Cloud index of a drifting bright cloud over a darker ground.
//!
//! `cargo run --example cloud_index`

use skycast::satellite::{cloud_index, CloudIndexConfig};
use skycast::synthetic::radiance_stack;

fn main() -> skycast::Result<()> {
    let stack = radiance_stack(12, 3, 16, 40.0, 220.0, 15);
    let cfg = CloudIndexConfig::default();
    let (t, frame) = stack.frames().last().unwrap();
    let ci = cloud_index(&stack, t, &cfg)?;
    let cloudy = ci.values.data.iter().filter(|&&v| v > 0.5).count();
    println!(
        "{} frames; last at {t}: {cloudy} of {} pixels have CI > 0.5",
        stack.len(),
        frame.data.len()
    );
    for y in 0..16 {
        let row: String = (0..16)
            .map(|x| match ci.values.get(x, y) {
                v if v > 0.5 => '#',
                v if v > 0.0 => '+',
                _ => '.',
            })
            .collect();
        println!("  {row}");
    }
    let out = std::env::temp_dir().join("skycast-cloudindex");
    let p = ci.write(&out, &cfg)?;
    println!("wrote {}", p.display());
    Ok(())
}
