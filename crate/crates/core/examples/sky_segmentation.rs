//! Segment synthetic exposure pairs into the five sky classes.
//!
//! `cargo run --example sky_segmentation`

use skycast::geometry::CameraModel;
use skycast::segmentation::{segment, HytaConfig, SkyClass};
use skycast::synthetic::{sky_fixture, SkyScene};

fn main() -> skycast::Result<()> {
    let cam = CameraModel::centered(400, 300);
    let scenes = [
        ("clear", SkyScene::Clear { sun: (250.0, 110.0) }),
        ("overcast", SkyScene::Overcast),
        (
            "broken",
            SkyScene::Broken {
                clouds: vec![(150.0, 130.0, 35.0), (240.0, 190.0, 28.0)],
            },
        ),
    ];
    let out = std::env::temp_dir().join("skycast-segmentation");
    std::fs::create_dir_all(&out).map_err(|e| skycast::Error::io(&out, e))?;
    println!("{:<9} {:>9} {:>7} {}", "scene", "threshold", "relaxed", SkyClass::ALL.map(SkyClass::name).join(" "));
    for (name, scene) in &scenes {
        let fx = sky_fixture(&cam, scene);
        let seg = segment(&fx.long, &fx.short, fx.sun, &HytaConfig::default())?;
        let h = seg.map.histogram();
        println!(
            "{name:<9} {:>9.4} {:>7} {}",
            seg.threshold.value,
            seg.circumsolar_applied,
            h.map(|c| c.to_string()).join(" ")
        );
        seg.map.write_png(&out.join(format!("{name}_seg.png")))?;
    }
    println!("indexed PNGs in {}", out.display());
    Ok(())
}
