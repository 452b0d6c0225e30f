//! Project a synthetic fisheye frame onto the ground-parallel plane and back.
//!
//! `cargo run --example fisheye_undistort`

use skycast::geometry::{distort_image, undistort_image, CameraModel, SkyAngles};
use skycast::synthetic::{sky_fixture, SkyScene};

fn main() -> skycast::Result<()> {
    let cam = CameraModel::centered(640, 480);
    println!("dome radius {:.1} px, clip {:.0} deg", cam.dome_radius(), cam.max_zenith.to_degrees());

    for (zen, az) in [(0.0, 0.0), (30.0, 0.0), (30.0, 90.0), (60.0, 225.0)] {
        let a = SkyAngles {
            zenith: f64::to_radians(zen),
            azimuth: f64::to_radians(az),
        };
        let (x, y) = cam.angles_to_pixel(a);
        let p = cam.angles_to_plane(a)?;
        println!("zenith {zen:>4} azimuth {az:>5} -> pixel ({x:7.2}, {y:7.2}) plane ({:+.4}, {:+.4})", p.x, p.y);
    }

    let fx = sky_fixture(
        &cam,
        &SkyScene::Broken {
            clouds: vec![(260.0, 200.0, 40.0), (380.0, 300.0, 25.0)],
        },
    );
    let plane = undistort_image(&fx.long, &cam, (128, 128))?;
    let back = distort_image(&plane, &cam);
    let out = std::env::temp_dir().join("skycast-undistort");
    std::fs::create_dir_all(&out).map_err(|e| skycast::Error::io(&out, e))?;
    fx.long.save(out.join("fisheye.png"))?;
    plane.save(out.join("plane.png"))?;
    back.save(out.join("redistorted.png"))?;
    println!("wrote fisheye.png, plane.png and redistorted.png to {}", out.display());
    Ok(())
}
