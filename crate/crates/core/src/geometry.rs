//! Equidistant fisheye geometry.
//!
//! The camera maps a sky direction at zenith angle `z` to a pixel at radial
//! distance `r = k * z` from the optical center, `k` being
//! [`CameraModel::radius_per_radian`]. Azimuth is measured clockwise from
//! image-up (north) towards image-right (east), so a pixel due right of the
//! center has azimuth π/2 when the camera roll is zero.
//!
//! The ground-parallel plane uses coordinates normalized by the plane
//! half-width `tan(max_zenith)`: a direction at zenith `z` lands at radius
//! `tan(z) / tan(max_zenith)`, with x pointing east and y pointing south so
//! plane images keep the orientation of the source frame.

use std::f64::consts::{FRAC_PI_2, TAU};

use image::{ImageBuffer, Pixel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{from_f64, sample_bilinear, sample_nearest};
use crate::segmentation::{SegMap, SkyClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub center: (f64, f64),
    pub radius_per_radian: f64,
    pub image_size: (u32, u32),
    pub max_zenith: f64,
    pub azimuth_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkyAngles {
    pub zenith: f64,
    pub azimuth: f64,
}

/// Point on the ground-parallel plane, normalized to the plane half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

pub const DEFAULT_MAX_ZENITH_DEG: f64 = 70.0;
pub const DEFAULT_OUT_SIZE: u32 = 128;

impl CameraModel {
    pub fn new(
        center: (f64, f64),
        radius_per_radian: f64,
        image_size: (u32, u32),
        max_zenith: f64,
        azimuth_offset: f64,
    ) -> Result<Self> {
        let cam = Self {
            center,
            radius_per_radian,
            image_size,
            max_zenith,
            azimuth_offset,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera whose dome exactly fills the shorter image side.
    pub fn centered(width: u32, height: u32) -> Self {
        let radius = (width.min(height) as f64 - 1.0) / 2.0;
        Self {
            center: ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0),
            radius_per_radian: radius / FRAC_PI_2,
            image_size: (width, height),
            max_zenith: DEFAULT_MAX_ZENITH_DEG.to_radians(),
            azimuth_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius_per_radian > 0.0 && self.radius_per_radian.is_finite()) {
            return Err(Error::Domain(format!(
                "radius_per_radian must be positive, got {}",
                self.radius_per_radian
            )));
        }
        if !(self.max_zenith > 0.0 && self.max_zenith < FRAC_PI_2) {
            return Err(Error::Domain(format!(
                "max_zenith must lie in (0, 90°), got {}°",
                self.max_zenith.to_degrees()
            )));
        }
        let (w, h) = self.image_size;
        let (cx, cy) = self.center;
        if !(cx >= 0.0 && cy >= 0.0 && cx <= w as f64 && cy <= h as f64) || w == 0 || h == 0 {
            return Err(Error::Domain(format!(
                "center ({cx}, {cy}) is outside the {w}x{h} image"
            )));
        }
        Ok(())
    }

    /// Radius of the horizon circle in pixels.
    pub fn dome_radius(&self) -> f64 {
        self.radius_per_radian * FRAC_PI_2
    }

    pub fn pixel_to_angles(&self, x: f64, y: f64) -> Result<SkyAngles> {
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        let r = dx.hypot(dy);
        if !(r <= self.dome_radius()) {
            return Err(Error::OutOfDome { x, y });
        }
        if r == 0.0 {
            return Ok(SkyAngles {
                zenith: 0.0,
                azimuth: 0.0,
            });
        }
        let zenith = r / self.radius_per_radian;
        let azimuth = wrap_angle(dx.atan2(-dy) - self.azimuth_offset);
        Ok(SkyAngles { zenith, azimuth })
    }

    pub fn angles_to_pixel(&self, a: SkyAngles) -> (f64, f64) {
        let r = a.zenith * self.radius_per_radian;
        let phi = a.azimuth + self.azimuth_offset;
        (self.center.0 + r * phi.sin(), self.center.1 - r * phi.cos())
    }

    pub fn angles_to_plane(&self, a: SkyAngles) -> Result<PlanePoint> {
        if !(a.zenith < self.max_zenith) {
            return Err(Error::OutOfPlane {
                zenith_deg: a.zenith.to_degrees(),
                max_deg: self.max_zenith.to_degrees(),
            });
        }
        let rho = a.zenith.tan() / self.max_zenith.tan();
        Ok(PlanePoint {
            x: rho * a.azimuth.sin(),
            y: -rho * a.azimuth.cos(),
        })
    }

    /// Inverse of [`angles_to_plane`](Self::angles_to_plane). Points outside
    /// the unit disk map beyond `max_zenith` and are still returned.
    pub fn plane_to_angles(&self, p: PlanePoint) -> SkyAngles {
        let rho = p.radius();
        if rho == 0.0 {
            return SkyAngles {
                zenith: 0.0,
                azimuth: 0.0,
            };
        }
        SkyAngles {
            zenith: (rho * self.max_zenith.tan()).atan(),
            azimuth: wrap_angle(p.x.atan2(-p.y)),
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Plane coordinates of the center of output pixel `(i, j)`.
pub fn plane_of_output_pixel(i: u32, j: u32, out_size: (u32, u32)) -> PlanePoint {
    PlanePoint {
        x: (i as f64 + 0.5) * 2.0 / out_size.0 as f64 - 1.0,
        y: (j as f64 + 0.5) * 2.0 / out_size.1 as f64 - 1.0,
    }
}

/// Continuous output-pixel coordinates of a plane point (inverse of
/// [`plane_of_output_pixel`]).
pub fn output_pixel_of_plane(p: PlanePoint, out_size: (u32, u32)) -> (f64, f64) {
    (
        (p.x + 1.0) * out_size.0 as f64 / 2.0 - 0.5,
        (p.y + 1.0) * out_size.1 as f64 / 2.0 - 0.5,
    )
}

/// Source pixel position sampled by output pixel `(i, j)`, or `None` when the
/// output pixel lies outside the projected dome.
fn source_of_output(cam: &CameraModel, i: u32, j: u32, out_size: (u32, u32)) -> Option<(f64, f64)> {
    let p = plane_of_output_pixel(i, j, out_size);
    if p.radius() >= 1.0 {
        return None;
    }
    let (sx, sy) = cam.angles_to_pixel(cam.plane_to_angles(p));
    if (sx - cam.center.0).hypot(sy - cam.center.1) > cam.dome_radius() {
        return None;
    }
    Some((sx, sy))
}

/// Resample a fisheye frame onto the ground-parallel plane with bilinear
/// interpolation. Pixels outside the dome are filled with zeros.
pub fn undistort_image<P>(
    img: &ImageBuffer<P, Vec<P::Subpixel>>,
    cam: &CameraModel,
    out_size: (u32, u32),
) -> Result<ImageBuffer<P, Vec<P::Subpixel>>>
where
    P: Pixel,
{
    if img.dimensions() != cam.image_size {
        return Err(Error::Shape(format!(
            "image is {}x{}, camera expects {}x{}",
            img.width(),
            img.height(),
            cam.image_size.0,
            cam.image_size.1
        )));
    }
    let channels = P::CHANNEL_COUNT as usize;
    let mut out = ImageBuffer::<P, Vec<P::Subpixel>>::new(out_size.0, out_size.1);
    let mut buf = vec![0.0; channels];
    for j in 0..out_size.1 {
        for i in 0..out_size.0 {
            let Some((sx, sy)) = source_of_output(cam, i, j, out_size) else {
                continue;
            };
            if sample_bilinear(img, sx, sy, &mut buf) {
                let px = out.get_pixel_mut(i, j).channels_mut();
                for c in 0..channels {
                    px[c] = from_f64(buf[c]);
                }
            }
        }
    }
    Ok(out)
}

/// Nearest-neighbour variant of [`undistort_image`] for label rasters.
/// Pixels outside the dome become [`SkyClass::Frame`].
pub fn undistort_labels(map: &SegMap, cam: &CameraModel, out_size: (u32, u32)) -> Result<SegMap> {
    if (map.width, map.height) != cam.image_size {
        return Err(Error::Shape(format!(
            "label map is {}x{}, camera expects {}x{}",
            map.width, map.height, cam.image_size.0, cam.image_size.1
        )));
    }
    let mut out = SegMap::filled(out_size.0, out_size.1, SkyClass::Frame);
    for j in 0..out_size.1 {
        for i in 0..out_size.0 {
            if let Some((sx, sy)) = source_of_output(cam, i, j, out_size) {
                if let Some((x, y)) = sample_nearest(map.width, map.height, sx, sy) {
                    out.set(i, j, map.get(x, y));
                }
            }
        }
    }
    Ok(out)
}

/// Inverse resampling: render a plane image as the fisheye camera would see
/// it. Fisheye pixels beyond `max_zenith` are left at zero.
pub fn distort_image<P>(
    plane: &ImageBuffer<P, Vec<P::Subpixel>>,
    cam: &CameraModel,
) -> ImageBuffer<P, Vec<P::Subpixel>>
where
    P: Pixel,
{
    let channels = P::CHANNEL_COUNT as usize;
    let plane_size = plane.dimensions();
    let (w, h) = cam.image_size;
    let mut out = ImageBuffer::<P, Vec<P::Subpixel>>::new(w, h);
    let mut buf = vec![0.0; channels];
    for y in 0..h {
        for x in 0..w {
            let Ok(angles) = cam.pixel_to_angles(x as f64, y as f64) else {
                continue;
            };
            let Ok(p) = cam.angles_to_plane(angles) else {
                continue;
            };
            let (px, py) = output_pixel_of_plane(p, plane_size);
            if sample_bilinear(plane, px, py, &mut buf) {
                let dst = out.get_pixel_mut(x, y).channels_mut();
                for c in 0..channels {
                    dst[c] = from_f64(buf[c]);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};
    use std::f64::consts::{FRAC_PI_4, PI};

    fn cam() -> CameraModel {
        CameraModel::new((200.0, 150.0), 180.0, (400, 300), 70f64.to_radians(), 0.0).unwrap()
    }

    #[test]
    fn center_maps_to_zenith() {
        let a = cam().pixel_to_angles(200.0, 150.0).unwrap();
        assert_eq!(a.zenith, 0.0);
        assert_eq!(a.azimuth, 0.0);
    }

    #[test]
    fn east_pixel_has_quarter_turn_azimuth() {
        let c = cam();
        let a = c
            .pixel_to_angles(200.0 + c.radius_per_radian * FRAC_PI_4, 150.0)
            .unwrap();
        assert!((a.zenith - FRAC_PI_4).abs() < 1e-15);
        assert!((a.azimuth - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn azimuth_offset_rotates_directions() {
        let mut c = cam();
        c.azimuth_offset = 0.3;
        let a = c.pixel_to_angles(250.0, 100.0).unwrap();
        let b = cam().pixel_to_angles(250.0, 100.0).unwrap();
        assert!((wrap_angle(b.azimuth - 0.3) - a.azimuth).abs() < 1e-12);
        let (x, y) = c.angles_to_pixel(a);
        assert!((x - 250.0).abs() < 1e-9 && (y - 100.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_dome_is_rejected() {
        let c = cam();
        let err = c.pixel_to_angles(200.0 + c.dome_radius() + 1.0, 150.0);
        assert!(matches!(err, Err(Error::OutOfDome { .. })));
    }

    #[test]
    fn equidistance_along_a_ray() {
        let c = cam();
        let a1 = c.pixel_to_angles(210.0, 160.0).unwrap();
        let a2 = c.pixel_to_angles(240.0, 190.0).unwrap();
        let dr = (30f64 * 30.0 * 2.0).sqrt();
        assert!(((a2.zenith - a1.zenith) - dr / c.radius_per_radian).abs() < 1e-12);
        assert!((a1.azimuth - a2.azimuth).abs() < 1e-12);
    }

    #[test]
    fn plane_radius_at_half_clip_angle() {
        let c = cam();
        let p = c
            .angles_to_plane(SkyAngles {
                zenith: 35f64.to_radians(),
                azimuth: 1.0,
            })
            .unwrap();
        let expected = 35f64.to_radians().tan() / 70f64.to_radians().tan();
        assert!((p.radius() - expected).abs() < 1e-15);
        assert!((p.radius() - 0.2549).abs() < 5e-5);
    }

    #[test]
    fn plane_rejects_beyond_clip() {
        let c = cam();
        let r = c.angles_to_plane(SkyAngles {
            zenith: c.max_zenith,
            azimuth: 0.0,
        });
        assert!(matches!(r, Err(Error::OutOfPlane { .. })));
        let origin = c
            .angles_to_plane(SkyAngles {
                zenith: 0.0,
                azimuth: 2.0,
            })
            .unwrap();
        assert_eq!(origin.radius(), 0.0);
    }

    #[test]
    fn plane_roundtrip() {
        let c = cam();
        for k in 0..50 {
            let a = SkyAngles {
                zenith: 0.01 + k as f64 * 0.02,
                azimuth: (k as f64 * 0.7) % (2.0 * PI),
            };
            let b = c.plane_to_angles(c.angles_to_plane(a).unwrap());
            assert!((a.zenith - b.zenith).abs() < 1e-12);
            assert!((a.azimuth - b.azimuth).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_cameras() {
        assert!(CameraModel::new((10.0, 10.0), 0.0, (20, 20), 1.0, 0.0).is_err());
        assert!(CameraModel::new((10.0, 10.0), 5.0, (20, 20), FRAC_PI_2, 0.0).is_err());
        assert!(CameraModel::new((30.0, 10.0), 5.0, (20, 20), 1.0, 0.0).is_err());
    }

    #[test]
    fn uniform_input_gives_uniform_dome() {
        let c = CameraModel::centered(101, 101);
        let img = RgbImage::from_pixel(101, 101, Rgb([40, 90, 200]));
        let out = undistort_image(&img, &c, (64, 64)).unwrap();
        for (i, j, px) in out.enumerate_pixels() {
            let inside = plane_of_output_pixel(i, j, (64, 64)).radius() < 1.0;
            if inside {
                assert_eq!(px.0, [40, 90, 200], "pixel {i},{j}");
            } else {
                assert_eq!(px.0, [0, 0, 0]);
            }
        }
    }

    #[test]
    fn output_center_equals_input_center() {
        let c = CameraModel::centered(101, 101);
        let img = RgbImage::from_fn(101, 101, |x, y| Rgb([(x * 2) as u8, (y * 2) as u8, 7]));
        let out = undistort_image(&img, &c, (129, 129)).unwrap();
        assert_eq!(out.get_pixel(64, 64), img.get_pixel(50, 50));
    }

    #[test]
    fn size_mismatch() {
        let c = CameraModel::centered(101, 101);
        let img = RgbImage::new(100, 101);
        assert!(matches!(undistort_image(&img, &c, (8, 8)), Err(Error::Shape(_))));
    }

    #[test]
    fn labels_use_nearest() {
        let c = CameraModel::centered(41, 41);
        let mut map = SegMap::filled(41, 41, SkyClass::Sky);
        for y in 0..41 {
            for x in 20..41 {
                map.set(x, y, SkyClass::Cloud);
            }
        }
        let out = undistort_labels(&map, &c, (32, 32)).unwrap();
        assert!(out.labels.iter().all(|&l| l <= 4));
        assert!(out.labels.contains(&(SkyClass::Cloud as u8)));
        assert!(out.labels.contains(&(SkyClass::Sky as u8)));
        assert!(out.labels.contains(&(SkyClass::Frame as u8)));
    }
}
