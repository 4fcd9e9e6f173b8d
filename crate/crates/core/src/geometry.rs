//! Spherical projection of LiDAR scans into range images.
//!
//! Rows of a [`RangeImage`] run from the top of the vertical field of view
//! (`v = 0`) to the bottom; columns run clockwise seen from above, starting
//! at the `-x` axis (`u = 0`) and passing the forward `+x` axis at `u = w/2`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A point in the sensor frame: x forward, y left, z up, all in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Resolution, vertical field of view and valid range window of a scanner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorConfig {
    pub width: usize,
    pub height: usize,
    /// Angle above the horizon covered by the top beam, radians.
    pub fov_up: f64,
    /// Angle below the horizon covered by the bottom beam, radians.
    pub fov_down: f64,
    pub min_range: f64,
    pub max_range: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self::os1_64()
    }
}

impl SensorConfig {
    /// Velodyne HDL-32E style: 32 beams, +10.67 / -30.67 degrees.
    pub fn hdl32() -> Self {
        Self {
            width: 1024,
            height: 32,
            fov_up: 10.67_f64.to_radians(),
            fov_down: 30.67_f64.to_radians(),
            min_range: 0.5,
            max_range: 80.0,
        }
    }

    /// Velodyne HDL-64E style: 64 beams, +2.0 / -24.8 degrees.
    pub fn hdl64() -> Self {
        Self {
            width: 1024,
            height: 64,
            fov_up: 2.0_f64.to_radians(),
            fov_down: 24.8_f64.to_radians(),
            min_range: 0.5,
            max_range: 80.0,
        }
    }

    /// Ouster OS1-64 style: 64 beams, symmetric +-16.6 degrees.
    pub fn os1_64() -> Self {
        Self {
            width: 1024,
            height: 64,
            fov_up: 16.6_f64.to_radians(),
            fov_down: 16.6_f64.to_radians(),
            min_range: 0.5,
            max_range: 80.0,
        }
    }

    pub fn fov(&self) -> f64 {
        self.fov_up + self.fov_down
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.width == 0 || self.height == 0 {
            return bad(format!("image must be non-empty, got {}x{}", self.width, self.height));
        }
        if !(self.fov_up >= 0.0 && self.fov_down >= 0.0 && self.fov() > 0.0) {
            return bad(format!(
                "field of view must be non-negative with positive total, got up={} down={}",
                self.fov_up, self.fov_down
            ));
        }
        if !(self.min_range >= 0.0 && self.min_range < self.max_range) {
            return bad(format!(
                "range window must satisfy 0 <= min < max, got [{}, {}]",
                self.min_range, self.max_range
            ));
        }
        Ok(())
    }

    /// Horizontal angle covered by one column, radians.
    pub fn column_angle(&self) -> f64 {
        2.0 * PI / self.width as f64
    }

    /// Vertical angle covered by one row, radians.
    pub fn row_angle(&self) -> f64 {
        self.fov() / self.height as f64
    }

    /// Continuous image coordinates of a point, before discretization.
    /// Returns `None` for the origin.
    pub fn image_coords(&self, p: &Point3) -> Option<(f64, f64)> {
        let r = p.norm();
        if !(r > 0.0) {
            return None;
        }
        let yaw = p.y.atan2(p.x);
        let pitch = (p.z / r).clamp(-1.0, 1.0).asin();
        let u = 0.5 * (1.0 - yaw / PI) * self.width as f64;
        let v = (1.0 - (pitch + self.fov_down) / self.fov()) * self.height as f64;
        Some((u, v))
    }

    /// Pixel a point falls into, or `None` when it lies outside the vertical
    /// field of view.
    pub fn pixel_of(&self, p: &Point3) -> Option<(usize, usize)> {
        const FOV_SLACK: f64 = 1e-9;
        let r = p.norm();
        if !(r > 0.0) {
            return None;
        }
        let pitch = (p.z / r).clamp(-1.0, 1.0).asin();
        if pitch > self.fov_up + FOV_SLACK || pitch < -self.fov_down - FOV_SLACK {
            return None;
        }
        let (u, v) = self.image_coords(p)?;
        Some((self.discretize_u(u), self.discretize_v(v)))
    }

    fn discretize_u(&self, u: f64) -> usize {
        let w = self.width as f64;
        let mut col = u.floor();
        // atan2 returns -pi on the seam when y is -0.0; that column is 0.
        if col >= w {
            col -= w;
        }
        col.clamp(0.0, w - 1.0) as usize
    }

    fn discretize_v(&self, v: f64) -> usize {
        v.floor().clamp(0.0, self.height as f64 - 1.0) as usize
    }

    /// Azimuth and elevation of the ray through the center of pixel `(u, v)`.
    pub fn pixel_ray(&self, u: usize, v: usize) -> (f64, f64) {
        let azimuth = PI * (1.0 - 2.0 * (u as f64 + 0.5) / self.width as f64);
        let elevation = self.fov_up - (v as f64 + 0.5) * self.row_angle();
        (azimuth, elevation)
    }
}

/// Per-pixel range and sensor-frame coordinates of a projected scan.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    width: usize,
    height: usize,
    range: Vec<f64>,
    xyz: Vec<Point3>,
}

impl RangeImage {
    /// Range stored in pixels without a return.
    pub const INVALID: f64 = -1.0;

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            range: vec![Self::INVALID; width * height],
            xyz: vec![Point3::default(); width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    /// Range at `(u, v)`, or `None` for empty pixels. Panics out of bounds.
    #[inline]
    pub fn range(&self, u: usize, v: usize) -> Option<f64> {
        let r = self.range[self.index(u, v)];
        (r >= 0.0).then_some(r)
    }

    #[inline]
    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.range[self.index(u, v)] >= 0.0
    }

    /// Stored point at `(u, v)`; only meaningful for valid pixels.
    #[inline]
    pub fn point(&self, u: usize, v: usize) -> Point3 {
        self.xyz[self.index(u, v)]
    }

    /// Bounds-checked accessor returning the stored point and its range.
    pub fn pixel_point(&self, u: usize, v: usize) -> Result<Option<(Point3, f64)>> {
        if u >= self.width || v >= self.height {
            return Err(Error::OutOfBounds {
                u,
                v,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.range(u, v).map(|r| (self.point(u, v), r)))
    }

    /// Writes `p` into `(u, v)` unless a closer return is already stored.
    pub fn insert_closest(&mut self, u: usize, v: usize, p: Point3, r: f64) {
        let i = self.index(u, v);
        let cur = self.range[i];
        if cur < 0.0 || r < cur {
            self.range[i] = r;
            self.xyz[i] = p;
        }
    }

    pub fn valid_count(&self) -> usize {
        self.range.iter().filter(|r| **r >= 0.0).count()
    }

    /// Column index `u + offset` wrapped around the 360 degree seam.
    #[inline]
    pub fn wrap_u(&self, u: usize, offset: isize) -> usize {
        (u as isize + offset).rem_euclid(self.width as isize) as usize
    }
}

/// Projects a scan into a range image, keeping the closest return per pixel.
/// Points outside the vertical field of view or the range window are dropped.
pub fn project_scan(points: &[Point3], cfg: &SensorConfig) -> RangeImage {
    let mut img = RangeImage::empty(cfg.width, cfg.height);
    for p in points {
        if !p.is_finite() {
            continue;
        }
        let r = p.norm();
        if r < cfg.min_range || r > cfg.max_range || r == 0.0 {
            continue;
        }
        if let Some((u, v)) = cfg.pixel_of(p) {
            img.insert_closest(u, v, *p, r);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric(w: usize, h: usize) -> SensorConfig {
        SensorConfig {
            width: w,
            height: h,
            fov_up: 15f64.to_radians(),
            fov_down: 15f64.to_radians(),
            min_range: 0.5,
            max_range: 100.0,
        }
    }

    #[test]
    fn forward_point_lands_mid_image() {
        let cfg = symmetric(1024, 32);
        assert_eq!(cfg.pixel_of(&Point3::new(10.0, 0.0, 0.0)), Some((512, 16)));
    }

    #[test]
    fn top_of_fov_clamps_to_first_row() {
        let cfg = SensorConfig::hdl32();
        let r = 12.0;
        let p = Point3::new(r * cfg.fov_up.cos(), 0.0, r * cfg.fov_up.sin());
        assert_eq!(cfg.pixel_of(&p).map(|(_, v)| v), Some(0));
        let below = Point3::new(r * cfg.fov_down.cos(), 0.0, -r * cfg.fov_down.sin());
        assert_eq!(cfg.pixel_of(&below).map(|(_, v)| v), Some(cfg.height - 1));
    }

    #[test]
    fn seam_maps_to_column_zero() {
        let cfg = symmetric(1024, 32);
        assert_eq!(cfg.pixel_of(&Point3::new(-5.0, 0.0, 0.0)).unwrap().0, 0);
        assert_eq!(cfg.pixel_of(&Point3::new(-5.0, -0.0, 0.0)).unwrap().0, 0);
    }

    #[test]
    fn closest_return_wins() {
        let cfg = symmetric(1024, 32);
        let img = project_scan(
            &[Point3::new(7.0, 0.0, 0.0), Point3::new(5.0, 0.0, 0.0)],
            &cfg,
        );
        let (p, r) = img.pixel_point(512, 16).unwrap().unwrap();
        assert_eq!(r, 5.0);
        assert_eq!(p, Point3::new(5.0, 0.0, 0.0));
        assert_eq!(img.valid_count(), 1);
    }

    #[test]
    fn generic_point_matches_golden_value() {
        // Continuous coordinates evaluated with 50-digit arithmetic (mpmath).
        let cfg = SensorConfig {
            width: 900,
            height: 32,
            fov_up: 10.67f64.to_radians(),
            fov_down: 30.67f64.to_radians(),
            min_range: 0.5,
            max_range: 100.0,
        };
        let above = Point3::new(3.0, 4.0, 1.0);
        let (u, v) = cfg.image_coords(&above).unwrap();
        assert!((u - 317.174_744_114_610_05).abs() < 1e-9, "u = {u}");
        assert!((v + 0.495_351_697_354_785_2).abs() < 1e-9, "v = {v}");
        // 11.3 degrees of pitch is above the 10.67 degree upper edge.
        assert_eq!(cfg.pixel_of(&above), None);

        let below = Point3::new(3.0, 4.0, -1.0);
        let (u, v) = cfg.image_coords(&below).unwrap();
        assert!((u - 317.174_744_114_610_05).abs() < 1e-9, "u = {u}");
        assert!((v - 17.013_977_725_414_775).abs() < 1e-9, "v = {v}");
        assert_eq!(cfg.pixel_of(&below), Some((317, 17)));
    }

    #[test]
    fn out_of_window_points_are_dropped() {
        let cfg = symmetric(64, 16);
        let img = project_scan(
            &[
                Point3::new(0.1, 0.0, 0.0),
                Point3::new(200.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 5.0),
                Point3::new(f64::NAN, 0.0, 0.0),
            ],
            &cfg,
        );
        assert_eq!(img.valid_count(), 0);
    }

    #[test]
    fn pixel_point_bounds_and_empty() {
        let cfg = symmetric(64, 16);
        let img = project_scan(&[], &cfg);
        assert!(img.pixel_point(3, 3).unwrap().is_none());
        assert!(matches!(
            img.pixel_point(64, 0),
            Err(Error::OutOfBounds { u: 64, .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SensorConfig::hdl64().validate().is_ok());
        let mut c = SensorConfig::hdl64();
        c.width = 0;
        assert!(c.validate().is_err());
        let mut c = SensorConfig::hdl64();
        c.min_range = 100.0;
        assert!(c.validate().is_err());
        let mut c = SensorConfig::hdl64();
        c.fov_up = 0.0;
        c.fov_down = 0.0;
        assert!(c.validate().is_err());
    }
}
