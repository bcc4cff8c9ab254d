//! Pinhole camera on the unit sphere looking at the origin.
//!
//! World axes: +y up, the frontal camera sits at +z. Azimuth rotates the
//! camera about +y, elevation lifts it toward +y. Pixel `(i, j)` has its
//! center at `(i + 0.5, j + 0.5)`, rows run top to bottom, and the principal
//! point is the image center. The field of view spans the image width.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<T> {
    pub origin: Vec3<T>,
    pub direction: Vec3<T>,
}

impl<T: Real> Ray<T> {
    pub fn at(&self, t: T) -> Vec3<T> {
        self.origin + self.direction * t
    }
}

/// Orthonormal camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraFrame<T> {
    pub center: Vec3<T>,
    pub forward: Vec3<T>,
    pub right: Vec3<T>,
    pub up: Vec3<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPose<T> {
    /// Radians about +y.
    pub azimuth: T,
    /// Radians above the xz plane.
    pub elevation: T,
    pub fov_deg: T,
    pub near: T,
    pub far: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> CameraPose<T> {
    pub fn from_angles(
        azimuth: T,
        elevation: T,
        fov_deg: T,
        near: T,
        far: T,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let cam = Self { azimuth, elevation, fov_deg, near, far, width, height };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.azimuth.is_finite(), Parameter, "azimuth must be finite");
        ensure!(
            self.elevation.abs() < T::FRAC_PI_2(),
            Parameter,
            "elevation {} must lie strictly inside (-pi/2, pi/2)",
            self.elevation
        );
        ensure!(
            self.fov_deg > T::zero() && self.fov_deg < T::lit(180.0),
            Parameter,
            "field of view {} must be in (0, 180) degrees",
            self.fov_deg
        );
        ensure!(
            self.near > T::zero() && self.far > self.near && self.far.is_finite(),
            Parameter,
            "need 0 < near < far, got [{}, {}]",
            self.near,
            self.far
        );
        ensure!(self.width > 0 && self.height > 0, Parameter, "image must be at least 1x1");
        Ok(())
    }

    /// Same pose, different image size.
    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn with_angles(mut self, azimuth: T, elevation: T) -> Self {
        self.azimuth = azimuth;
        self.elevation = elevation;
        self
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn center(&self) -> Vec3<T> {
        let (sa, ca) = self.azimuth.sin_cos();
        let (se, ce) = self.elevation.sin_cos();
        Vec3::new(sa * ce, se, ca * ce)
    }

    pub fn frame(&self) -> CameraFrame<T> {
        let center = self.center();
        let forward = -center;
        let world_up = Vec3::new(T::zero(), T::one(), T::zero());
        let right = forward.cross(world_up).normalize();
        let up = right.cross(forward);
        CameraFrame { center, forward, right, up }
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> T {
        let half = (self.fov_deg * T::lit(0.5)).to_radians();
        T::from_usize_lossy(self.width) * T::lit(0.5) / half.tan()
    }

    pub fn principal_point(&self) -> (T, T) {
        (T::from_usize_lossy(self.width) * T::lit(0.5), T::from_usize_lossy(self.height) * T::lit(0.5))
    }

    /// Unit ray direction through continuous image coordinates `(u, v)`.
    pub fn direction_through(&self, frame: &CameraFrame<T>, u: T, v: T) -> Vec3<T> {
        let f = self.focal_px();
        let (cx, cy) = self.principal_point();
        let x = (u - cx) / f;
        let y = (cy - v) / f;
        (frame.forward + frame.right * x + frame.up * y).normalize()
    }

    pub fn ray(&self, frame: &CameraFrame<T>, i: usize, j: usize) -> Ray<T> {
        let half = T::lit(0.5);
        let u = T::from_usize_lossy(i) + half;
        let v = T::from_usize_lossy(j) + half;
        Ray { origin: frame.center, direction: self.direction_through(frame, u, v) }
    }

    /// One ray per pixel in row-major order.
    pub fn generate_rays(&self) -> Vec<Ray<T>> {
        let frame = self.frame();
        (0..self.height)
            .flat_map(|j| (0..self.width).map(move |i| (i, j)))
            .map(|(i, j)| self.ray(&frame, i, j))
            .collect()
    }

    /// Continuous image coordinates of a world point and its distance along
    /// the optical axis. `None` for points at or behind the camera plane.
    pub fn project(&self, frame: &CameraFrame<T>, p: Vec3<T>) -> Option<(T, T, T)> {
        let d = p - frame.center;
        let z = d.dot(frame.forward);
        if z <= T::zero() {
            return None;
        }
        let f = self.focal_px();
        let (cx, cy) = self.principal_point();
        Some((cx + f * d.dot(frame.right) / z, cy - f * d.dot(frame.up) / z, z))
    }
}

/// Azimuth and elevation of a camera center on the unit sphere.
pub fn angles_of_center<T: Real>(c: Vec3<T>) -> (T, T) {
    let azimuth = c.x.atan2(c.z);
    let elevation = c.y.atan2((c.x * c.x + c.z * c.z).sqrt());
    (azimuth, elevation)
}

/// Zero-mean Gaussian pose prior over (azimuth, elevation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDistribution<T> {
    pub azimuth_std: T,
    pub elevation_std: T,
}

impl<T: Real> PoseDistribution<T> {
    pub fn new(azimuth_std: T, elevation_std: T) -> Result<Self> {
        ensure!(
            azimuth_std >= T::zero() && elevation_std >= T::zero(),
            Parameter,
            "pose standard deviations must be non-negative"
        );
        Ok(Self { azimuth_std, elevation_std })
    }

    /// FFHQ prior: 0.3 rad azimuth, 0.15 rad elevation.
    pub fn ffhq() -> Self {
        Self { azimuth_std: T::lit(0.3), elevation_std: T::lit(0.15) }
    }

    /// AFHQ prior: 0.15 rad on both angles.
    pub fn afhq() -> Self {
        Self { azimuth_std: T::lit(0.15), elevation_std: T::lit(0.15) }
    }

    /// Fixed side view used for consistency evaluation: 1.5 azimuth stds.
    pub fn side_view_azimuth(&self) -> T {
        T::lit(1.5) * self.azimuth_std
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (T, T) {
        let a: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        (self.azimuth_std * T::lit(a), self.elevation_std * T::lit(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn cam(az: f64, el: f64, w: usize, h: usize) -> CameraPose<f64> {
        CameraPose::from_angles(az, el, 12.0, 0.88, 1.12, w, h).unwrap()
    }

    fn close(a: Vec3<f64>, b: Vec3<f64>, tol: f64) -> bool {
        (a - b).max_abs() < tol
    }

    #[test]
    fn frontal_pose() {
        let f = cam(0.0, 0.0, 4, 4).frame();
        assert!(close(f.center, Vec3::new(0.0, 0.0, 1.0), 1e-15));
        assert!(close(f.forward, Vec3::new(0.0, 0.0, -1.0), 1e-15));
        assert!(close(f.right, Vec3::new(1.0, 0.0, 0.0), 1e-15));
        assert!(close(f.up, Vec3::new(0.0, 1.0, 0.0), 1e-15));
    }

    #[test]
    fn side_pose_center() {
        let c = cam(FRAC_PI_2, 0.0, 4, 4).center();
        assert!(close(c, Vec3::new(1.0, 0.0, 0.0), 1e-15));
    }

    #[test]
    fn focal_length_for_twelve_degrees() {
        let c = cam(0.0, 0.0, 64, 64);
        let expect = 32.0 / 6f64.to_radians().tan();
        assert!((c.focal_px() - expect).abs() < 1e-12);
    }

    #[test]
    fn single_pixel_ray_is_optical_axis() {
        let c = cam(0.3, -0.2, 1, 1);
        let rays = c.generate_rays();
        assert_eq!(rays.len(), 1);
        assert!(close(rays[0].direction, c.frame().forward, 1e-15));
        assert_eq!(rays[0].origin, c.center());
    }

    #[test]
    fn corner_ray_angle_matches_pinhole_geometry() {
        let (w, h) = (64, 48);
        let c = cam(0.0, 0.0, w, h);
        let f = c.focal_px();
        let ray = c.ray(&c.frame(), 0, 0);
        let dx = (0.5 - w as f64 / 2.0) / f;
        let dy = (h as f64 / 2.0 - 0.5) / f;
        let expect = (dx * dx + dy * dy).sqrt().atan();
        let got = ray.direction.dot(c.frame().forward).acos();
        assert!((got - expect).abs() < 1e-12);
        // Image edge at u = 0 sits exactly at half the field of view.
        let edge = c.direction_through(&c.frame(), 0.0, h as f64 / 2.0);
        assert!((edge.dot(c.frame().forward).acos() - 6f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn directions_are_unit_and_origin_projects_to_principal_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let c = cam(rng.random_range(-3.0..3.0), rng.random_range(-1.4..1.4), 17, 9);
            let frame = c.frame();
            for r in c.generate_rays() {
                assert!((r.direction.norm() - 1.0).abs() < 1e-9);
            }
            let (u, v, z) = c.project(&frame, Vec3::zero()).unwrap();
            assert!((u - 8.5).abs() < 1e-6 && (v - 4.5).abs() < 1e-6);
            assert!((z - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn angle_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (az, el) = (rng.random_range(-3.1..3.1), rng.random_range(-1.5..1.5));
            let (a, e) = angles_of_center(cam(az, el, 2, 2).center());
            assert!((a - az).abs() < 1e-9 && (e - el).abs() < 1e-9);
        }
    }

    #[test]
    fn mirrored_pixels_give_mirrored_directions() {
        let c = cam(0.0, 0.0, 10, 8);
        let frame = c.frame();
        for j in 0..8 {
            for i in 0..10 {
                let a = c.ray(&frame, i, j).direction;
                let b = c.ray(&frame, 9 - i, j).direction;
                assert!(close(a, Vec3::new(-b.x, b.y, b.z), 1e-15));
                let m = c.ray(&frame, i, 7 - j).direction;
                assert!(close(a, Vec3::new(m.x, -m.y, m.z), 1e-15));
            }
        }
    }

    #[test]
    fn projecting_a_ray_point_recovers_its_pixel() {
        let c = cam(0.4, 0.1, 32, 32);
        let frame = c.frame();
        let r = c.ray(&frame, 5, 27);
        let (u, v, _) = c.project(&frame, r.at(0.93)).unwrap();
        assert!((u - 5.5).abs() < 1e-9 && (v - 27.5).abs() < 1e-9);
    }

    #[test]
    fn invalid_cameras_are_rejected() {
        assert!(CameraPose::from_angles(0.0, 0.0, 0.0, 0.88, 1.12, 4, 4).is_err());
        assert!(CameraPose::from_angles(0.0, 0.0, 12.0, 1.2, 1.12, 4, 4).is_err());
        assert!(CameraPose::from_angles(0.0, 0.0, 12.0, 0.0, 1.12, 4, 4).is_err());
        assert!(CameraPose::from_angles(0.0, FRAC_PI_2, 12.0, 0.88, 1.12, 4, 4).is_err());
        assert!(CameraPose::from_angles(0.0, 0.0, 12.0, 0.88, 1.12, 0, 4).is_err());
    }

    #[test]
    fn pose_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let still = PoseDistribution::new(0.0, 0.0).unwrap();
        assert!((0..100).all(|_| still.sample(&mut rng) == (0.0, 0.0)));

        let ffhq = PoseDistribution::<f64>::ffhq();
        assert!((ffhq.side_view_azimuth() - 0.45).abs() < 1e-15);
        let n = 100_000;
        let draws: Vec<(f64, f64)> = (0..n).map(|_| ffhq.sample(&mut rng)).collect();
        let std = |f: &dyn Fn(&(f64, f64)) -> f64| {
            let m = draws.iter().map(f).sum::<f64>() / n as f64;
            (draws.iter().map(|d| (f(d) - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        assert!((std(&|d| d.0) / 0.3 - 1.0).abs() < 0.02);
        assert!((std(&|d| d.1) / 0.15 - 1.0).abs() < 0.02);
        assert!(PoseDistribution::new(-0.1, 0.0).is_err());
    }

    #[test]
    fn json_record_keys() {
        let c = cam(0.1, 0.2, 64, 32);
        let v: serde_json::Value = serde_json::to_value(c).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["azimuth", "elevation", "far", "fov_deg", "height", "near", "width"]);
        let back: CameraPose<f64> = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }
}
