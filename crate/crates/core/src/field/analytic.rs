//! Closed-form signed distance functions used as oracles and as the target
//! of sphere initialization.

use serde::{Deserialize, Serialize};

use super::Field;
use crate::error::{ensure, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Exact SDF of a simple primitive. Negative inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum AnalyticSdf<T> {
    Sphere { center: Vec3<T>, radius: T },
    Box { center: Vec3<T>, half_extents: Vec3<T> },
    /// Torus around the y axis.
    Torus { center: Vec3<T>, major_radius: T, minor_radius: T },
}

impl<T: Real> AnalyticSdf<T> {
    pub fn sphere(center: Vec3<T>, radius: T) -> Result<Self> {
        Self::Sphere { center, radius }.validated()
    }

    pub fn cuboid(center: Vec3<T>, half_extents: Vec3<T>) -> Result<Self> {
        Self::Box { center, half_extents }.validated()
    }

    pub fn torus(center: Vec3<T>, major_radius: T, minor_radius: T) -> Result<Self> {
        Self::Torus { center, major_radius, minor_radius }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            Self::Sphere { center, radius } => {
                ensure!(center.is_finite(), Parameter, "sphere center must be finite");
                ensure!(radius > T::zero() && radius.is_finite(), Parameter, "sphere radius must be positive, got {radius}");
            }
            Self::Box { center, half_extents: h } => {
                ensure!(center.is_finite(), Parameter, "box center must be finite");
                ensure!(
                    h.x > T::zero() && h.y > T::zero() && h.z > T::zero() && h.is_finite(),
                    Parameter,
                    "box half extents must be positive"
                );
            }
            Self::Torus { center, major_radius, minor_radius } => {
                ensure!(center.is_finite(), Parameter, "torus center must be finite");
                ensure!(
                    minor_radius > T::zero() && major_radius > minor_radius && major_radius.is_finite(),
                    Parameter,
                    "torus needs 0 < minor < major, got {minor_radius}, {major_radius}"
                );
            }
        }
        Ok(self)
    }

    pub fn eval(&self, x: Vec3<T>) -> T {
        match *self {
            Self::Sphere { center, radius } => (x - center).norm() - radius,
            Self::Box { center, half_extents } => {
                let p = (x - center).map(T::abs);
                let q = p - half_extents;
                let outside = q.map(|c| c.max(T::zero())).norm();
                let inside = q.x.max(q.y).max(q.z).min(T::zero());
                outside + inside
            }
            Self::Torus { center, major_radius, minor_radius } => {
                let p = x - center;
                let ring = (p.x * p.x + p.z * p.z).sqrt() - major_radius;
                (ring * ring + p.y * p.y).sqrt() - minor_radius
            }
        }
    }

    pub fn cast<U: Real>(&self) -> AnalyticSdf<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        match *self {
            Self::Sphere { center, radius } => AnalyticSdf::Sphere { center: center.cast(), radius: c(radius) },
            Self::Box { center, half_extents } => {
                AnalyticSdf::Box { center: center.cast(), half_extents: half_extents.cast() }
            }
            Self::Torus { center, major_radius, minor_radius } => AnalyticSdf::Torus {
                center: center.cast(),
                major_radius: c(major_radius),
                minor_radius: c(minor_radius),
            },
        }
    }
}

/// Surface color assigned to an analytic scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Albedo<T> {
    Constant { rgb: [T; 3] },
    /// `clamp(0.5 + scale * x, 0, 1)` per channel; smooth and view independent.
    Position { scale: T },
}

impl<T: Real> Albedo<T> {
    pub fn eval(&self, x: Vec3<T>) -> [T; 3] {
        match *self {
            Self::Constant { rgb } => rgb,
            Self::Position { scale } => {
                let half = T::lit(0.5);
                [x.x, x.y, x.z].map(|c| (half + scale * c).max(T::zero()).min(T::one()))
            }
        }
    }
}

impl<T: Real> Default for Albedo<T> {
    fn default() -> Self {
        Self::Position { scale: T::lit(2.0) }
    }
}

/// Analytic SDF paired with a color function, renderable like a network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticScene<T> {
    pub sdf: AnalyticSdf<T>,
    pub albedo: Albedo<T>,
}

impl<T: Real> AnalyticScene<T> {
    pub fn new(sdf: AnalyticSdf<T>, albedo: Albedo<T>) -> Self {
        Self { sdf, albedo }
    }
}

impl<T: Real> Field<T> for AnalyticScene<T> {
    type Scratch = ();

    fn scratch(&self) {}

    fn feature_width(&self) -> usize {
        0
    }

    fn sdf(&self, x: Vec3<T>, _: &mut ()) -> T {
        self.sdf.eval(x)
    }

    fn shade(&self, x: Vec3<T>, _v: Vec3<T>, _: &mut (), color: &mut [T; 3], _feature: &mut [T]) -> T {
        *color = self.albedo.eval(x);
        self.sdf.eval(x)
    }
}

/// Bare shape, shaded with the default albedo.
impl<T: Real> Field<T> for AnalyticSdf<T> {
    type Scratch = ();

    fn scratch(&self) {}

    fn feature_width(&self) -> usize {
        0
    }

    fn sdf(&self, x: Vec3<T>, _: &mut ()) -> T {
        self.eval(x)
    }

    fn shade(&self, x: Vec3<T>, _v: Vec3<T>, _: &mut (), color: &mut [T; 3], _feature: &mut [T]) -> T {
        *color = Albedo::default().eval(x);
        self.eval(x)
    }
}

/// Spatially constant SDF; a large positive value stands in for empty space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantField<T>(pub T);

impl<T: Real> Field<T> for ConstantField<T> {
    type Scratch = ();

    fn scratch(&self) {}

    fn feature_width(&self) -> usize {
        0
    }

    fn sdf(&self, _: Vec3<T>, _: &mut ()) -> T {
        self.0
    }

    fn shade(&self, _: Vec3<T>, _: Vec3<T>, _: &mut (), color: &mut [T; 3], _: &mut [T]) -> T {
        *color = [T::zero(); 3];
        self.0
    }
}
