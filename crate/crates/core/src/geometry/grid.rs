//! Regular lattice of SDF samples.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::field::Field;
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Real> Bounds<T> {
    pub fn new(min: Vec3<T>, max: Vec3<T>) -> Result<Self> {
        let b = Self { min, max };
        b.validate()?;
        Ok(b)
    }

    /// `[-h, h]^3`.
    pub fn cube(h: T) -> Result<Self> {
        Self::new(Vec3::splat(-h), Vec3::splat(h))
    }

    /// Default extraction volume `0.55 * [-t_far, t_far]^3`.
    pub fn camera_shell(t_far: T) -> Result<Self> {
        Self::cube(T::lit(0.55) * t_far)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.min.is_finite() && self.max.is_finite(),
            Parameter,
            "bounds must be finite"
        );
        ensure!(
            self.max.x > self.min.x && self.max.y > self.min.y && self.max.z > self.min.z,
            Parameter,
            "bounds max must exceed min on every axis"
        );
        Ok(())
    }

    pub fn extent(&self) -> Vec3<T> {
        self.max - self.min
    }

    pub fn cast<U: Real>(&self) -> Bounds<U> {
        Bounds { min: self.min.cast(), max: self.max.cast() }
    }
}

/// `res^3` samples with `x` varying fastest:
/// `values[i + res * (j + res * k)]` is the SDF at lattice point `(i, j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfGrid<T> {
    resolution: usize,
    bounds: Bounds<T>,
    values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSidecar {
    dtype: String,
    endian: String,
    resolution: usize,
    bounds: Bounds<f64>,
    layout: String,
}

impl<T: Real> SdfGrid<T> {
    pub fn from_values(resolution: usize, bounds: Bounds<T>, values: Vec<T>) -> Result<Self> {
        ensure!(resolution >= 2, Parameter, "grid resolution must be at least 2, got {resolution}");
        bounds.validate()?;
        ensure!(
            values.len() == resolution.pow(3),
            Shape,
            "grid of resolution {resolution} needs {} values, got {}",
            resolution.pow(3),
            values.len()
        );
        ensure!(values.iter().all(|v| v.is_finite()), Evaluation, "grid contains non-finite SDF samples");
        Ok(Self { resolution, bounds, values })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn bounds(&self) -> Bounds<T> {
        self.bounds
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution * (j + self.resolution * k)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> T {
        self.values[self.index(i, j, k)]
    }

    /// Spacing between neighbouring lattice points along each axis.
    pub fn cell_size(&self) -> Vec3<T> {
        let n = T::from_usize_lossy(self.resolution - 1);
        let e = self.bounds.extent();
        Vec3::new(e.x / n, e.y / n, e.z / n)
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize, k: usize) -> Vec3<T> {
        lattice_point(&self.bounds, self.resolution, i, j, k)
    }

    /// Raw little-endian f32 samples plus a `.json` sidecar.
    pub fn save_raw(&self, path: &Path) -> Result<()> {
        let r = self.resolution;
        let mut bytes = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
        }
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let side = GridSidecar {
            dtype: "float32".into(),
            endian: "little".into(),
            resolution: r,
            bounds: self.bounds.cast(),
            layout: "x fastest, then y, then z".into(),
        };
        let side_path = crate::imageio::sidecar_path(path);
        std::fs::write(&side_path, serde_json::to_string_pretty(&side).expect("sidecar serialises"))
            .map_err(|e| Error::io(&side_path, e))
    }

    pub fn load_raw(path: &Path) -> Result<Self> {
        let side_path = crate::imageio::sidecar_path(path);
        let text = std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
        let side: GridSidecar =
            serde_json::from_str(&text).map_err(|source| Error::Json { path: side_path.clone(), source })?;
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if side.dtype != "float32" || side.endian != "little" || bytes.len() != side.resolution.pow(3) * 4 {
            return Err(Error::format(path, "grid data does not match its sidecar"));
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        Self::from_values(side.resolution, side.bounds.cast(), values)
    }

}

#[inline]
fn lattice_point<T: Real>(b: &Bounds<T>, res: usize, i: usize, j: usize, k: usize) -> Vec3<T> {
    let n = T::from_usize_lossy(res - 1);
    let e = b.extent();
    let f = |m: T, e: T, i: usize| m + e * T::from_usize_lossy(i) / n;
    Vec3::new(f(b.min.x, e.x, i), f(b.min.y, e.y, j), f(b.min.z, e.z, k))
}

/// Samples `field` on a `resolution^3` lattice spanning `bounds`, one
/// z-slab per task.
pub fn sample_grid<T: Real, F: Field<T>>(field: &F, bounds: Bounds<T>, resolution: usize) -> Result<SdfGrid<T>> {
    ensure!(resolution >= 2, Parameter, "grid resolution must be at least 2, got {resolution}");
    bounds.validate()?;
    let r = resolution;
    let mut values = vec![T::zero(); r * r * r];
    values.par_chunks_mut(r * r).enumerate().for_each(|(k, slab)| {
        let mut scratch = field.scratch();
        for j in 0..r {
            for i in 0..r {
                slab[i + r * j] = field.sdf(lattice_point(&bounds, r, i, j, k), &mut scratch);
            }
        }
    });
    SdfGrid::from_values(r, bounds, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{AnalyticSdf, ConstantField};

    #[test]
    fn center_sample_is_minus_radius() {
        let s = AnalyticSdf::sphere(Vec3::zero(), 0.25).unwrap();
        let g = sample_grid(&s, Bounds::cube(0.5).unwrap(), 3).unwrap();
        assert_eq!(g.at(1, 1, 1), -0.25);
        assert_eq!(g.point(2, 0, 1), Vec3::new(0.5, -0.5, 0.0));
    }

    #[test]
    fn constant_field_is_flat() {
        let g = sample_grid(&ConstantField(0.3), Bounds::cube(1.0).unwrap(), 5).unwrap();
        assert!(g.values().iter().all(|v| *v == 0.3));
    }

    #[test]
    fn matches_serial_evaluation() {
        let s = AnalyticSdf::torus(Vec3::new(0.05, 0.0, 0.0), 0.3, 0.1).unwrap();
        let b = Bounds::new(Vec3::new(-0.5, -0.4, -0.6), Vec3::new(0.5, 0.4, 0.3)).unwrap();
        let g = sample_grid(&s, b, 17).unwrap();
        for k in 0..17 {
            for j in 0..17 {
                for i in 0..17 {
                    assert_eq!(g.at(i, j, k), s.eval(g.point(i, j, k)));
                }
            }
        }
    }

    #[test]
    fn rejects_tiny_resolution() {
        assert!(sample_grid(&ConstantField(1.0), Bounds::cube(1.0).unwrap(), 1).is_err());
        assert!(Bounds::<f64>::cube(0.0).is_err());
    }

    #[test]
    fn raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.raw");
        let s = AnalyticSdf::sphere(Vec3::zero(), 0.25).unwrap();
        let g = sample_grid(&s, Bounds::cube(0.5).unwrap(), 4).unwrap();
        g.save_raw(&p).unwrap();
        let back = SdfGrid::<f64>::load_raw(&p).unwrap();
        assert_eq!(back.resolution(), 4);
        for (a, b) in g.values().iter().zip(back.values()) {
            assert_eq!(*a as f32, *b as f32);
        }
    }
}
