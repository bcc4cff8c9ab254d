//! SDF volume rendering: density conversion, even-bin sampling and alpha
//! compositing of color, features, opacity and expected depth per pixel.

pub mod composite;
pub mod density;
pub mod sampler;

pub use composite::{composite, expected_depth, CompositeWeights, RayAccumulator, OPACITY_THRESHOLD};
pub use density::{sdf_to_density, DensityParams};
pub use sampler::{sample_ray, RaySamples};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::camera::{CameraPose, Ray};
use crate::error::{ensure, Result};
use crate::field::Field;
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Per-pixel render outputs, row-major, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderBuffers<T> {
    pub width: usize,
    pub height: usize,
    pub feature_width: usize,
    /// `3 * width * height`, empty when color was not requested.
    pub color: Vec<T>,
    /// `feature_width * width * height`, empty when features were not requested.
    pub feature: Vec<T>,
    /// Unnormalised expected termination distance `sum w_i t_i`.
    pub depth: Vec<T>,
    pub opacity: Vec<T>,
    /// `opacity >= 0.5`.
    pub valid: Vec<bool>,
}

impl<T: Real> RenderBuffers<T> {
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Depth with invalid pixels replaced by `None`.
    pub fn depth_at(&self, i: usize, j: usize) -> Option<T> {
        let k = j * self.width + i;
        self.valid[k].then(|| self.depth[k])
    }

    pub fn has_color(&self) -> bool {
        !self.color.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions<T> {
    pub samples: usize,
    pub density: DensityParams<T>,
    pub seed: u64,
    pub color: bool,
    pub features: bool,
    /// Shade every sample as if seen from this direction instead of the
    /// ray direction.
    pub view_direction: Option<Vec3<T>>,
}

impl<T: Real> RenderOptions<T> {
    /// Depth and opacity only.
    pub fn geometry(samples: usize, alpha: T, seed: u64) -> Result<Self> {
        Ok(Self {
            samples,
            density: DensityParams::new(alpha)?,
            seed,
            color: false,
            features: false,
            view_direction: None,
        })
    }

    pub fn with_color(mut self, on: bool) -> Self {
        self.color = on;
        self
    }

    pub fn with_features(mut self, on: bool) -> Self {
        self.features = on;
        self
    }

    pub fn with_view_direction(mut self, v: Option<Vec3<T>>) -> Self {
        self.view_direction = v;
        self
    }
}

/// Generator for the jitter offset of pixel `index`. Counter-based, so the
/// result does not depend on how pixels are split across workers.
pub fn pixel_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

struct RayOutput<'a, T> {
    color: &'a mut [T],
    feature: &'a mut [T],
}

fn render_ray<T: Real, F: Field<T>>(
    field: &F,
    ray: &Ray<T>,
    samples: &RaySamples<T>,
    opts: &RenderOptions<T>,
    scratch: &mut F::Scratch,
    scratch_feature: &mut [T],
    out: RayOutput<'_, T>,
) -> (T, T) {
    let shading = opts.color || opts.features;
    let view = opts.view_direction.unwrap_or(ray.direction);
    let mut acc = RayAccumulator::default();
    let mut c = [T::zero(); 3];
    for i in 0..samples.len() {
        let t = samples.t(i);
        let x = ray.at(t);
        let d = if shading {
            field.shade(x, view, scratch, &mut c, scratch_feature)
        } else {
            field.sdf(x, scratch)
        };
        let sigma = sdf_to_density(d, opts.density);
        let (_, _, w) = acc.push(sigma, samples.interval(i), t);
        if opts.color {
            for (o, v) in out.color.iter_mut().zip(c) {
                *o += w * v;
            }
        }
        if opts.features {
            for (o, v) in out.feature.iter_mut().zip(scratch_feature.iter()) {
                *o += w * *v;
            }
        }
    }
    (acc.depth(), acc.opacity())
}

/// Renders `field` through `camera`, one jittered even-bin ray per pixel over
/// `[camera.near, camera.far]`. Rows are processed in parallel; the output is
/// bitwise independent of the worker count.
pub fn render<T: Real, F: Field<T>>(field: &F, camera: &CameraPose<T>, opts: &RenderOptions<T>) -> Result<RenderBuffers<T>> {
    camera.validate()?;
    ensure!(opts.samples >= 1, Parameter, "need at least one sample per ray");
    if let Some(v) = opts.view_direction {
        crate::field::network::check_unit(v)?;
    }
    // Validates the interval once so per-ray construction cannot fail.
    RaySamples::with_offset(camera.near, camera.far, opts.samples, T::zero())?;

    let (w, h) = (camera.width, camera.height);
    let fw = field.feature_width();
    let frame = camera.frame();
    let color_w = if opts.color { 3 } else { 0 };
    let feat_w = if opts.features { fw } else { 0 };

    let rows: Vec<_> = (0..h)
        .into_par_iter()
        .map(|j| {
            let mut scratch = field.scratch();
            let mut fbuf = vec![T::zero(); fw];
            let mut depth = Vec::with_capacity(w);
            let mut opacity = Vec::with_capacity(w);
            let mut color = vec![T::zero(); color_w * w];
            let mut feature = vec![T::zero(); feat_w * w];
            for i in 0..w {
                let ray = camera.ray(&frame, i, j);
                let mut rng = pixel_rng(opts.seed, j * w + i);
                let samples = RaySamples::sample(camera.near, camera.far, opts.samples, &mut rng)
                    .expect("interval validated above");
                let out = RayOutput {
                    color: &mut color[i * color_w..(i + 1) * color_w],
                    feature: &mut feature[i * feat_w..(i + 1) * feat_w],
                };
                let (d, o) = render_ray(field, &ray, &samples, opts, &mut scratch, &mut fbuf, out);
                depth.push(d);
                opacity.push(o);
            }
            (depth, opacity, color, feature)
        })
        .collect();

    let mut depth = Vec::with_capacity(w * h);
    let mut opacity = Vec::with_capacity(w * h);
    let mut color = Vec::with_capacity(color_w * w * h);
    let mut feature = Vec::with_capacity(feat_w * w * h);
    for (d, o, c, f) in rows {
        depth.extend(d);
        opacity.extend(o);
        color.extend(c);
        feature.extend(f);
    }

    let threshold = T::lit(OPACITY_THRESHOLD);
    let valid = opacity.iter().map(|o| *o >= threshold).collect();
    Ok(RenderBuffers { width: w, height: h, feature_width: fw, color, feature, depth, opacity, valid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Albedo, AnalyticScene, AnalyticSdf, ConstantField};

    fn cam(res: usize) -> CameraPose<f64> {
        CameraPose::from_angles(0.0, 0.0, 12.0, 0.88, 1.12, res, res).unwrap()
    }

    fn sphere(r: f64) -> AnalyticScene<f64> {
        AnalyticScene::new(AnalyticSdf::sphere(Vec3::zero(), r).unwrap(), Albedo::default())
    }

    #[test]
    fn empty_scene_is_transparent() {
        let opts = RenderOptions::geometry(24, 1e-3, 0).unwrap().with_color(true).with_features(true);
        let b = render(&ConstantField(1e3), &cam(16), &opts).unwrap();
        assert!(b.opacity.iter().all(|o| *o == 0.0));
        assert_eq!(b.valid_count(), 0);
        assert_eq!(b.color.len(), 3 * 256);
    }

    #[test]
    fn silhouette_matches_projected_circle() {
        let r = 0.1;
        let c = cam(64);
        // The density kernel blurs the edge by a few alpha; keep that well
        // under a pixel.
        let b = render(&sphere(r), &c, &RenderOptions::geometry(64, 1e-4, 7).unwrap()).unwrap();
        let frame = c.frame();
        // One pixel subtends about this much distance at the sphere.
        let band = 1.0 / c.focal_px();
        for j in 0..64 {
            for i in 0..64 {
                let ray = c.ray(&frame, i, j);
                let closest = (ray.origin - ray.direction * ray.origin.dot(ray.direction)).norm();
                let v = b.valid[j * 64 + i];
                if closest < r - band {
                    assert!(v, "pixel ({i},{j}) should be covered");
                } else if closest > r + band {
                    assert!(!v, "pixel ({i},{j}) should be background");
                }
            }
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let c = cam(24);
        let opts = RenderOptions::geometry(24, 1e-2, 3).unwrap().with_color(true);
        let scene = sphere(0.1);
        let a = render(&scene, &c, &opts).unwrap();
        let b = render(&scene, &c, &opts).unwrap();
        assert_eq!(a, b);
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let s = serial.install(|| render(&scene, &c, &opts).unwrap());
        assert_eq!(a, s);
        let other = render(&scene, &c, &RenderOptions { seed: 4, ..opts }).unwrap();
        assert_ne!(a.depth, other.depth);
    }

    #[test]
    fn central_depth_hits_sphere() {
        let c = cam(1);
        let b = render(&sphere(0.1), &c, &RenderOptions::geometry(128, 1e-3, 0).unwrap()).unwrap();
        let bin = 0.24 / 128.0;
        assert!(b.valid[0]);
        assert!((b.depth[0] - 0.9).abs() < bin, "depth {}", b.depth[0]);
    }

    #[test]
    fn rejects_bad_view_direction() {
        let opts = RenderOptions::geometry(4, 0.1, 0).unwrap().with_view_direction(Some(Vec3::new(0.0, 0.0, 2.0)));
        assert!(render(&ConstantField(1.0), &cam(2), &opts).is_err());
    }
}
