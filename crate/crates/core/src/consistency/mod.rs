//! View-consistency metrics: depth unprojection, a median-based Chamfer
//! distance and depth-guided color reprojection.

pub mod nn;

pub use nn::{brute_force_nearest, PointIndex};

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::CameraPose;
use crate::error::{ensure, Error, Result};
use crate::field::Field;
use crate::imageio::write_gray_png;
use crate::render::{render, RaySamples, RenderBuffers, RenderOptions};
use crate::scalar::{lower_median, Real};
use crate::vec3::Vec3;

/// World points of the valid pixels of a depth map.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthPointCloud<T> {
    pub points: Vec<Vec3<T>>,
    /// Row-major source pixel of each point.
    pub pixels: Vec<usize>,
    pub camera: CameraPose<T>,
}

impl<T: Real> DepthPointCloud<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `origin + depth * direction` for every pixel flagged valid.
pub fn unproject_depth<T: Real>(depth: &[T], valid: &[bool], camera: &CameraPose<T>) -> Result<DepthPointCloud<T>> {
    camera.validate()?;
    let n = camera.pixel_count();
    ensure!(
        depth.len() == n && valid.len() == n,
        Shape,
        "depth/mask of {}/{} pixels for a {}x{} camera",
        depth.len(),
        valid.len(),
        camera.width,
        camera.height
    );
    let frame = camera.frame();
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for (k, (d, v)) in depth.iter().zip(valid).enumerate() {
        if *v {
            let ray = camera.ray(&frame, k % camera.width, k / camera.width);
            points.push(ray.at(*d));
            pixels.push(k);
        }
    }
    Ok(DepthPointCloud { points, pixels, camera: *camera })
}

pub fn unproject<T: Real>(buffers: &RenderBuffers<T>, camera: &CameraPose<T>) -> Result<DepthPointCloud<T>> {
    ensure!(
        buffers.width == camera.width && buffers.height == camera.height,
        Shape,
        "{}x{} buffers for a {}x{} camera",
        buffers.width,
        buffers.height,
        camera.width,
        camera.height
    );
    unproject_depth(&buffers.depth, &buffers.valid, camera)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChamferResult {
    /// Sum of the two median terms, in squared bin units.
    pub value: f64,
    /// Squared nearest distance in bin units from each point of the first
    /// cloud to the second.
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
}

/// `med_x min_y |x - y|^2 + med_y min_x |x - y|^2` with distances divided by
/// `bin_size` before squaring. Even counts take the lower median.
pub fn modified_chamfer<T: Real>(s1: &[Vec3<T>], s2: &[Vec3<T>], bin_size: T) -> Result<ChamferResult> {
    ensure!(!s1.is_empty() && !s2.is_empty(), Precondition, "modified Chamfer needs two non-empty clouds");
    ensure!(bin_size > T::zero(), Parameter, "bin size must be positive");
    let b2 = bin_size * bin_size;
    let one_way = |from: &[Vec3<T>], to: &[Vec3<T>]| -> Vec<T> {
        let idx = PointIndex::new(to);
        from.par_iter().map(|q| idx.nearest_squared(*q) / b2).collect()
    };
    let f = one_way(s1, s2);
    let b = one_way(s2, s1);
    let mf = lower_median(&f).expect("non-empty");
    let mb = lower_median(&b).expect("non-empty");
    Ok(ChamferResult {
        value: (mf + mb).to_f64_lossy(),
        forward: f.iter().map(|v| v.to_f64_lossy()).collect(),
        backward: b.iter().map(|v| v.to_f64_lossy()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReprojectOptions<'a, T> {
    /// Depth and validity of the destination view. When given, pixels
    /// where that depth is nearer than the splatted one by more than
    /// `occlusion_threshold` are flagged occluded.
    pub dst_depth: Option<(&'a [T], &'a [bool])>,
    pub occlusion_threshold: T,
}

impl<T: Real> ReprojectOptions<'_, T> {
    pub fn without_occlusion() -> Self {
        Self { dst_depth: None, occlusion_threshold: T::infinity() }
    }
}

impl<'a, T: Real> ReprojectOptions<'a, T> {
    /// Occlusion test at twice the volume bin size.
    pub fn with_occlusion(depth: &'a [T], valid: &'a [bool], bin_size: T) -> Self {
        Self { dst_depth: Some((depth, valid)), occlusion_threshold: T::lit(2.0) * bin_size }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reprojection<T> {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<T>,
    /// Distance from the destination camera center to the splatted point.
    pub depth: Vec<T>,
    pub coverage: Vec<bool>,
    pub occluded: Vec<bool>,
    pub source_index: Vec<Option<usize>>,
}

impl<T: Real> Reprojection<T> {
    /// Covered and not occluded.
    pub fn visible_mask(&self) -> Vec<bool> {
        self.coverage.iter().zip(&self.occluded).map(|(c, o)| *c && !*o).collect()
    }
}

/// Continuous destination coordinates `(u, v, distance)` of every valid
/// source pixel; `None` for invalid pixels and points behind the camera.
pub fn warp_coordinates<T: Real>(
    src_depth: &[T],
    src_valid: &[bool],
    src_cam: &CameraPose<T>,
    dst_cam: &CameraPose<T>,
) -> Result<Vec<Option<(T, T, T)>>> {
    dst_cam.validate()?;
    let cloud = unproject_depth(src_depth, src_valid, src_cam)?;
    let frame = dst_cam.frame();
    let mut out = vec![None; src_cam.pixel_count()];
    for (p, k) in cloud.points.iter().zip(&cloud.pixels) {
        out[*k] = dst_cam.project(&frame, *p).map(|(u, v, _)| (u, v, (*p - frame.center).norm()));
    }
    Ok(out)
}

/// Forward-warps `src_rgb` into `dst_cam` using `src_depth`: every valid
/// source pixel is splatted onto the destination pixel containing its
/// projection, keeping the nearest point per pixel.
pub fn reproject<T: Real>(
    src_depth: &[T],
    src_valid: &[bool],
    src_rgb: &[T],
    src_cam: &CameraPose<T>,
    dst_cam: &CameraPose<T>,
    opts: &ReprojectOptions<'_, T>,
) -> Result<Reprojection<T>> {
    ensure!(src_rgb.len() == 3 * src_cam.pixel_count(), Shape, "source rgb does not match the source camera");
    let coords = warp_coordinates(src_depth, src_valid, src_cam, dst_cam)?;
    let (w, h) = (dst_cam.width, dst_cam.height);
    let n = w * h;
    let mut depth = vec![T::infinity(); n];
    let mut source_index: Vec<Option<usize>> = vec![None; n];
    for (k, c) in coords.iter().enumerate() {
        let Some((u, v, dist)) = *c else { continue };
        if !(u >= T::zero() && v >= T::zero()) {
            continue;
        }
        let (i, j) = (u.floor().to_usize().unwrap_or(usize::MAX), v.floor().to_usize().unwrap_or(usize::MAX));
        if i >= w || j >= h {
            continue;
        }
        let t = j * w + i;
        // Ties go to the lower source index, which is visited first.
        if dist < depth[t] {
            depth[t] = dist;
            source_index[t] = Some(k);
        }
    }
    let mut rgb = vec![T::zero(); 3 * n];
    let mut coverage = vec![false; n];
    for t in 0..n {
        if let Some(k) = source_index[t] {
            coverage[t] = true;
            rgb[3 * t..3 * t + 3].copy_from_slice(&src_rgb[3 * k..3 * k + 3]);
        } else {
            depth[t] = T::zero();
        }
    }
    let mut occluded = vec![false; n];
    if let Some((dd, dv)) = opts.dst_depth {
        ensure!(dd.len() == n && dv.len() == n, Shape, "destination depth does not match the destination camera");
        for t in 0..n {
            occluded[t] = coverage[t] && dv[t] && dd[t] + opts.occlusion_threshold < depth[t];
        }
    }
    Ok(Reprojection { width: w, height: h, rgb, depth, coverage, occluded, source_index })
}

/// Mean absolute RGB difference per pixel on the 0-255 scale; `None`
/// outside `mask`.
pub fn l1_map<T: Real>(warped: &[T], reference: &[T], mask: &[bool]) -> Result<Vec<Option<f64>>> {
    ensure!(
        warped.len() == reference.len() && warped.len() == 3 * mask.len(),
        Shape,
        "image and mask sizes differ"
    );
    Ok(mask
        .iter()
        .enumerate()
        .map(|(t, m)| {
            m.then(|| {
                (0..3)
                    .map(|c| (warped[3 * t + c] - reference[3 * t + c]).abs().to_f64_lossy() * 255.0)
                    .sum::<f64>()
                    / 3.0
            })
        })
        .collect())
}

/// Lower median of the per-pixel L1 errors over `mask`.
pub fn reprojection_error<T: Real>(warped: &[T], reference: &[T], mask: &[bool]) -> Result<f64> {
    let errs: Vec<f64> = l1_map(warped, reference, mask)?.into_iter().flatten().collect();
    ensure!(!errs.is_empty(), Precondition, "reprojection mask is empty");
    Ok(lower_median(&errs).expect("non-empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub samples: usize,
    pub resolution: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Mask destination pixels hidden behind nearer geometry.
    pub occlusion: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { samples: 128, resolution: 128, alpha: 1e-3, seed: 0, occlusion: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub chamfer: f64,
    pub bin_size: f64,
    pub frontal_camera: CameraPose<f64>,
    pub side_camera: CameraPose<f64>,
    pub frontal_valid_fraction: f64,
    pub side_valid_fraction: f64,
    /// Lower median L1 (0-255) of the side view warped into the frontal
    /// view against the frontal render, over visible pixels.
    pub reprojection_median_l1: Option<f64>,
    pub reprojection_pixels: usize,
    pub options: EvalOptions,
    /// Squared nearest distances in bin units, one per cloud point.
    pub frontal_nn: Vec<f64>,
    pub side_nn: Vec<f64>,
    #[serde(skip)]
    pub frontal_pixels: Vec<usize>,
    #[serde(skip)]
    pub side_pixels: Vec<usize>,
    #[serde(skip)]
    pub l1: Vec<Option<f64>>,
}

impl ConsistencyReport {
    /// Report without the per-point arrays, for compact listings.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "chamfer": self.chamfer,
            "bin_size": self.bin_size,
            "frontal_valid_fraction": self.frontal_valid_fraction,
            "side_valid_fraction": self.side_valid_fraction,
            "reprojection_median_l1": self.reprojection_median_l1,
            "reprojection_pixels": self.reprojection_pixels,
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("report serialises");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Nearest-neighbour distance (bin units, `sqrt` of the stored squares)
    /// over the frontal image, scaled so `max_bins` is white.
    pub fn write_nn_png(&self, path: &Path, max_bins: f64) -> Result<()> {
        let c = &self.frontal_camera;
        let mut img = vec![0.0; c.pixel_count()];
        for (k, d) in self.frontal_pixels.iter().zip(&self.frontal_nn) {
            img[*k] = d.sqrt();
        }
        write_gray_png(path, c.width, c.height, &img, 0.0, max_bins)
    }

    /// Per-pixel reprojection L1 over the frontal image, `max_l1` is white.
    pub fn write_l1_png(&self, path: &Path, max_l1: f64) -> Result<()> {
        let c = &self.frontal_camera;
        let img: Vec<f64> = self.l1.iter().map(|v| v.unwrap_or(0.0)).collect();
        write_gray_png(path, c.width, c.height, &img, 0.0, max_l1)
    }
}

/// Renders `field` from both cameras at the evaluation resolution, drops
/// rays below the opacity threshold, and compares the two depth clouds and
/// the side view warped into the frontal one.
pub fn evaluate_pair<T: Real, F: Field<T>>(
    field: &F,
    frontal: &CameraPose<T>,
    side: &CameraPose<T>,
    opts: &EvalOptions,
) -> Result<ConsistencyReport> {
    let res = opts.resolution;
    let front = frontal.with_resolution(res, res);
    let side = side.with_resolution(res, res);
    let ropts = RenderOptions::geometry(opts.samples, T::lit(opts.alpha), opts.seed)?.with_color(true);
    let bf = render(field, &front, &ropts)?;
    let bs = render(field, &side, &RenderOptions { seed: opts.seed.wrapping_add(1), ..ropts })?;
    let bin = RaySamples::with_offset(front.near, front.far, opts.samples, T::zero())?.bin_size();

    let cf = unproject(&bf, &front)?;
    let cs = unproject(&bs, &side)?;
    if cf.is_empty() || cs.is_empty() {
        return Err(Error::Evaluation(format!(
            "no ray reached opacity 0.5 (frontal {} valid, side {} valid)",
            cf.len(),
            cs.len()
        )));
    }
    let ch = modified_chamfer(&cf.points, &cs.points, bin)?;

    let ro = if opts.occlusion {
        ReprojectOptions::with_occlusion(&bf.depth, &bf.valid, bin)
    } else {
        ReprojectOptions::without_occlusion()
    };
    let warp = reproject(&bs.depth, &bs.valid, &bs.color, &side, &front, &ro)?;
    let mask: Vec<bool> = warp.visible_mask().iter().zip(&bf.valid).map(|(a, b)| *a && *b).collect();
    let l1 = l1_map(&warp.rgb, &bf.color, &mask)?;
    let errs: Vec<f64> = l1.iter().flatten().copied().collect();

    let n = (res * res) as f64;
    Ok(ConsistencyReport {
        chamfer: ch.value,
        bin_size: bin.to_f64_lossy(),
        frontal_camera: cast_pose(&front),
        side_camera: cast_pose(&side),
        frontal_valid_fraction: cf.len() as f64 / n,
        side_valid_fraction: cs.len() as f64 / n,
        reprojection_median_l1: lower_median(&errs),
        reprojection_pixels: errs.len(),
        options: *opts,
        frontal_nn: ch.forward,
        side_nn: ch.backward,
        frontal_pixels: cf.pixels,
        side_pixels: cs.pixels,
        l1,
    })
}

fn cast_pose<T: Real>(c: &CameraPose<T>) -> CameraPose<f64> {
    CameraPose {
        azimuth: c.azimuth.to_f64_lossy(),
        elevation: c.elevation.to_f64_lossy(),
        fov_deg: c.fov_deg.to_f64_lossy(),
        near: c.near.to_f64_lossy(),
        far: c.far.to_f64_lossy(),
        width: c.width,
        height: c.height,
    }
}
