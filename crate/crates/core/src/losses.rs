//! Pose, Eikonal and minimal-surface regularisers, their weighted total, and
//! the sphere-initialisation fit.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::field::{AnalyticSdf, FieldNetwork, ModulationSignals};
use crate::optim::Adam;
use crate::scalar::Real;
use crate::vec3::Vec3;

/// `e^2` for `|e| <= 1`, `|e|` beyond, with `e = predicted - truth`.
pub fn smoothed_l1<T: Real>(predicted: T, truth: T) -> T {
    let e = predicted - truth;
    if e.abs() <= T::one() {
        e * e
    } else {
        e.abs()
    }
}

/// Smoothed L1 summed over azimuth and elevation.
pub fn pose_loss<T: Real>(predicted: (T, T), truth: (T, T)) -> T {
    smoothed_l1(predicted.0, truth.0) + smoothed_l1(predicted.1, truth.1)
}

/// Mean of `(|g| - 1)^2` over a batch of SDF gradients.
pub fn eikonal_loss<T: Real>(gradients: &[Vec3<T>]) -> Result<T> {
    ensure!(!gradients.is_empty(), Precondition, "eikonal loss needs at least one gradient");
    let s: T = gradients
        .iter()
        .map(|g| {
            let e = g.norm() - T::one();
            e * e
        })
        .sum();
    Ok(s / T::from_usize_lossy(gradients.len()))
}

pub const MINIMAL_SURFACE_SHARPNESS: f64 = 100.0;

/// Mean of `exp(-100 |d|)`.
pub fn minimal_surface_loss<T: Real>(sdf: &[T]) -> Result<T> {
    minimal_surface_loss_with(sdf, T::lit(MINIMAL_SURFACE_SHARPNESS))
}

/// Mean of `exp(-k |d|)`; `k` is in inverse scene units.
pub fn minimal_surface_loss_with<T: Real>(sdf: &[T], k: T) -> Result<T> {
    ensure!(!sdf.is_empty(), Precondition, "minimal surface loss needs at least one value");
    let s: T = sdf.iter().map(|d| (-k * d.abs()).exp()).sum();
    Ok(s / T::from_usize_lossy(sdf.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda_view: f64,
    pub lambda_eik: f64,
    pub lambda_surf: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda_view: 15.0, lambda_eik: 0.1, lambda_surf: 0.05 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = |w: f64| w >= 0.0 && w.is_finite();
        ensure!(
            ok(self.lambda_view) && ok(self.lambda_eik) && ok(self.lambda_surf),
            Parameter,
            "loss weights must be finite and non-negative: {self:?}"
        );
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown<T> {
    pub adv: T,
    pub view: T,
    pub eikonal: T,
    pub surface: T,
    pub total: T,
}

/// `adv + l_view * view + l_eik * eik + l_surf * surf`.
pub fn total_volume_loss<T: Real>(adv: T, view: T, eik: T, surf: T, weights: &LossWeights) -> LossBreakdown<T> {
    let total = adv
        + T::lit(weights.lambda_view) * view
        + T::lit(weights.lambda_eik) * eik
        + T::lit(weights.lambda_surf) * surf;
    LossBreakdown { adv, view, eikonal: eik, surface: surf, total }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SphereInitConfig {
    pub radius: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Points are drawn uniformly from `[-h, h]^3`.
    pub box_half_extent: f64,
}

impl Default for SphereInitConfig {
    fn default() -> Self {
        Self { radius: 0.1, iterations: 10_000, learning_rate: 3e-5, batch_size: 64, box_half_extent: 0.3 }
    }
}

impl SphereInitConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.radius > 0.0 && self.radius.is_finite(), Parameter, "radius must be positive");
        ensure!(self.iterations >= 1, Parameter, "sphere init needs at least one iteration");
        ensure!(self.batch_size >= 1, Parameter, "batch size must be at least 1");
        ensure!(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            Parameter,
            "learning rate must be positive"
        );
        ensure!(
            self.box_half_extent > self.radius,
            Parameter,
            "sampling box half-extent {} must exceed the radius {}",
            self.box_half_extent,
            self.radius
        );
        Ok(())
    }
}

/// Steps over `DIVERGENCE_FACTOR * initial` in a row that abort a fit.
pub const DIVERGENCE_PATIENCE: usize = 100;
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct SphereFit<T> {
    pub net: FieldNetwork<T>,
    /// Batch MSE before each step.
    pub history: Vec<f64>,
}

pub fn sample_box<T: Real, R: Rng + ?Sized>(half: f64, rng: &mut R) -> Vec3<T> {
    let mut c = || T::lit(rng.random_range(-half..half));
    let x = c();
    let y = c();
    let z = c();
    Vec3::new(x, y, z)
}

/// Regresses the SDF of a centred sphere with Adam (`beta = (0, 0.9)`).
/// Only field parameters are updated; `mods` stays fixed.
pub fn sphere_init_fit<T: Real, R: Rng + ?Sized>(
    mut net: FieldNetwork<T>,
    mods: &ModulationSignals<T>,
    cfg: &SphereInitConfig,
    rng: &mut R,
) -> Result<SphereFit<T>> {
    cfg.validate()?;
    net.check_modulation(mods)?;
    let target = AnalyticSdf::sphere(Vec3::zero(), T::lit(cfg.radius))?;
    let mut opt = Adam::new(T::lit(cfg.learning_rate), T::zero(), T::lit(0.9), T::lit(1e-8))?;
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut points = vec![Vec3::zero(); cfg.batch_size];
    let mut targets = vec![T::zero(); cfg.batch_size];
    let mut initial = None;
    let mut over = 0;
    for it in 0..cfg.iterations {
        for (p, t) in points.iter_mut().zip(targets.iter_mut()) {
            *p = sample_box(cfg.box_half_extent, rng);
            *t = target.eval(*p);
        }
        let (loss, grads) = net.regression_gradients(mods, &points, &targets)?;
        let loss = loss.to_f64_lossy();
        history.push(loss);
        let init = *initial.get_or_insert(loss);
        if !loss.is_finite() {
            return Err(Error::Diverged { iteration: it, loss, initial: init, history });
        }
        if loss > DIVERGENCE_FACTOR * init {
            over += 1;
            if over >= DIVERGENCE_PATIENCE {
                return Err(Error::Diverged { iteration: it, loss, initial: init, history });
            }
        } else {
            over = 0;
        }
        let mut params = Vec::new();
        for l in net.layers_mut() {
            params.push(l.weight.as_mut_slice());
            params.push(l.bias.as_mut_slice());
        }
        let mut gs = Vec::new();
        for l in grads.params.layers() {
            gs.push(l.weight.as_slice());
            gs.push(l.bias.as_slice());
        }
        opt.step(params, gs);
    }
    Ok(SphereFit { net, history })
}

/// Mean of `|d_net(x) - sdf(x)|`.
pub fn mean_abs_residual<T: Real>(
    net: &FieldNetwork<T>,
    mods: &ModulationSignals<T>,
    sdf: &AnalyticSdf<T>,
    points: &[Vec3<T>],
) -> Result<f64> {
    ensure!(!points.is_empty(), Precondition, "no evaluation points");
    net.check_modulation(mods)?;
    let mut ws = net.workspace();
    let s: f64 = points
        .iter()
        .map(|p| (net.forward_sdf_unchecked(*p, mods, &mut ws) - sdf.eval(*p)).abs().to_f64_lossy())
        .sum();
    Ok(s / points.len() as f64)
}

/// Points whose distance from the origin is uniform in `[r_in, r_out]`,
/// with uniformly distributed directions.
pub fn sample_shell<T: Real, R: Rng + ?Sized>(r_in: f64, r_out: f64, n: usize, rng: &mut R) -> Vec<Vec3<T>> {
    (0..n)
        .map(|_| {
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let s = (1.0 - z * z).sqrt();
            let r = rng.random_range(r_in..=r_out);
            Vec3::new(T::lit(r * s * phi.cos()), T::lit(r * s * phi.sin()), T::lit(r * z))
        })
        .collect()
}

/// `iteration,mse` rows, one per entry of `history`.
pub fn write_history_csv(path: &Path, history: &[f64]) -> Result<()> {
    let mut s = String::from("iteration,mse\n");
    for (i, l) in history.iter().enumerate() {
        s.push_str(&format!("{i},{l:e}\n"));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(s.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
