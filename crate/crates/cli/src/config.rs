//! Run configuration: one JSON document, strictly validated.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sdfvol::camera::{CameraPose, PoseDistribution};
use sdfvol::field::{Albedo, AnalyticSdf};
use sdfvol::gradcheck::GradcheckConfig;
use sdfvol::losses::{LossWeights, SphereInitConfig};
use sdfvol::Vec3d;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SceneConfig {
    Analytic {
        sdf: AnalyticSdf<f64>,
        #[serde(default)]
        albedo: Albedo<f64>,
    },
    /// Parameter file written by `init-sphere`, resolved relative to the
    /// working directory.
    Network { path: PathBuf },
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self::Analytic {
            sdf: AnalyticSdf::Sphere { center: Vec3d::zero(), radius: 0.1 },
            albedo: Albedo::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraConfig {
    pub azimuth: f64,
    pub elevation: f64,
    pub fov_deg: f64,
    pub near: f64,
    pub far: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { azimuth: 0.0, elevation: 0.0, fov_deg: 12.0, near: 0.88, far: 1.12 }
    }
}

impl CameraConfig {
    pub fn pose(&self, resolution: usize) -> sdfvol::Result<CameraPose<f64>> {
        CameraPose::from_angles(self.azimuth, self.elevation, self.fov_deg, self.near, self.far, resolution, resolution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    pub samples: usize,
    pub alpha: f64,
    pub resolution: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { samples: 24, alpha: 1e-3, resolution: 64 }
    }
}

/// Architecture of networks created by `init-sphere`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub hidden_width: usize,
    pub feature_width: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { hidden_width: 64, feature_width: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub resolution: usize,
    /// Half-extent of the sampling cube; `null` means `0.55 * camera.far`.
    pub half_extent: Option<f64>,
    pub iso: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { resolution: 128, half_extent: None, iso: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsistencyConfig {
    pub samples: usize,
    pub resolution: usize,
    pub alpha: f64,
    pub occlusion: bool,
    /// Side-view azimuth; `null` means 1.5 azimuth standard deviations.
    pub side_azimuth: Option<f64>,
    pub side_elevation: f64,
    /// Pairs evaluated, one identity (latent or jitter seed) each.
    pub identities: usize,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self {
            samples: 128,
            resolution: 128,
            alpha: 1e-3,
            occlusion: true,
            side_azimuth: None,
            side_elevation: 0.0,
            identities: 1,
        }
    }
}

/// Gradient-check settings; the seed comes from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckBlock {
    pub trials: usize,
    pub points_per_trial: usize,
    pub hidden_width: usize,
    pub feature_width: usize,
    pub z_dim: usize,
    pub mapping_width: usize,
    pub coords_per_layer: usize,
    pub step: f64,
    pub stencil: usize,
    pub tolerance: f64,
}

impl Default for GradcheckBlock {
    fn default() -> Self {
        let g = GradcheckConfig::default();
        Self {
            trials: g.trials,
            points_per_trial: g.points_per_trial,
            hidden_width: g.hidden_width,
            feature_width: g.feature_width,
            z_dim: g.z_dim,
            mapping_width: g.mapping_width,
            coords_per_layer: g.coords_per_layer,
            step: g.step,
            stencil: g.stencil,
            tolerance: g.tolerance,
        }
    }
}

impl GradcheckBlock {
    pub fn with_seed(&self, seed: u64) -> GradcheckConfig {
        GradcheckConfig {
            trials: self.trials,
            points_per_trial: self.points_per_trial,
            hidden_width: self.hidden_width,
            feature_width: self.feature_width,
            z_dim: self.z_dim,
            mapping_width: self.mapping_width,
            coords_per_layer: self.coords_per_layer,
            step: self.step,
            stencil: self.stencil,
            tolerance: self.tolerance,
            seed,
            corrupt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub camera: CameraConfig,
    pub render: RenderConfig,
    pub poses: PoseDistribution<f64>,
    pub loss_weights: LossWeights,
    pub network: NetworkConfig,
    pub sphere_init: SphereInitConfig,
    pub mesh: MeshConfig,
    pub consistency: ConsistencyConfig,
    pub gradcheck: GradcheckBlock,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            camera: CameraConfig::default(),
            render: RenderConfig::default(),
            poses: PoseDistribution::ffhq(),
            loss_weights: LossWeights::default(),
            network: NetworkConfig::default(),
            sphere_init: SphereInitConfig::default(),
            mesh: MeshConfig::default(),
            consistency: ConsistencyConfig::default(),
            gradcheck: GradcheckBlock::default(),
            seed: 0,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(format!("{}: at `{}`: {}", origin.display(), path, e.inner()))
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg_err = |e: sdfvol::Error| invalid(e.to_string());
        if let SceneConfig::Analytic { sdf, .. } = &self.scene {
            sdf.validated().map_err(cfg_err)?;
        }
        self.camera.pose(1).map_err(cfg_err)?;
        let r = &self.render;
        if r.samples == 0 || r.resolution == 0 {
            return Err(invalid("render.samples and render.resolution must be at least 1"));
        }
        sdfvol::render::DensityParams::new(r.alpha).map_err(cfg_err)?;
        PoseDistribution::new(self.poses.azimuth_std, self.poses.elevation_std).map_err(cfg_err)?;
        self.loss_weights.validate().map_err(cfg_err)?;
        if self.network.hidden_width == 0 {
            return Err(invalid("network.hidden_width must be at least 1"));
        }
        self.sphere_init.validate().map_err(cfg_err)?;
        if self.mesh.resolution < 2 {
            return Err(invalid("mesh.resolution must be at least 2"));
        }
        if let Some(h) = self.mesh.half_extent {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid("mesh.half_extent must be positive"));
            }
        }
        let c = &self.consistency;
        if c.samples == 0 || c.resolution == 0 || c.identities == 0 {
            return Err(invalid("consistency.samples, resolution and identities must be at least 1"));
        }
        sdfvol::render::DensityParams::new(c.alpha).map_err(cfg_err)?;
        let g = &self.gradcheck;
        if g.stencil != 3 && g.stencil != 5 {
            return Err(invalid(format!("gradcheck.stencil must be 3 or 5, got {}", g.stencil)));
        }
        if g.trials == 0 || !(g.step > 0.0) || !(g.tolerance > 0.0) {
            return Err(invalid("gradcheck.trials, step and tolerance must be positive"));
        }
        Ok(())
    }

    pub fn side_azimuth(&self) -> f64 {
        self.consistency.side_azimuth.unwrap_or_else(|| self.poses.side_view_azimuth())
    }

    pub fn mesh_half_extent(&self) -> f64 {
        self.mesh.half_extent.unwrap_or(0.55 * self.camera.far)
    }
}
