//! Implicit field representations: the modulated SIREN network, its mapping
//! network, closed-form SDF oracles and the query interface the renderer
//! and mesher consume.

pub mod analytic;
pub mod io;
pub mod layer;
pub mod mapping;
pub mod network;

pub use analytic::{Albedo, AnalyticScene, AnalyticSdf, ConstantField};
pub use layer::{film_siren_forward, FilmSirenLayer, Linear};
pub use mapping::{LatentCode, MappingConfig, MappingGradients, MappingNetwork, ModulationSignals};
pub use network::{FieldConfig, FieldGradients, FieldNetwork, FieldSample, Workspace, OMEGA0, TRUNK_DEPTH};

use crate::error::Result;
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Read-only scene queried by the renderer and grid sampler.
///
/// Implementations must be pure; many workers query one instance
/// concurrently, each with its own scratch space.
pub trait Field<T: Real>: Sync {
    type Scratch: Send;

    fn scratch(&self) -> Self::Scratch;

    fn feature_width(&self) -> usize;

    fn sdf(&self, x: Vec3<T>, scratch: &mut Self::Scratch) -> T;

    /// SDF, color and feature at `x` seen from direction `v`.
    fn shade(
        &self,
        x: Vec3<T>,
        v: Vec3<T>,
        scratch: &mut Self::Scratch,
        color: &mut [T; 3],
        feature: &mut [T],
    ) -> T;
}

/// A field network bound to one set of modulation signals.
#[derive(Debug, Clone, Copy)]
pub struct ConditionedField<'a, T> {
    net: &'a FieldNetwork<T>,
    mods: &'a ModulationSignals<T>,
}

impl<'a, T: Real> ConditionedField<'a, T> {
    pub fn new(net: &'a FieldNetwork<T>, mods: &'a ModulationSignals<T>) -> Result<Self> {
        net.check_modulation(mods)?;
        Ok(Self { net, mods })
    }

    pub fn network(&self) -> &FieldNetwork<T> {
        self.net
    }

    pub fn modulation(&self) -> &ModulationSignals<T> {
        self.mods
    }
}

impl<T: Real> Field<T> for ConditionedField<'_, T> {
    type Scratch = Workspace<T>;

    fn scratch(&self) -> Workspace<T> {
        self.net.workspace()
    }

    fn feature_width(&self) -> usize {
        self.net.feature_width()
    }

    fn sdf(&self, x: Vec3<T>, ws: &mut Workspace<T>) -> T {
        self.net.forward_sdf_unchecked(x, self.mods, ws)
    }

    fn shade(&self, x: Vec3<T>, v: Vec3<T>, ws: &mut Workspace<T>, color: &mut [T; 3], feature: &mut [T]) -> T {
        let d = self.net.forward_full_unchecked(x, v, self.mods, ws);
        *color = ws.color();
        feature.copy_from_slice(ws.feature());
        d
    }
}
