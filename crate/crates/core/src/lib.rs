//! Differentiable signed-distance-field volume rendering and a toolkit for
//! measuring the 3D view consistency of rendered depth and color.

pub mod camera;
pub mod consistency;
pub mod error;
pub mod field;
pub mod geometry;
pub mod gradcheck;
pub mod imageio;
pub mod losses;
pub mod optim;
pub mod render;
pub mod scalar;
pub mod vec3;

pub use error::{Error, Result};
pub use scalar::Real;
pub use vec3::Vec3;

pub type Vec3f = Vec3<f32>;
pub type Vec3d = Vec3<f64>;
pub type FieldNetworkF32 = field::FieldNetwork<f32>;
pub type FieldNetworkF64 = field::FieldNetwork<f64>;
pub type MappingNetworkF32 = field::MappingNetwork<f32>;
pub type MappingNetworkF64 = field::MappingNetwork<f64>;
pub type ModulationSignalsF64 = field::ModulationSignals<f64>;
pub type CameraPoseF64 = camera::CameraPose<f64>;
pub type RenderBuffersF64 = render::RenderBuffers<f64>;
pub type TriMeshF64 = geometry::TriMesh<f64>;
pub type SdfGridF64 = geometry::SdfGrid<f64>;
