//! Isosurface extraction, mesh bookkeeping, subdivision, per-vertex noise
//! and mesh files.

pub mod export;
pub mod grid;
pub mod marching;
pub mod mesh;
mod tables;

pub use export::{export_mesh, read_ply, MeshFormat};
pub use grid::{sample_grid, Bounds, SdfGrid};
pub use marching::marching_cubes;
pub use mesh::{attach_vertex_noise, subdivide, TriMesh};
