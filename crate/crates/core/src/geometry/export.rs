//! PLY (binary little endian) and OBJ (ASCII) mesh files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mesh::TriMesh;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Ply,
    Obj,
}

impl MeshFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Ply => "ply",
            Self::Obj => "obj",
        }
    }
}

impl std::str::FromStr for MeshFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ply" => Ok(Self::Ply),
            "obj" => Ok(Self::Obj),
            other => Err(format!("unknown mesh format {other:?} (expected ply or obj)")),
        }
    }
}

pub fn ply_bytes<T: Real>(mesh: &TriMesh<T>) -> Vec<u8> {
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        mesh.vertices.len()
    );
    if mesh.noise.is_some() {
        header.push_str("property float noise\n");
    }
    header.push_str(&format!(
        "element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.faces.len()
    ));
    let per_vertex = if mesh.noise.is_some() { 16 } else { 12 };
    let mut out = header.into_bytes();
    out.reserve(mesh.vertices.len() * per_vertex + mesh.faces.len() * 13);
    for (i, v) in mesh.vertices.iter().enumerate() {
        for c in v.to_array() {
            out.extend_from_slice(&c.to_f32_lossy().to_le_bytes());
        }
        if let Some(n) = &mesh.noise {
            out.extend_from_slice(&n[i].to_f32_lossy().to_le_bytes());
        }
    }
    for f in &mesh.faces {
        out.push(3);
        for v in f {
            out.extend_from_slice(&(*v as i32).to_le_bytes());
        }
    }
    out
}

fn obj_text<T: Real>(mesh: &TriMesh<T>) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        s.push_str(&format!("v {} {} {}\n", v.x.to_f32_lossy(), v.y.to_f32_lossy(), v.z.to_f32_lossy()));
    }
    for f in &mesh.faces {
        s.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    s
}

/// Writes `mesh` to `path`. OBJ has no slot for per-vertex noise, which is
/// dropped with a warning.
pub fn export_mesh<T: Real>(mesh: &TriMesh<T>, path: &Path, format: MeshFormat) -> Result<()> {
    mesh.validate()?;
    let bytes = match format {
        MeshFormat::Ply => ply_bytes(mesh),
        MeshFormat::Obj => {
            if mesh.noise.is_some() {
                log::warn!("OBJ output has no per-vertex noise property; dropping noise for {}", path.display());
            }
            obj_text(mesh).into_bytes()
        }
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Reads the binary PLY layout written by [`export_mesh`].
pub fn read_ply(path: &Path) -> Result<TriMesh<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |why: &str| Error::format(path, why.to_string());
    let end = b"end_header\n";
    let hlen = bytes
        .windows(end.len())
        .position(|w| w == end)
        .ok_or_else(|| bad("missing end_header"))?
        + end.len();
    let header = std::str::from_utf8(&bytes[..hlen]).map_err(|_| bad("header is not text"))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") || lines.next() != Some("format binary_little_endian 1.0") {
        return Err(bad("not a binary little-endian PLY file"));
    }
    let (mut nv, mut nf, mut props, mut in_vertex) = (None, None, Vec::new(), false);
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["element", "vertex", n] => {
                nv = Some(n.parse::<usize>().map_err(|_| bad("bad vertex count"))?);
                in_vertex = true;
            }
            ["element", "face", n] => {
                nf = Some(n.parse::<usize>().map_err(|_| bad("bad face count"))?);
                in_vertex = false;
            }
            ["property", "float", name] if in_vertex => props.push(name.to_string()),
            ["property", "list", "uchar", "int", "vertex_indices"] if !in_vertex => {}
            ["end_header"] | ["comment", ..] => {}
            _ => return Err(bad(&format!("unsupported header line {line:?}"))),
        }
    }
    let (nv, nf) = (nv.ok_or_else(|| bad("no vertex element"))?, nf.ok_or_else(|| bad("no face element"))?);
    let noise_at = props.iter().position(|p| p == "noise");
    let xyz: Vec<usize> = ["x", "y", "z"]
        .iter()
        .map(|n| props.iter().position(|p| p == n).ok_or_else(|| bad("vertex lacks x/y/z")))
        .collect::<Result<_>>()?;
    let stride = props.len() * 4;
    let vbytes = nv * stride;
    if bytes.len() != hlen + vbytes + nf * 13 {
        return Err(bad("element data has the wrong length"));
    }
    let f32_at = |o: usize| f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    let mut vertices = Vec::with_capacity(nv);
    let mut noise = noise_at.map(|_| Vec::with_capacity(nv));
    for i in 0..nv {
        let o = hlen + i * stride;
        vertices.push(Vec3::new(f32_at(o + 4 * xyz[0]), f32_at(o + 4 * xyz[1]), f32_at(o + 4 * xyz[2])));
        if let (Some(k), Some(n)) = (noise_at, noise.as_mut()) {
            n.push(f32_at(o + 4 * k));
        }
    }
    let mut faces = Vec::with_capacity(nf);
    for f in 0..nf {
        let o = hlen + vbytes + f * 13;
        if bytes[o] != 3 {
            return Err(bad("only triangle faces are supported"));
        }
        let idx = |k: usize| i32::from_le_bytes([bytes[o + 1 + 4 * k], bytes[o + 2 + 4 * k], bytes[o + 3 + 4 * k], bytes[o + 4 + 4 * k]]);
        let tri = [idx(0), idx(1), idx(2)];
        if tri.iter().any(|v| *v < 0) {
            return Err(bad("negative vertex index"));
        }
        faces.push(tri.map(|v| v as u32));
    }
    let mesh = TriMesh { vertices, faces, noise };
    mesh.validate().map_err(|e| bad(&e.to_string()))?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::{attach_vertex_noise, tetrahedron};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ply_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ply");
        let t = tetrahedron();
        export_mesh(&t, &p, MeshFormat::Ply).unwrap();
        let back = read_ply(&p).unwrap();
        assert_eq!(back.faces, t.faces);
        assert_eq!(back.vertices, t.vertices.iter().map(|v| v.cast::<f32>()).collect::<Vec<_>>());
        assert!(back.noise.is_none());
    }

    #[test]
    fn noise_survives_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.ply");
        let t = attach_vertex_noise(&tetrahedron().cast::<f32>(), &mut ChaCha8Rng::seed_from_u64(3));
        export_mesh(&t, &p, MeshFormat::Ply).unwrap();
        let back = read_ply(&p).unwrap();
        let bits = |v: &Option<Vec<f32>>| v.as_ref().unwrap().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.noise), bits(&t.noise));
    }

    #[test]
    fn empty_mesh_writes_valid_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.ply");
        export_mesh(&TriMesh::<f64>::empty(), &p, MeshFormat::Ply).unwrap();
        let back = read_ply(&p).unwrap();
        assert!(back.vertices.is_empty() && back.faces.is_empty());
        let o = dir.path().join("e.obj");
        export_mesh(&TriMesh::<f64>::empty(), &o, MeshFormat::Obj).unwrap();
        assert_eq!(std::fs::read_to_string(&o).unwrap(), "");
    }

    #[test]
    fn obj_is_one_based() {
        let dir = tempfile::tempdir().unwrap();
        let o = dir.path().join("t.obj");
        export_mesh(&attach_vertex_noise(&tetrahedron(), &mut ChaCha8Rng::seed_from_u64(0)), &o, MeshFormat::Obj).unwrap();
        let text = std::fs::read_to_string(&o).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 4);
        assert!(text.contains("\nf 1 2 3\n"));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("PLY".parse::<MeshFormat>().unwrap(), MeshFormat::Ply);
        assert!("stl".parse::<MeshFormat>().is_err());
    }
}
