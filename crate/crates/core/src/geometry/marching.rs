//! Marching cubes over an [`SdfGrid`].

use rayon::prelude::*;

use super::grid::SdfGrid;
use super::mesh::TriMesh;
use super::tables::{EDGE_TABLE, TRI_TABLE};
use crate::scalar::Real;
use crate::vec3::Vec3;

const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Vertex identity on the lattice: `4 * point + axis` for a crossing on the
/// edge leaving `point` along `axis`, `4 * point + 3` for a crossing that
/// lands exactly on `point`. Identical crossings seen from neighbouring
/// cells get the same key.
type VertexKey = u64;

struct Extractor<'a, T> {
    grid: &'a SdfGrid<T>,
    iso: T,
}

impl<T: Real> Extractor<'_, T> {
    fn lin(&self, p: [usize; 3]) -> u64 {
        self.grid.index(p[0], p[1], p[2]) as u64
    }

    fn edge_key(&self, a: [usize; 3], b: [usize; 3]) -> VertexKey {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let axis = (0..3).find(|&d| lo[d] != hi[d]).expect("edge endpoints differ");
        let (vlo, vhi) = (self.value(lo), self.value(hi));
        if vlo == self.iso {
            4 * self.lin(lo) + 3
        } else if vhi == self.iso {
            4 * self.lin(hi) + 3
        } else {
            4 * self.lin(lo) + axis as u64
        }
    }

    fn value(&self, p: [usize; 3]) -> T {
        self.grid.at(p[0], p[1], p[2])
    }

    fn unlin(&self, l: u64) -> [usize; 3] {
        let r = self.grid.resolution() as u64;
        [(l % r) as usize, ((l / r) % r) as usize, (l / (r * r)) as usize]
    }

    fn position(&self, key: VertexKey) -> Vec3<T> {
        let p = self.unlin(key / 4);
        let axis = (key % 4) as usize;
        let a = self.grid.point(p[0], p[1], p[2]);
        if axis == 3 {
            return a;
        }
        let mut q = p;
        q[axis] += 1;
        let b = self.grid.point(q[0], q[1], q[2]);
        let (va, vb) = (self.value(p), self.value(q));
        let t = (self.iso - va) / (vb - va);
        a + (b - a) * t
    }

    /// Triangles of the cell row `(*, j, k)` as vertex keys.
    fn slab(&self, k: usize) -> Vec<[VertexKey; 3]> {
        let n = self.grid.resolution() - 1;
        let mut out = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let base = [i, j, k];
                let corner = |c: usize| [base[0] + CORNERS[c][0], base[1] + CORNERS[c][1], base[2] + CORNERS[c][2]];
                let mut case = 0usize;
                for c in 0..8 {
                    if self.value(corner(c)) < self.iso {
                        case |= 1 << c;
                    }
                }
                if EDGE_TABLE[case] == 0 {
                    continue;
                }
                let mut keys = [0u64; 12];
                for (e, [a, b]) in EDGES.iter().enumerate() {
                    if EDGE_TABLE[case] & (1 << e) != 0 {
                        keys[e] = self.edge_key(corner(*a), corner(*b));
                    }
                }
                for tri in TRI_TABLE[case].chunks_exact(3) {
                    if tri[0] < 0 {
                        break;
                    }
                    // Table winding is clockwise seen from outside.
                    out.push([keys[tri[0] as usize], keys[tri[2] as usize], keys[tri[1] as usize]]);
                }
            }
        }
        out
    }
}

/// Extracts the `iso` level set; inside is `value < iso`. Triangles wind
/// counter-clockwise seen from the outside (normals point toward larger
/// values). Vertex numbering follows lattice order, so the output does not
/// depend on scheduling. Zero-area triangles are dropped. A grid without a
/// crossing yields an empty mesh.
pub fn marching_cubes<T: Real>(grid: &SdfGrid<T>, iso: T) -> TriMesh<T> {
    let ex = Extractor { grid, iso };
    let n = grid.resolution() - 1;
    let tris: Vec<[VertexKey; 3]> = (0..n).into_par_iter().flat_map_iter(|k| ex.slab(k)).collect();

    let mut keys: Vec<VertexKey> = tris.iter().flatten().copied().collect();
    keys.par_sort_unstable();
    keys.dedup();
    let positions: Vec<Vec3<T>> = keys.par_iter().map(|k| ex.position(*k)).collect();
    let id = |k: VertexKey| keys.binary_search(&k).expect("key collected above") as u32;

    let cell = grid.cell_size();
    let min_area = T::lit(1e-10) * cell.x.min(cell.y).min(cell.z).powi(2);
    let mut faces = Vec::with_capacity(tris.len());
    for t in &tris {
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            continue;
        }
        let f = t.map(id);
        let [a, b, c] = f.map(|v| positions[v as usize]);
        if (b - a).cross(c - a).norm() * T::lit(0.5) <= min_area {
            continue;
        }
        faces.push(f);
    }

    // Drop vertices only used by discarded triangles.
    let mut used = vec![false; positions.len()];
    for f in &faces {
        for v in f {
            used[*v as usize] = true;
        }
    }
    let mut remap = vec![0u32; positions.len()];
    let mut vertices = Vec::with_capacity(positions.len());
    for (old, _) in used.iter().enumerate().filter(|(_, u)| **u) {
        remap[old] = vertices.len() as u32;
        vertices.push(positions[old]);
    }
    for f in &mut faces {
        *f = f.map(|v| remap[v as usize]);
    }
    TriMesh { vertices, faces, noise: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{AnalyticSdf, ConstantField};
    use crate::geometry::grid::{sample_grid, Bounds};

    #[test]
    fn no_crossing_gives_empty_mesh() {
        let g = sample_grid(&ConstantField(1.0), Bounds::cube(1.0).unwrap(), 8).unwrap();
        assert!(marching_cubes(&g, 0.0).is_empty());
        let g = sample_grid(&ConstantField(-1.0), Bounds::cube(1.0).unwrap(), 8).unwrap();
        assert!(marching_cubes(&g, 0.0).is_empty());
    }

    #[test]
    fn sphere_is_closed_and_outward() {
        let s = AnalyticSdf::sphere(Vec3::new(0.02, -0.01, 0.0), 0.3).unwrap();
        let g = sample_grid(&s, Bounds::cube(0.5).unwrap(), 24).unwrap();
        let m = marching_cubes(&g, 0.0);
        m.validate().unwrap();
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 2);
        for f in 0..m.face_count() {
            let c = m.faces[f].iter().fold(Vec3::zero(), |acc, v| acc + m.vertices[*v as usize]);
            assert!(m.face_normal(f).dot(c * (1.0 / 3.0) - Vec3::new(0.02, -0.01, 0.0)) > 0.0);
        }
    }

    #[test]
    fn torus_has_genus_one() {
        let s = AnalyticSdf::torus(Vec3::zero(), 0.3, 0.1).unwrap();
        let g = sample_grid(&s, Bounds::cube(0.5).unwrap(), 40).unwrap();
        let m = marching_cubes(&g, 0.0);
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 0);
    }

    #[test]
    fn exact_zero_samples_do_not_split_vertices() {
        // Lattice points land exactly on the box faces.
        let s = AnalyticSdf::cuboid(Vec3::zero(), Vec3::splat(0.25)).unwrap();
        let g = sample_grid(&s, Bounds::cube(0.5).unwrap(), 9).unwrap();
        let m = marching_cubes(&g, 0.0);
        assert!(!m.is_empty());
        assert!(m.is_edge_manifold());
        assert!((0..m.face_count()).all(|f| m.face_area(f) > 0.0));
    }

    #[test]
    fn vertices_lie_on_cell_edges() {
        let s = AnalyticSdf::sphere(Vec3::<f64>::zero(), 0.27).unwrap();
        let g = sample_grid(&s, Bounds::cube(0.5).unwrap(), 16).unwrap();
        let m = marching_cubes(&g, 0.0);
        let h = g.cell_size().x;
        for v in &m.vertices {
            let off = [v.x, v.y, v.z].map(|c| ((c + 0.5) / h - ((c + 0.5) / h).round()).abs() < 1e-9);
            assert!(off.iter().filter(|b| **b).count() >= 2, "{v:?} is not on a lattice edge");
            assert!(s.eval(*v).abs() < h * 3f64.sqrt());
        }
    }
}
