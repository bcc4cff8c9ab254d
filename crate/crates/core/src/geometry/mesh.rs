//! Indexed triangle meshes.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::camera::Ray;
use crate::error::{ensure, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub faces: Vec<[u32; 3]>,
    /// One scalar per vertex when present.
    pub noise: Option<Vec<T>>,
}

impl<T: Real> TriMesh<T> {
    pub fn new(vertices: Vec<Vec3<T>>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let m = Self { vertices, faces, noise: None };
        m.validate()?;
        Ok(m)
    }

    pub fn empty() -> Self {
        Self { vertices: Vec::new(), faces: Vec::new(), noise: None }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        ensure!(n <= u32::MAX as usize, Shape, "too many vertices for 32-bit indices");
        for (f, tri) in self.faces.iter().enumerate() {
            ensure!(tri.iter().all(|v| (*v as usize) < n), Shape, "face {f} indexes past {n} vertices");
        }
        if let Some(noise) = &self.noise {
            ensure!(noise.len() == n, Shape, "{} noise values for {n} vertices", noise.len());
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    fn corners(&self, f: &[u32; 3]) -> [Vec3<T>; 3] {
        f.map(|i| self.vertices[i as usize])
    }

    /// Unnormalised normal `(b - a) x (c - a)`; twice the area in length.
    pub fn face_normal(&self, f: usize) -> Vec3<T> {
        let [a, b, c] = self.corners(&self.faces[f]);
        (b - a).cross(c - a)
    }

    pub fn face_area(&self, f: usize) -> T {
        self.face_normal(f).norm() * T::lit(0.5)
    }

    pub fn area(&self) -> T {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Undirected edges with the number of faces using each.
    pub fn edge_use(&self) -> BTreeMap<(u32, u32), usize> {
        let mut edges = BTreeMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    pub fn edge_count(&self) -> usize {
        self.edge_use().len()
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.edge_use().values().filter(|n| **n == 1).count()
    }

    /// Every edge is shared by at most two faces.
    pub fn is_edge_manifold(&self) -> bool {
        self.edge_use().values().all(|n| *n <= 2)
    }

    /// Closed and edge-manifold.
    pub fn is_watertight(&self) -> bool {
        self.edge_use().values().all(|n| *n == 2)
    }

    /// `V - E + F` counted over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for v in f {
                used[*v as usize] = true;
            }
        }
        let v = used.iter().filter(|u| **u).count() as i64;
        v - self.edge_count() as i64 + self.faces.len() as i64
    }

    /// Nearest hit distance along `ray`, by brute force over all faces.
    pub fn raycast(&self, ray: &Ray<T>) -> Option<T> {
        let eps = T::lit(1e-12);
        let mut best: Option<T> = None;
        for f in &self.faces {
            let [a, b, c] = self.corners(f);
            let e1 = b - a;
            let e2 = c - a;
            let p = ray.direction.cross(e2);
            let det = e1.dot(p);
            if det.abs() < eps {
                continue;
            }
            let inv = T::one() / det;
            let s = ray.origin - a;
            let u = s.dot(p) * inv;
            if u < T::zero() || u > T::one() {
                continue;
            }
            let q = s.cross(e1);
            let v = ray.direction.dot(q) * inv;
            if v < T::zero() || u + v > T::one() {
                continue;
            }
            let t = e2.dot(q) * inv;
            if t > T::zero() && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
        best
    }

    pub fn cast<U: Real>(&self) -> TriMesh<U> {
        TriMesh {
            vertices: self.vertices.iter().map(|v| v.cast()).collect(),
            faces: self.faces.clone(),
            noise: self.noise.as_ref().map(|n| n.iter().map(|v| U::lit(v.to_f64_lossy())).collect()),
        }
    }
}

/// Midpoint 1-to-4 subdivision. Each edge gets one shared midpoint, numbered
/// after the original vertices in order of first use. Noise is not carried
/// over; attach fresh noise to the result.
pub fn subdivide<T: Real>(mesh: &TriMesh<T>) -> TriMesh<T> {
    let mut vertices = mesh.vertices.clone();
    let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
    let half = T::lit(0.5);
    let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3<T>>| -> u32 {
        *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
            let p = (vertices[a as usize] + vertices[b as usize]) * half;
            vertices.push(p);
            (vertices.len() - 1) as u32
        })
    };
    let mut faces = Vec::with_capacity(mesh.faces.len() * 4);
    for &[a, b, c] in &mesh.faces {
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        faces.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
    }
    TriMesh { vertices, faces, noise: None }
}

/// Copy of `mesh` with one standard-normal draw per vertex, in vertex order.
pub fn attach_vertex_noise<T: Real, R: Rng + ?Sized>(mesh: &TriMesh<T>, rng: &mut R) -> TriMesh<T> {
    let noise = (0..mesh.vertices.len())
        .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    TriMesh { vertices: mesh.vertices.clone(), faces: mesh.faces.clone(), noise: Some(noise) }
}

#[cfg(test)]
pub(crate) fn tetrahedron() -> TriMesh<f64> {
    let v = vec![
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(1.0, -1.0, -1.0),
        Vec3::new(-1.0, 1.0, -1.0),
        Vec3::new(-1.0, -1.0, 1.0),
    ];
    TriMesh::new(v, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_triangle_subdivides_into_four() {
        let m = TriMesh::new(
            vec![Vec3::new(0.0f64, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let s = subdivide(&m);
        assert_eq!(s.face_count(), 4);
        assert_eq!(s.vertex_count(), 6);
        assert!((s.area() - m.area()).abs() < 1e-15);
        assert_eq!(s.boundary_edge_count(), 6);
        assert_eq!(s.euler_characteristic(), 1);
    }

    #[test]
    fn tetrahedron_counts() {
        let t = tetrahedron();
        assert_eq!((t.vertex_count(), t.edge_count(), t.face_count()), (4, 6, 4));
        assert!(t.is_watertight());
        let s = subdivide(&t);
        assert_eq!((s.face_count(), s.vertex_count()), (16, 10));
        assert_eq!(s.euler_characteristic(), 2);
        assert!(s.is_watertight());
        let s2 = subdivide(&s);
        assert_eq!(s2.face_count(), 64);
        assert_eq!(s2.euler_characteristic(), 2);
    }

    #[test]
    fn subdivision_keeps_winding() {
        let t = tetrahedron();
        let s = subdivide(&t);
        for f in 0..s.face_count() {
            let n = s.face_normal(f);
            let [a, b, c] = s.faces[f].map(|i| s.vertices[i as usize]);
            let centroid = (a + b + c) * (1.0 / 3.0);
            assert!(n.dot(centroid) > 0.0);
        }
    }

    #[test]
    fn noise_is_reproducible_and_leaves_geometry() {
        let t = tetrahedron();
        let a = attach_vertex_noise(&t, &mut ChaCha8Rng::seed_from_u64(9));
        let b = attach_vertex_noise(&t, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_eq!(a.vertices, t.vertices);
        assert_eq!(a.noise.as_ref().unwrap().len(), 4);
        let e = attach_vertex_noise(&TriMesh::<f64>::empty(), &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(e.noise, Some(vec![]));
    }

    #[test]
    fn noise_moments() {
        let m = TriMesh::<f64> { vertices: vec![Vec3::zero(); 100_000], faces: vec![], noise: None };
        let n = attach_vertex_noise(&m, &mut ChaCha8Rng::seed_from_u64(2)).noise.unwrap();
        let mean = n.iter().sum::<f64>() / n.len() as f64;
        let var = n.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n.len() - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.02, "std {}", var.sqrt());
    }

    #[test]
    fn raycast_hits_nearest_face() {
        let t = tetrahedron();
        let ray = Ray { origin: Vec3::new(-0.1, 0.1, 5.0), direction: Vec3::new(0.0, 0.0, -1.0) };
        let hit = t.raycast(&ray).unwrap();
        // Face through (1,1,1), (-1,1,-1), (-1,-1,1) is the plane x - y - z = -1.
        assert!((hit - 4.2).abs() < 1e-12, "{hit}");
        let miss = Ray { origin: Vec3::new(5.0, 5.0, 5.0), direction: Vec3::new(0.0, 0.0, 1.0) };
        assert!(t.raycast(&miss).is_none());
    }

    #[test]
    fn validate_catches_bad_indices() {
        assert!(TriMesh::new(vec![Vec3::<f64>::zero()], vec![[0, 0, 1]]).is_err());
        let mut t = tetrahedron();
        t.noise = Some(vec![0.0]);
        assert!(t.validate().is_err());
    }
}
