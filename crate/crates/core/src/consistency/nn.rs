//! Exact nearest-neighbour queries through a uniform grid.

use rayon::prelude::*;

use crate::scalar::Real;
use crate::vec3::Vec3;

/// Below this many points queries scan the whole cloud.
const BRUTE_FORCE_BELOW: usize = 32;

/// Uniform-grid index over a point set. Queries return exactly the squared
/// distance a brute-force scan would, since both evaluate the same
/// expression per candidate and the grid only prunes candidates that cannot
/// be closer.
#[derive(Debug, Clone)]
pub struct PointIndex<T> {
    points: Vec<Vec3<T>>,
    origin: Vec3<T>,
    cell: T,
    dims: [usize; 3],
    /// Cell `c` owns `order[start[c]..start[c + 1]]`.
    start: Vec<usize>,
    order: Vec<usize>,
}

#[inline]
pub fn squared_distance<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    (a - b).norm_squared()
}

/// Smallest squared distance from `q` to any of `points`.
pub fn brute_force_nearest<T: Real>(points: &[Vec3<T>], q: Vec3<T>) -> T {
    points.iter().map(|p| squared_distance(*p, q)).fold(T::infinity(), T::min)
}

impl<T: Real> PointIndex<T> {
    pub fn new(points: &[Vec3<T>]) -> Self {
        let n = points.len();
        let mut lo = Vec3::splat(T::infinity());
        let mut hi = Vec3::splat(T::neg_infinity());
        for p in points {
            lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        if n < BRUTE_FORCE_BELOW {
            return Self {
                points: points.to_vec(),
                origin: Vec3::zero(),
                cell: T::one(),
                dims: [1, 1, 1],
                start: vec![0, n],
                order: (0..n).collect(),
            };
        }
        let ext = hi - lo;
        // About one point per cell over the occupied extent; depth clouds
        // are surfaces, so size cells from the two largest extents.
        let mut e = [ext.x, ext.y, ext.z];
        e.sort_by(|a, b| b.partial_cmp(a).expect("finite extents"));
        let area = (e[0] * e[1]).max(e[0] * e[0] * T::lit(1e-6));
        let mut cell = (area / T::from_usize_lossy(n)).sqrt();
        if !(cell > T::zero()) {
            cell = T::one();
        }
        let dims = [dim_for(ext.x, cell), dim_for(ext.y, cell), dim_for(ext.z, cell)];
        // Keep the cell grid no larger than a few cells per point.
        let mut index = Self { points: points.to_vec(), origin: lo, cell, dims, start: Vec::new(), order: Vec::new() };
        while index.dims.iter().product::<usize>() > 8 * n.max(1) {
            index.cell = index.cell * T::lit(2.0);
            index.dims = [dim_for(ext.x, index.cell), dim_for(ext.y, index.cell), dim_for(ext.z, index.cell)];
        }
        index.build();
        index
    }

    fn build(&mut self) {
        let ncell: usize = self.dims.iter().product();
        let cells: Vec<usize> = self.points.iter().map(|p| self.flat(self.cell_of(*p))).collect();
        let mut count = vec![0usize; ncell + 1];
        for c in &cells {
            count[c + 1] += 1;
        }
        for c in 0..ncell {
            count[c + 1] += count[c];
        }
        let mut fill = count.clone();
        let mut order = vec![0; self.points.len()];
        for (i, c) in cells.iter().enumerate() {
            order[fill[*c]] = i;
            fill[*c] += 1;
        }
        self.start = count;
        self.order = order;
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn cell_of(&self, p: Vec3<T>) -> [usize; 3] {
        let c = |x: T, o: T, d: usize| {
            let f = ((x - o) / self.cell).floor();
            if f <= T::zero() {
                0
            } else {
                f.to_usize().unwrap_or(usize::MAX).min(d - 1)
            }
        };
        [c(p.x, self.origin.x, self.dims[0]), c(p.y, self.origin.y, self.dims[1]), c(p.z, self.origin.z, self.dims[2])]
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    fn scan_cell(&self, c: [usize; 3], q: Vec3<T>, best: &mut T) {
        let f = self.flat(c);
        for &i in &self.order[self.start[f]..self.start[f + 1]] {
            let d = squared_distance(self.points[i], q);
            if d < *best {
                *best = d;
            }
        }
    }

    /// Smallest squared distance from `q` to an indexed point; infinite for
    /// an empty index.
    pub fn nearest_squared(&self, q: Vec3<T>) -> T {
        let mut best = T::infinity();
        if self.dims == [1, 1, 1] {
            self.scan_cell([0, 0, 0], q, &mut best);
            return best;
        }
        let c = self.cell_of(q);
        let max_ring = self.dims.iter().max().copied().unwrap_or(1);
        for r in 0..=max_ring {
            // Points outside rings 0..=r are at least r cells away; the
            // slack covers rounding in the cell assignment.
            self.scan_ring(c, r, q, &mut best);
            let bound = T::from_usize_lossy(r) * self.cell * T::lit(1.0 - 1e-9);
            if best <= bound * bound {
                break;
            }
        }
        best
    }

    fn scan_ring(&self, c: [usize; 3], r: usize, q: Vec3<T>, best: &mut T) {
        let r = r as i64;
        let range = |a: usize, d: usize| {
            let lo = (a as i64 - r).max(0);
            let hi = (a as i64 + r).min(d as i64 - 1);
            lo..=hi
        };
        for z in range(c[2], self.dims[2]) {
            let dz = (z - c[2] as i64).abs();
            for y in range(c[1], self.dims[1]) {
                let dy = (y - c[1] as i64).abs();
                if dz == r || dy == r {
                    for x in range(c[0], self.dims[0]) {
                        self.scan_cell([x as usize, y as usize, z as usize], q, best);
                    }
                } else {
                    // Only the two x faces of the ring shell.
                    for x in [c[0] as i64 - r, c[0] as i64 + r] {
                        if x >= 0 && x < self.dims[0] as i64 {
                            self.scan_cell([x as usize, y as usize, z as usize], q, best);
                        }
                        if r == 0 {
                            break;
                        }
                    }
                }
            }
        }
    }

    /// Nearest squared distances for many queries, in query order.
    pub fn nearest_squared_all(&self, queries: &[Vec3<T>]) -> Vec<T> {
        queries.par_iter().map(|q| self.nearest_squared(*q)).collect()
    }
}

fn dim_for<T: Real>(x: T, cell: T) -> usize {
    ((x / cell).floor().to_usize().unwrap_or(0) + 1).min(1 << 10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<Vec3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                // Points on a noisy sphere, like a depth cloud.
                let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                v.normalize() * rng.random_range(0.19..0.21)
            })
            .collect()
    }

    #[test]
    fn matches_brute_force_exactly() {
        for (n, seed) in [(5, 0), (31, 1), (32, 2), (1000, 3), (5000, 4)] {
            let pts = cloud(n, seed);
            let idx = PointIndex::new(&pts);
            let qs = cloud(500, seed + 100);
            let mut far = qs.clone();
            far.extend(qs.iter().map(|q| *q * 7.0));
            for q in far {
                assert_eq!(idx.nearest_squared(q), brute_force_nearest(&pts, q));
            }
        }
    }

    #[test]
    fn degenerate_clouds() {
        let same = vec![Vec3::new(0.1, 0.2, 0.3); 100];
        let idx = PointIndex::new(&same);
        assert_eq!(idx.nearest_squared(Vec3::new(0.1, 0.2, 0.3)), 0.0);
        assert_eq!(idx.nearest_squared(Vec3::zero()), brute_force_nearest(&same, Vec3::zero()));
        let line: Vec<_> = (0..200).map(|i| Vec3::new(i as f64 * 0.01, 0.0, 0.0)).collect();
        let idx = PointIndex::new(&line);
        for q in [Vec3::new(0.505, 0.1, 0.0), Vec3::new(-3.0, 1.0, 2.0)] {
            assert_eq!(idx.nearest_squared(q), brute_force_nearest(&line, q));
        }
        assert_eq!(PointIndex::<f64>::new(&[]).nearest_squared(Vec3::zero()), f64::INFINITY);
    }

    proptest! {
        #[test]
        fn random_clouds_agree(pts in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..300),
                               qs in prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), 1..20)) {
            let pts: Vec<_> = pts.iter().map(|a| Vec3::new(a[0], a[1], a[2])).collect();
            let idx = PointIndex::new(&pts);
            for q in qs {
                let q = Vec3::new(q[0], q[1], q[2]);
                prop_assert_eq!(idx.nearest_squared(q), brute_force_nearest(&pts, q));
            }
        }
    }
}
