//! Even-bin sampling with one shared jitter offset per ray.

use rand::Rng;

use crate::error::{ensure, Result};
use crate::scalar::Real;

/// `N` samples `t_i = t_near + delta + i * bin_size`, `delta` in `[0, bin_size)`.
///
/// All positions are snapped to the spacing of representable values at
/// `t_far`, which makes every gap `t_{i+1} - t_i` equal `bin_size` exactly in
/// floating point. The snapping moves `t_near` and `bin_size` by at most one
/// unit in the last place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySamples<T> {
    t_near: T,
    t_far: T,
    count: usize,
    delta: T,
    bin_size: T,
    start: T,
}

/// Spacing of representable values in the binade containing `x > 0`.
fn lattice_quantum<T: Real>(x: T) -> T {
    let two = T::lit(2.0);
    let mut e = x.log2().floor().to_i32().unwrap_or(0);
    while two.powi(e + 1) <= x {
        e += 1;
    }
    while two.powi(e) > x {
        e -= 1;
    }
    two.powi(e) * T::epsilon()
}

impl<T: Real> RaySamples<T> {
    /// Samples for a fixed offset; `delta` is clamped into `[0, bin_size)`.
    pub fn with_offset(t_near: T, t_far: T, count: usize, delta: T) -> Result<Self> {
        ensure!(count >= 1, Parameter, "need at least one sample per ray");
        ensure!(
            t_near >= T::zero() && t_far > t_near && t_far.is_finite(),
            Parameter,
            "invalid ray interval [{t_near}, {t_far}]"
        );
        let q = lattice_quantum(t_far);
        let near = (t_near / q).ceil() * q;
        let steps = ((t_far - near) / q / T::from_usize_lossy(count)).floor();
        ensure!(steps >= T::one(), Parameter, "interval [{t_near}, {t_far}] too short for {count} bins");
        let bin_size = steps * q;
        let mut d = (delta.max(T::zero()) / q).floor() * q;
        if d >= bin_size {
            d = bin_size - q;
        }
        Ok(Self { t_near: near, t_far, count, delta: d, bin_size, start: near + d })
    }

    /// Draws the ray's single offset uniformly from `[0, bin_size)`.
    pub fn sample<R: Rng + ?Sized>(t_near: T, t_far: T, count: usize, rng: &mut R) -> Result<Self> {
        let u: f64 = rng.random();
        let bin = (t_far - t_near) / T::from_usize_lossy(count.max(1));
        Self::with_offset(t_near, t_far, count, bin * T::lit(u))
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn t_near(&self) -> T {
        self.t_near
    }

    pub fn t_far(&self) -> T {
        self.t_far
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn bin_size(&self) -> T {
        self.bin_size
    }

    #[inline]
    pub fn t(&self, i: usize) -> T {
        self.start + T::from_usize_lossy(i) * self.bin_size
    }

    pub fn positions(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.count).map(move |i| self.t(i))
    }

    /// Integration interval of every sample; always `bin_size`.
    pub fn interval(&self, _i: usize) -> T {
        self.bin_size
    }
}

pub fn sample_ray<T: Real, R: Rng + ?Sized>(t_near: T, t_far: T, count: usize, rng: &mut R) -> Result<RaySamples<T>> {
    RaySamples::sample(t_near, t_far, count, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_jitter_quarters() {
        let s = RaySamples::with_offset(0.0f64, 1.0, 4, 0.0).unwrap();
        assert_eq!(s.positions().collect::<Vec<_>>(), vec![0.0, 0.25, 0.5, 0.75]);
    }

    #[test]
    fn ffhq_interval_bin_size() {
        let s = RaySamples::with_offset(0.88f64, 1.12, 24, 0.0).unwrap();
        assert!((s.bin_size() - 0.01).abs() < 1e-15);
        let s = RaySamples::with_offset(0.88f64, 1.12, 128, 0.0).unwrap();
        assert!((s.bin_size() - 0.001875).abs() < 1e-15);
    }

    #[test]
    fn gaps_are_exactly_one_bin_and_inside_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..2000 {
            let near = rng.random_range(0.0..2.0);
            let far = near + rng.random_range(0.01..3.0);
            let n = rng.random_range(1..300);
            let s = RaySamples::<f64>::sample(near, far, n, &mut rng).unwrap();
            let t: Vec<f64> = s.positions().collect();
            assert!(t[0] >= near && *t.last().unwrap() < far);
            assert!(s.delta() >= 0.0 && s.delta() < s.bin_size());
            for w in t.windows(2) {
                assert_eq!(w[1] - w[0], s.bin_size());
            }
        }
        let s = RaySamples::<f32>::sample(0.88, 1.12, 128, &mut rng).unwrap();
        let t: Vec<f32> = s.positions().collect();
        assert!(t.windows(2).all(|w| w[1] - w[0] == s.bin_size()));
    }

    #[test]
    fn samples_are_a_function_of_delta_alone() {
        let a = RaySamples::with_offset(0.88f64, 1.12, 24, 0.004).unwrap();
        let b = RaySamples::with_offset(0.88f64, 1.12, 24, 0.004).unwrap();
        assert_eq!(a, b);
        assert!((a.t(0) - 0.884).abs() < 1e-15);
    }

    #[test]
    fn invalid_ranges() {
        assert!(RaySamples::with_offset(1.0f64, 1.0, 4, 0.0).is_err());
        assert!(RaySamples::with_offset(1.0f64, 0.5, 4, 0.0).is_err());
        assert!(RaySamples::with_offset(0.0f64, 1.0, 0, 0.0).is_err());
    }
}
