//! Discrete volume-rendering quadrature.
//!
//! `a_i = 1 - exp(-sigma_i * bin)`, `T_i = prod_{j<i} (1 - a_j)`,
//! `w_i = T_i * a_i`. Every interval, the last one included, has length
//! `bin_size`, so a ray through constant density telescopes to
//! `1 - exp(-sigma * (t_far - t_near))`.

use super::sampler::RaySamples;
use crate::error::{ensure, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeWeights<T> {
    pub transmittance: Vec<T>,
    pub alpha: Vec<T>,
    pub weights: Vec<T>,
    pub opacity: T,
}

/// Streaming accumulator for one ray. Used directly by the renderer so the
/// per-sample values never have to be materialised.
#[derive(Debug, Clone, Copy)]
pub struct RayAccumulator<T> {
    transmittance: T,
    opacity: T,
    depth: T,
}

impl<T: Real> Default for RayAccumulator<T> {
    fn default() -> Self {
        Self { transmittance: T::one(), opacity: T::zero(), depth: T::zero() }
    }
}

impl<T: Real> RayAccumulator<T> {
    /// Adds one sample; returns `(T_i, a_i, w_i)`.
    #[inline]
    pub fn push(&mut self, sigma: T, interval: T, t: T) -> (T, T, T) {
        let a = -(-sigma * interval).exp_m1();
        let trans = self.transmittance;
        let w = trans * a;
        self.transmittance = trans * (T::one() - a);
        self.opacity += w;
        self.depth += w * t;
        (trans, a, w)
    }

    /// Sum of weights, clamped against rounding past 1.
    pub fn opacity(&self) -> T {
        self.opacity.min(T::one())
    }

    pub fn depth(&self) -> T {
        self.depth
    }

    pub fn transmittance(&self) -> T {
        self.transmittance
    }
}

/// Integrates `values` (`N x k`, row-major) along a ray with densities
/// `densities` and returns the per-ray result plus the weights for reuse.
pub fn composite<T: Real>(
    samples: &RaySamples<T>,
    densities: &[T],
    values: &[T],
    k: usize,
) -> Result<(Vec<T>, CompositeWeights<T>)> {
    let n = samples.len();
    ensure!(densities.len() == n, Shape, "{} densities for {n} samples", densities.len());
    ensure!(values.len() == n * k, Shape, "values hold {} entries, expected {n}x{k}", values.len());
    ensure!(
        densities.iter().all(|s| *s >= T::zero()),
        Precondition,
        "densities must be non-negative"
    );
    let mut acc = RayAccumulator::default();
    let mut weights = CompositeWeights {
        transmittance: Vec::with_capacity(n),
        alpha: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        opacity: T::zero(),
    };
    let mut out = vec![T::zero(); k];
    for i in 0..n {
        let (tr, a, w) = acc.push(densities[i], samples.interval(i), samples.t(i));
        weights.transmittance.push(tr);
        weights.alpha.push(a);
        weights.weights.push(w);
        for (o, v) in out.iter_mut().zip(&values[i * k..(i + 1) * k]) {
            *o += w * *v;
        }
    }
    weights.opacity = acc.opacity();
    Ok((out, weights))
}

/// Opacity at or above which a ray counts as terminating.
pub const OPACITY_THRESHOLD: f64 = 0.5;

/// Unnormalised expected termination distance `sum w_i t_i`, and whether the
/// ray's opacity reaches [`OPACITY_THRESHOLD`].
pub fn expected_depth<T: Real>(samples: &RaySamples<T>, weights: &CompositeWeights<T>) -> (T, bool) {
    let depth = weights.weights.iter().enumerate().map(|(i, w)| *w * samples.t(i)).sum();
    (depth, weights.opacity >= T::lit(OPACITY_THRESHOLD))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn samples(n: usize) -> RaySamples<f64> {
        RaySamples::with_offset(0.88, 1.12, n, 0.0).unwrap()
    }

    #[test]
    fn empty_space() {
        let s = samples(16);
        let (v, w) = composite(&s, &[0.0; 16], &[1.0; 32], 2).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
        assert_eq!(w.opacity, 0.0);
        assert_eq!(expected_depth(&s, &w), (0.0, false));
    }

    #[test]
    fn constant_density_telescopes() {
        for n in [1, 24, 128] {
            let s = samples(n);
            for sigma in [0.1, 1.0, 10.0, 100.0] {
                let (_, w) = composite(&s, &vec![sigma; n], &[], 0).unwrap();
                let exact = 1.0 - (-sigma * (s.t_far() - s.t_near())).exp();
                assert!((w.opacity - exact).abs() < 1e-12, "n={n} sigma={sigma}");
            }
        }
    }

    #[test]
    fn opaque_first_sample() {
        let s = samples(8);
        let mut sig = vec![0.0; 8];
        sig[0] = 1e6;
        let vals: Vec<f64> = (0..8).map(|i| i as f64 + 3.0).collect();
        let (v, w) = composite(&s, &sig, &vals, 1).unwrap();
        assert!((w.weights[0] - 1.0).abs() < 1e-12);
        assert!((v[0] - 3.0).abs() < 1e-9);
        let (d, valid) = expected_depth(&s, &w);
        assert!(valid && (d - s.t(0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_density_and_bad_shapes() {
        let s = samples(2);
        assert!(composite(&s, &[0.0, -1.0], &[], 0).is_err());
        assert!(composite(&s, &[0.0], &[], 0).is_err());
        assert!(composite(&s, &[0.0, 0.0], &[0.0; 3], 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn weights_stay_bounded(sig in prop::collection::vec(0.0f64..1e4, 1..64), delta in 0.0f64..1.0) {
            let s = RaySamples::with_offset(0.88, 1.12, sig.len(), delta * 0.24 / sig.len() as f64).unwrap();
            let (_, w) = composite(&s, &sig, &[], 0).unwrap();
            prop_assert!(w.opacity >= 0.0 && w.opacity <= 1.0 + 1e-12);
            prop_assert_eq!(w.transmittance[0], 1.0);
            prop_assert!(w.transmittance.windows(2).all(|p| p[1] <= p[0]));
            prop_assert!(w.weights.iter().all(|x| *x >= 0.0));
        }
    }
}
