use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::scalar::{sigmoid, Real};

/// Tightness `alpha` of the SDF-to-density kernel. Smaller is sharper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityParams<T> {
    alpha: T,
}

impl<T: Real> DensityParams<T> {
    /// Starting value when alpha is a trained parameter.
    pub const TRAINED_INIT: f64 = 0.1;

    pub fn new(alpha: T) -> Result<Self> {
        ensure!(alpha > T::zero() && alpha.is_finite(), Parameter, "alpha must be positive, got {alpha}");
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }
}

/// `sigma = sigmoid(-d / alpha) / alpha`, in `(0, 1/alpha)` up to underflow.
#[inline]
pub fn sdf_to_density<T: Real>(d: T, params: DensityParams<T>) -> T {
    sigmoid(-d / params.alpha) / params.alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn on_surface_density_is_half_inverse_alpha() {
        let p = DensityParams::new(0.5).unwrap();
        assert_eq!(sdf_to_density(0.0, p), 1.0);
    }

    #[test]
    fn far_outside_is_effectively_empty() {
        let p = DensityParams::new(0.01).unwrap();
        assert!(sdf_to_density(10.0f64, p) < 1e-300);
    }

    #[test]
    fn one_alpha_inside() {
        // sigmoid(1) evaluated independently.
        let s1 = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((s1 - 0.731_058_578_630_004_9).abs() < 1e-15);
        for alpha in [1e-3, 0.1, 2.0] {
            let p = DensityParams::new(alpha).unwrap();
            assert!((sdf_to_density(-alpha, p) - s1 / alpha).abs() <= 1e-15 / alpha);
        }
    }

    #[test]
    fn bounded_and_monotone() {
        let p = DensityParams::new(0.2).unwrap();
        let mut prev = f64::INFINITY;
        for i in -50..=50 {
            let s = sdf_to_density(i as f64 * 0.05, p);
            assert!(s >= 0.0 && s < 5.0);
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn non_positive_alpha_is_rejected() {
        assert!(DensityParams::new(0.0f64).is_err());
        assert!(DensityParams::new(-1.0f64).is_err());
        assert!(DensityParams::new(f64::NAN).is_err());
    }
}
