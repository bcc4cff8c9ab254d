//! First-order optimiser used by the fitting routines.

use crate::error::{ensure, Result};
use crate::scalar::Real;

/// Adam with bias correction. With `beta1 = 0` it keeps no momentum and
/// only rescales each coordinate by its running gradient magnitude.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: T, beta1: T, beta2: T, eps: T) -> Result<Self> {
        ensure!(lr > T::zero() && lr.is_finite(), Parameter, "learning rate must be positive, got {lr}");
        let unit = |b: T| b >= T::zero() && b < T::one();
        ensure!(unit(beta1) && unit(beta2), Parameter, "betas must lie in [0, 1), got ({beta1}, {beta2})");
        ensure!(eps > T::zero(), Parameter, "eps must be positive");
        Ok(Self { lr, beta1, beta2, eps, step: 0, m: Vec::new(), v: Vec::new() })
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    /// Updates each parameter block in place. Blocks must keep the same
    /// shapes and order across calls.
    pub fn step(&mut self, params: Vec<&mut [T]>, grads: Vec<&[T]>) {
        assert_eq!(params.len(), grads.len(), "parameter and gradient block counts differ");
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![T::zero(); g.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let c1 = T::one() - self.beta1.powi(self.step);
        let c2 = T::one() - self.beta2.powi(self.step);
        let lr = self.lr * c2.sqrt() / c1;
        let (b1, b2) = (self.beta1, self.beta2);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            assert_eq!(p.len(), m.len(), "parameter block {k} changed shape");
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                p[i] -= lr * m[i] / (v[i].sqrt() + self.eps * c2.sqrt());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_each_coordinate_by_lr() {
        let mut opt = Adam::new(0.1, 0.0, 0.9, 1e-12).unwrap();
        let mut p = vec![1.0f64, -2.0, 0.5];
        opt.step(vec![&mut p], vec![&[3.0, -0.01, 0.0]]);
        assert!((p[0] - 0.9).abs() < 1e-9);
        assert!((p[1] + 1.9).abs() < 1e-9);
        assert_eq!(p[2], 0.5);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut opt = Adam::new(0.05, 0.0, 0.9, 1e-8).unwrap();
        let mut p = vec![3.0f64, -4.0];
        for _ in 0..2000 {
            let g = [2.0 * p[0], 8.0 * p[1]];
            opt.step(vec![&mut p], vec![&g]);
        }
        assert!(p[0].abs() < 0.05 && p[1].abs() < 0.05, "{p:?}");
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(Adam::new(0.0, 0.0, 0.9, 1e-8).is_err());
        assert!(Adam::new(1e-3, 1.0, 0.9, 1e-8).is_err());
    }
}
