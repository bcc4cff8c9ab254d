use rand::Rng;

use crate::error::{ensure, Result};
use crate::scalar::{axpy, dot, Real};

/// Fully connected layer `y = W x + b` with `W` stored row-major (out x in).
///
/// The same type carries the weights of a FiLM-SIREN layer and, when used
/// as a gradient container, the derivative of a loss with respect to them.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    in_dim: usize,
    out_dim: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Weights of one modulated sine layer. Modulation lives outside the layer.
pub type FilmSirenLayer<T> = Linear<T>;

impl<T: Real> Linear<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![T::zero(); in_dim * out_dim],
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn from_parts(in_dim: usize, out_dim: usize, weight: Vec<T>, bias: Vec<T>) -> Result<Self> {
        ensure!(
            weight.len() == in_dim * out_dim,
            Shape,
            "weight has {} entries, expected {out_dim}x{in_dim}",
            weight.len()
        );
        ensure!(bias.len() == out_dim, Shape, "bias has {} entries, expected {out_dim}", bias.len());
        Ok(Self { in_dim, out_dim, weight, bias })
    }

    /// Weights uniform in `[-weight_bound, weight_bound]`, biases uniform in
    /// `[-bias_bound, bias_bound]`.
    pub fn uniform<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        weight_bound: f64,
        bias_bound: f64,
        rng: &mut R,
    ) -> Self {
        let mut draw = |b: f64| {
            if b > 0.0 {
                T::lit(rng.random_range(-b..b))
            } else {
                T::zero()
            }
        };
        let weight = (0..in_dim * out_dim).map(|_| draw(weight_bound)).collect();
        let bias = (0..out_dim).map(|_| draw(bias_bound)).collect();
        Self { in_dim, out_dim, weight, bias }
    }

    /// SIREN initialisation for the first sine layer: `U[-1/in, 1/in]`.
    pub fn siren_first<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / in_dim as f64;
        Self::uniform(in_dim, out_dim, bound, 1.0 / (in_dim as f64).sqrt(), rng)
    }

    /// SIREN initialisation for later layers: `U[-sqrt(6/in)/w0, sqrt(6/in)/w0]`.
    pub fn siren_inner<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        omega0: f64,
        rng: &mut R,
    ) -> Self {
        let bound = (6.0 / in_dim as f64).sqrt() / omega0;
        Self::uniform(in_dim, out_dim, bound, 1.0 / (in_dim as f64).sqrt(), rng)
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    #[inline]
    pub fn row(&self, o: usize) -> &[T] {
        &self.weight[o * self.in_dim..(o + 1) * self.in_dim]
    }

    /// `out = W x + b`; lengths are the caller's responsibility.
    #[inline]
    pub fn affine_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for (o, y) in out.iter_mut().enumerate() {
            *y = dot(self.row(o), x) + self.bias[o];
        }
    }

    pub fn affine(&self, x: &[T]) -> Result<Vec<T>> {
        ensure!(x.len() == self.in_dim, Shape, "input width {} != layer input {}", x.len(), self.in_dim);
        let mut out = vec![T::zero(); self.out_dim];
        self.affine_into(x, &mut out);
        Ok(out)
    }

    /// `dx += W^T g`
    #[inline]
    pub(crate) fn backprop_input(&self, g: &[T], dx: &mut [T]) {
        for (o, go) in g.iter().enumerate() {
            if *go != T::zero() {
                axpy(*go, self.row(o), dx);
            }
        }
    }

    /// Accumulates `dW += g x^T`, `db += g` into `self`, treated as a gradient.
    #[inline]
    pub(crate) fn accumulate_outer(&mut self, g: &[T], x: &[T]) {
        let in_dim = self.in_dim;
        for (o, go) in g.iter().enumerate() {
            self.bias[o] += *go;
            if *go != T::zero() {
                axpy(*go, x, &mut self.weight[o * in_dim..(o + 1) * in_dim]);
            }
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += *b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += *b;
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.in_dim, self.out_dim)
    }

    pub fn cast<U: Real>(&self) -> Linear<U> {
        Linear {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            weight: self.weight.iter().map(|w| U::lit(w.to_f64_lossy())).collect(),
            bias: self.bias.iter().map(|w| U::lit(w.to_f64_lossy())).collect(),
        }
    }
}

/// `sin(gamma * (W x + b) + beta)`, elementwise over the layer outputs.
pub fn film_siren_forward<T: Real>(
    layer: &FilmSirenLayer<T>,
    x: &[T],
    gamma: &[T],
    beta: &[T],
) -> Result<Vec<T>> {
    ensure!(
        gamma.len() == layer.out_dim() && beta.len() == layer.out_dim(),
        Shape,
        "modulation widths ({}, {}) != layer output {}",
        gamma.len(),
        beta.len(),
        layer.out_dim()
    );
    let mut u = layer.affine(x)?;
    for ((ui, g), b) in u.iter_mut().zip(gamma).zip(beta) {
        *ui = (*g * *ui + *b).sin();
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_layer_is_plain_sine() {
        let layer = Linear::from_parts(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let y = film_siren_forward(&layer, &[0.0, FRAC_PI_2], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!(y[0].abs() < 1e-15);
        assert!((y[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_frequency_gives_sine_of_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = Linear::<f64>::uniform(4, 5, 2.0, 2.0, &mut rng);
        let y = film_siren_forward(&layer, &[0.3, -1.0, 2.0, 0.1], &[0.0; 5], &[FRAC_PI_2; 5]).unwrap();
        assert!(y.iter().all(|v| (*v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn matches_scalar_reevaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (i, o) = (rng.random_range(1..20), rng.random_range(1..20));
            let layer = Linear::<f64>::uniform(i, o, 1.0, 1.0, &mut rng);
            let x: Vec<f64> = (0..i).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..o).map(|_| rng.random_range(0.0..30.0)).collect();
            let b: Vec<f64> = (0..o).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y = film_siren_forward(&layer, &x, &g, &b).unwrap();
            for r in 0..o {
                let mut acc = layer.bias[r];
                for c in 0..i {
                    acc += layer.weight[r * i + c] * x[c];
                }
                let expect = (g[r] * acc + b[r]).sin();
                assert!((y[r] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn width_mismatch_is_a_shape_error() {
        let layer = Linear::<f64>::zeros(3, 2);
        assert!(film_siren_forward(&layer, &[0.0; 2], &[1.0; 2], &[0.0; 2]).is_err());
        assert!(film_siren_forward(&layer, &[0.0; 3], &[1.0; 3], &[0.0; 2]).is_err());
        assert!(Linear::<f64>::from_parts(3, 2, vec![0.0; 5], vec![0.0; 2]).is_err());
    }
}
