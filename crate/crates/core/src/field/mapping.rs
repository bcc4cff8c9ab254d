//! Latent codes, the mapping network and the per-layer FiLM signals it emits.

use rand::Rng;
use rand_distr::StandardNormal;

use super::layer::Linear;
use crate::error::{ensure, Result};
use crate::scalar::Real;

/// Latent vector `z`, one per generated identity.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode<T>(pub Vec<T>);

impl<T: Real> LatentCode<T> {
    pub fn new(z: Vec<T>) -> Result<Self> {
        ensure!(z.iter().all(|v| v.is_finite()), Precondition, "latent code has non-finite entries");
        Ok(Self(z))
    }

    /// Draw from the unit normal distribution.
    pub fn sample<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self((0..dim).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// One `(gamma, beta)` pair per FiLM layer: the eight trunk layers followed by
/// the color-path layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationSignals<T> {
    pub gammas: Vec<Vec<T>>,
    pub betas: Vec<Vec<T>>,
}

impl<T: Real> ModulationSignals<T> {
    /// Every frequency set to `gamma`, every phase to `beta`.
    pub fn uniform(widths: &[usize], gamma: T, beta: T) -> Self {
        Self {
            gammas: widths.iter().map(|w| vec![gamma; *w]).collect(),
            betas: widths.iter().map(|w| vec![beta; *w]).collect(),
        }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        Self::uniform(widths, T::zero(), T::zero())
    }

    pub fn widths(&self) -> Vec<usize> {
        self.gammas.iter().map(Vec::len).collect()
    }

    pub fn layer_count(&self) -> usize {
        self.gammas.len()
    }

    pub fn check_widths(&self, expected: &[usize]) -> Result<()> {
        ensure!(
            self.gammas.len() == expected.len() && self.betas.len() == expected.len(),
            Shape,
            "modulation has {}/{} layers, network expects {}",
            self.gammas.len(),
            self.betas.len(),
            expected.len()
        );
        for (i, w) in expected.iter().enumerate() {
            ensure!(
                self.gammas[i].len() == *w && self.betas[i].len() == *w,
                Shape,
                "modulation layer {i} widths ({}, {}) != {w}",
                self.gammas[i].len(),
                self.betas[i].len()
            );
        }
        Ok(())
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.gammas.iter_mut().zip(&other.gammas) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
        }
        for (a, b) in self.betas.iter_mut().zip(&other.betas) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
        }
    }

    /// Flattened as the mapping head emits them: all gammas, then all betas.
    pub fn to_flat(&self) -> Vec<T> {
        self.gammas.iter().chain(&self.betas).flatten().copied().collect()
    }

    pub fn from_flat(widths: &[usize], flat: &[T]) -> Result<Self> {
        let total: usize = widths.iter().sum();
        ensure!(flat.len() == 2 * total, Shape, "flat modulation length {} != {}", flat.len(), 2 * total);
        let mut it = flat.iter().copied();
        let mut take = || widths.iter().map(|w| it.by_ref().take(*w).collect::<Vec<_>>()).collect();
        let gammas = take();
        let betas = take();
        Ok(Self { gammas, betas })
    }

    pub fn cast<U: Real>(&self) -> ModulationSignals<U> {
        let c = |v: &Vec<Vec<T>>| {
            v.iter()
                .map(|l| l.iter().map(|x| U::lit(x.to_f64_lossy())).collect())
                .collect()
        };
        ModulationSignals { gammas: c(&self.gammas), betas: c(&self.betas) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingConfig {
    pub z_dim: usize,
    pub hidden_width: usize,
    pub w_dim: usize,
    pub leaky_slope: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self { z_dim: 256, hidden_width: 256, w_dim: 256, leaky_slope: 0.2 }
    }
}

/// Three leaky-ReLU affine layers mapping `z` to `w`, then one affine head
/// producing every FiLM frequency and phase.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingNetwork<T> {
    pub layers: Vec<Linear<T>>,
    pub head: Linear<T>,
    leaky_slope: T,
    film_widths: Vec<usize>,
}

/// Gradients share the network's layout.
pub type MappingGradients<T> = MappingNetwork<T>;

pub const MAPPING_DEPTH: usize = 3;

impl<T: Real> MappingNetwork<T> {
    /// Kaiming-uniform hidden layers. The gamma half of the head is biased to
    /// `omega0` so fresh signals sit in the SIREN frequency regime.
    pub fn new<R: Rng + ?Sized>(
        cfg: &MappingConfig,
        film_widths: &[usize],
        omega0: f64,
        rng: &mut R,
    ) -> Self {
        let gain = (6.0 / (1.0 + cfg.leaky_slope * cfg.leaky_slope)).sqrt();
        let mut layers = Vec::with_capacity(MAPPING_DEPTH);
        let mut fan_in = cfg.z_dim;
        for i in 0..MAPPING_DEPTH {
            let out = if i + 1 == MAPPING_DEPTH { cfg.w_dim } else { cfg.hidden_width };
            let b = gain / (fan_in as f64).sqrt();
            layers.push(Linear::uniform(fan_in, out, b, 1.0 / (fan_in as f64).sqrt(), rng));
            fan_in = out;
        }
        let total: usize = film_widths.iter().sum();
        let bound = 0.25 * (6.0 / cfg.w_dim as f64).sqrt();
        let mut head = Linear::uniform(cfg.w_dim, 2 * total, bound, 0.0, rng);
        for b in &mut head.bias[..total] {
            *b = T::lit(omega0);
        }
        Self { layers, head, leaky_slope: T::lit(cfg.leaky_slope), film_widths: film_widths.to_vec() }
    }

    pub fn from_layers(
        layers: Vec<Linear<T>>,
        head: Linear<T>,
        leaky_slope: T,
        film_widths: &[usize],
    ) -> Result<Self> {
        ensure!(layers.len() == MAPPING_DEPTH, Shape, "mapping network needs exactly {MAPPING_DEPTH} layers, got {}", layers.len());
        for pair in layers.windows(2) {
            ensure!(pair[0].out_dim() == pair[1].in_dim(), Shape, "mapping layer widths do not chain");
        }
        ensure!(head.in_dim() == layers[MAPPING_DEPTH - 1].out_dim(), Shape, "mapping head input != w width");
        let total: usize = film_widths.iter().sum();
        ensure!(head.out_dim() == 2 * total, Shape, "mapping head emits {} values, FiLM layers need {}", head.out_dim(), 2 * total);
        Ok(Self { layers, head, leaky_slope, film_widths: film_widths.to_vec() })
    }

    pub fn z_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn w_dim(&self) -> usize {
        self.head.in_dim()
    }

    pub fn leaky_slope(&self) -> T {
        self.leaky_slope
    }

    pub fn film_widths(&self) -> &[usize] {
        &self.film_widths
    }

    fn leaky(&self, x: T) -> T {
        if x >= T::zero() {
            x
        } else {
            self.leaky_slope * x
        }
    }

    /// Intermediate code `w`.
    pub fn intermediate(&self, z: &LatentCode<T>) -> Result<Vec<T>> {
        Ok(self.trace(z)?.1.pop().expect("mapping trace is never empty"))
    }

    /// Returns per-layer pre-activations and post-activations (`acts[0] = z`).
    fn trace(&self, z: &LatentCode<T>) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>)> {
        ensure!(z.dim() == self.z_dim(), Shape, "latent width {} != mapping input {}", z.dim(), self.z_dim());
        let mut pre = Vec::with_capacity(MAPPING_DEPTH);
        let mut acts = vec![z.0.clone()];
        for layer in &self.layers {
            let u = layer.affine(acts.last().expect("non-empty"))?;
            acts.push(u.iter().map(|v| self.leaky(*v)).collect());
            pre.push(u);
        }
        Ok((pre, acts))
    }

    pub fn forward(&self, z: &LatentCode<T>) -> Result<ModulationSignals<T>> {
        let (_, acts) = self.trace(z)?;
        let out = self.head.affine(acts.last().expect("non-empty"))?;
        ModulationSignals::from_flat(&self.film_widths, &out)
    }

    /// Chain the gradient with respect to the signals back into every
    /// mapping parameter.
    pub fn backward(
        &self,
        z: &LatentCode<T>,
        grad_mods: &ModulationSignals<T>,
    ) -> Result<MappingGradients<T>> {
        grad_mods.check_widths(&self.film_widths)?;
        let (pre, acts) = self.trace(z)?;
        let mut grads = self.zeros_like();
        let g_out = grad_mods.to_flat();
        grads.head.accumulate_outer(&g_out, &acts[MAPPING_DEPTH]);
        let mut g = vec![T::zero(); self.w_dim()];
        self.head.backprop_input(&g_out, &mut g);
        for l in (0..MAPPING_DEPTH).rev() {
            for (gi, u) in g.iter_mut().zip(&pre[l]) {
                if *u < T::zero() {
                    *gi *= self.leaky_slope;
                }
            }
            grads.layers[l].accumulate_outer(&g, &acts[l]);
            let mut g_in = vec![T::zero(); self.layers[l].in_dim()];
            self.layers[l].backprop_input(&g, &mut g_in);
            g = g_in;
        }
        Ok(grads)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(Linear::zeros_like).collect(),
            head: self.head.zeros_like(),
            leaky_slope: self.leaky_slope,
            film_widths: self.film_widths.clone(),
        }
    }

    /// Layers in canonical order with display names.
    pub fn named_layers(&self) -> Vec<(String, &Linear<T>)> {
        let mut out: Vec<_> = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| (format!("mapping.{i}"), l))
            .collect();
        out.push(("mapping.head".into(), &self.head));
        out
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Linear<T>> {
        let mut out: Vec<_> = self.layers.iter_mut().collect();
        out.push(&mut self.head);
        out
    }

    pub fn cast<U: Real>(&self) -> MappingNetwork<U> {
        MappingNetwork {
            layers: self.layers.iter().map(Linear::cast).collect(),
            head: self.head.cast(),
            leaky_slope: U::lit(self.leaky_slope.to_f64_lossy()),
            film_widths: self.film_widths.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity(n: usize) -> Linear<f64> {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        Linear::from_parts(n, n, w, vec![0.0; n]).unwrap()
    }

    #[test]
    fn zero_parameters_give_zero_signals() {
        let widths = [4, 4, 2];
        let layers = vec![Linear::zeros(3, 5), Linear::zeros(5, 5), Linear::zeros(5, 6)];
        let net = MappingNetwork::from_layers(layers, Linear::zeros(6, 20), 0.2, &widths).unwrap();
        let mods = net.forward(&LatentCode(vec![1.0, -2.0, 0.5])).unwrap();
        assert!(mods.to_flat().iter().all(|v| *v == 0.0));
        assert_eq!(mods.widths(), widths);
    }

    #[test]
    fn identity_trunk_selects_first_head_column() {
        let widths = [2, 1];
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let head = Linear::<f64>::uniform(n, 6, 1.0, 1.0, &mut rng);
        let net = MappingNetwork::from_layers(vec![identity(n), identity(n), identity(n)], head.clone(), 0.2, &widths).unwrap();
        let flat = net.forward(&LatentCode(vec![1.0, 0.0, 0.0])).unwrap().to_flat();
        for (o, v) in flat.iter().enumerate() {
            assert_eq!(*v, head.weight[o * n] + head.bias[o]);
        }
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = MappingConfig { z_dim: 16, hidden_width: 32, w_dim: 24, leaky_slope: 0.2 };
        let net = MappingNetwork::<f64>::new(&cfg, &[8, 8, 4], 30.0, &mut rng);
        let z = LatentCode::sample(16, &mut rng);
        let a = net.forward(&z).unwrap().to_flat();
        let b = net.forward(&z).unwrap().to_flat();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        let total = 20;
        let mean_gamma = a[..total].iter().sum::<f64>() / total as f64;
        assert!((mean_gamma - 30.0).abs() < 5.0, "gamma centred on omega0, got {mean_gamma}");
    }

    #[test]
    fn latent_dimension_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = MappingConfig { z_dim: 4, hidden_width: 4, w_dim: 4, leaky_slope: 0.2 };
        let net = MappingNetwork::<f64>::new(&cfg, &[2], 30.0, &mut rng);
        assert!(net.forward(&LatentCode(vec![0.0; 5])).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cfg = MappingConfig { z_dim: 5, hidden_width: 7, w_dim: 6, leaky_slope: 0.2 };
        let widths = [3, 2];
        let net = MappingNetwork::<f64>::new(&cfg, &widths, 2.0, &mut rng);
        let z = LatentCode::sample(5, &mut rng);
        // Linear probe of the outputs: L = <c, mods>.
        let probe: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |n: &MappingNetwork<f64>| -> f64 {
            n.forward(&z).unwrap().to_flat().iter().zip(&probe).map(|(a, b)| a * b).sum()
        };
        let g = net.backward(&z, &ModulationSignals::from_flat(&widths, &probe).unwrap()).unwrap();
        let h = 1e-6;
        let mut copy = net.clone();
        for (li, gl) in g.named_layers().iter().enumerate() {
            for k in 0..gl.1.weight.len() {
                let orig = copy.layers_mut()[li].weight[k];
                copy.layers_mut()[li].weight[k] = orig + h;
                let lp = loss(&copy);
                copy.layers_mut()[li].weight[k] = orig - h;
                let lm = loss(&copy);
                copy.layers_mut()[li].weight[k] = orig;
                let fd = (lp - lm) / (2.0 * h);
                assert!((fd - gl.1.weight[k]).abs() < 1e-6, "{} w[{k}]: {fd} vs {}", gl.0, gl.1.weight[k]);
            }
        }
    }
}
