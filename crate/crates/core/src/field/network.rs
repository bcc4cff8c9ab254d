//! The FiLM-SIREN field network: an eight-layer modulated sine trunk feeding
//! a scalar SDF head and a view-conditioned color/feature path.
//!
//! ```text
//! h_0 = x
//! h_{i+1} = sin(gamma_i * (W_i h_i + b_i) + beta_i)      i = 0..7
//! d = W_d h_8 + b_d
//! f = sin(gamma_f * (W_f [h_8; v] + b_f) + beta_f)
//! c = sigmoid(W_c f + b_c)
//! ```
//!
//! Derivatives are hand-written reverse mode over exactly this graph.

use rand::Rng;
use rayon::prelude::*;

use super::layer::Linear;
use super::mapping::ModulationSignals;
use crate::error::{ensure, Result};
use crate::scalar::{sigmoid, Real};
use crate::vec3::Vec3;

pub const TRUNK_DEPTH: usize = 8;
/// Base SIREN frequency.
pub const OMEGA0: f64 = 30.0;
/// Tolerance on `|v| = 1` for view directions.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldConfig {
    pub hidden_width: usize,
    pub feature_width: usize,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { hidden_width: 256, feature_width: 256 }
    }
}

/// Output of one field query.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample<T> {
    pub d: T,
    pub color: [T; 3],
    pub feature: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldNetwork<T> {
    pub trunk: Vec<Linear<T>>,
    pub sdf_head: Linear<T>,
    pub color_film: Linear<T>,
    pub color_head: Linear<T>,
}

/// Derivatives of a scalar loss with respect to the network parameters and
/// the modulation signals.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGradients<T> {
    pub params: FieldNetwork<T>,
    pub mods: ModulationSignals<T>,
}

impl<T: Real> FieldGradients<T> {
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.params.layers_mut().into_iter().zip(other.params.layers()) {
            a.add_assign(b);
        }
        self.mods.add_assign(&other.mods);
    }
}

/// Activations from one forward pass, reused by the backward pass.
#[derive(Debug, Clone)]
pub struct Workspace<T> {
    /// `h[0] = x`, `h[i + 1]` is the output of trunk layer `i`.
    h: Vec<Vec<T>>,
    /// Unmodulated affine output `W_i h_i + b_i` of each trunk layer.
    u: Vec<Vec<T>>,
    color_in: Vec<T>,
    u_f: Vec<T>,
    feature: Vec<T>,
    color: [T; 3],
    d: T,
    gh: Vec<T>,
    gh_prev: Vec<T>,
    gu: Vec<T>,
    g_cin: Vec<T>,
    g_f: Vec<T>,
}

impl<T: Real> Workspace<T> {
    pub fn sdf(&self) -> T {
        self.d
    }

    pub fn color(&self) -> [T; 3] {
        self.color
    }

    pub fn feature(&self) -> &[T] {
        &self.feature
    }
}

impl<T: Real> FieldNetwork<T> {
    /// SIREN-initialised network.
    pub fn new<R: Rng + ?Sized>(cfg: FieldConfig, rng: &mut R) -> Self {
        let hw = cfg.hidden_width;
        let mut trunk = Vec::with_capacity(TRUNK_DEPTH);
        trunk.push(Linear::siren_first(3, hw, rng));
        for _ in 1..TRUNK_DEPTH {
            trunk.push(Linear::siren_inner(hw, hw, OMEGA0, rng));
        }
        let sdf_head = Linear::siren_inner(hw, 1, OMEGA0, rng);
        let color_film = Linear::siren_inner(hw + 3, cfg.feature_width, OMEGA0, rng);
        let color_head = Linear::siren_inner(cfg.feature_width, 3, OMEGA0, rng);
        Self { trunk, sdf_head, color_film, color_head }
    }

    pub fn from_layers(
        trunk: Vec<Linear<T>>,
        sdf_head: Linear<T>,
        color_film: Linear<T>,
        color_head: Linear<T>,
    ) -> Result<Self> {
        ensure!(trunk.len() == TRUNK_DEPTH, Shape, "trunk must have {TRUNK_DEPTH} layers, got {}", trunk.len());
        ensure!(trunk[0].in_dim() == 3, Shape, "first trunk layer takes 3 inputs, got {}", trunk[0].in_dim());
        let hw = trunk[0].out_dim();
        for (i, l) in trunk.iter().enumerate().skip(1) {
            ensure!(l.in_dim() == hw && l.out_dim() == hw, Shape, "trunk layer {i} is {}x{}, expected {hw}x{hw}", l.out_dim(), l.in_dim());
        }
        ensure!(sdf_head.in_dim() == hw && sdf_head.out_dim() == 1, Shape, "sdf head must be 1x{hw}");
        ensure!(color_film.in_dim() == hw + 3, Shape, "color FiLM layer input must be {}", hw + 3);
        ensure!(
            color_head.in_dim() == color_film.out_dim() && color_head.out_dim() == 3,
            Shape,
            "color head must be 3x{}",
            color_film.out_dim()
        );
        Ok(Self { trunk, sdf_head, color_film, color_head })
    }

    pub fn config(&self) -> FieldConfig {
        FieldConfig { hidden_width: self.hidden_width(), feature_width: self.feature_width() }
    }

    pub fn hidden_width(&self) -> usize {
        self.trunk[0].out_dim()
    }

    pub fn feature_width(&self) -> usize {
        self.color_film.out_dim()
    }

    /// Widths of the FiLM layers in modulation order.
    pub fn film_widths(&self) -> Vec<usize> {
        let mut w = vec![self.hidden_width(); TRUNK_DEPTH];
        w.push(self.feature_width());
        w
    }

    /// Plain SIREN conditioning: every frequency `omega0`, every phase 0.
    pub fn siren_modulation(&self, omega0: T) -> ModulationSignals<T> {
        ModulationSignals::uniform(&self.film_widths(), omega0, T::zero())
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    /// Layers in canonical order: trunk 0..7, sdf head, color FiLM, color head.
    pub fn layers(&self) -> Vec<&Linear<T>> {
        let mut v: Vec<_> = self.trunk.iter().collect();
        v.extend([&self.sdf_head, &self.color_film, &self.color_head]);
        v
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Linear<T>> {
        let mut v: Vec<_> = self.trunk.iter_mut().collect();
        v.extend([&mut self.sdf_head, &mut self.color_film, &mut self.color_head]);
        v
    }

    pub fn layer_names() -> Vec<String> {
        let mut v: Vec<_> = (0..TRUNK_DEPTH).map(|i| format!("trunk.{i}")).collect();
        v.extend(["sdf_head".to_string(), "color_film".to_string(), "color_head".to_string()]);
        v
    }

    pub fn zero_gradients(&self) -> FieldGradients<T> {
        FieldGradients {
            params: Self {
                trunk: self.trunk.iter().map(Linear::zeros_like).collect(),
                sdf_head: self.sdf_head.zeros_like(),
                color_film: self.color_film.zeros_like(),
                color_head: self.color_head.zeros_like(),
            },
            mods: ModulationSignals::zeros(&self.film_widths()),
        }
    }

    pub fn workspace(&self) -> Workspace<T> {
        let hw = self.hidden_width();
        let fw = self.feature_width();
        let mut h = vec![vec![T::zero(); 3]];
        h.extend((0..TRUNK_DEPTH).map(|_| vec![T::zero(); hw]));
        Workspace {
            h,
            u: (0..TRUNK_DEPTH).map(|_| vec![T::zero(); hw]).collect(),
            color_in: vec![T::zero(); hw + 3],
            u_f: vec![T::zero(); fw],
            feature: vec![T::zero(); fw],
            color: [T::zero(); 3],
            d: T::zero(),
            gh: vec![T::zero(); hw],
            gh_prev: vec![T::zero(); hw.max(3)],
            gu: vec![T::zero(); hw.max(fw)],
            g_cin: vec![T::zero(); hw + 3],
            g_f: vec![T::zero(); fw],
        }
    }

    pub fn check_modulation(&self, mods: &ModulationSignals<T>) -> Result<()> {
        mods.check_widths(&self.film_widths())
    }

    /// Trunk and SDF head only. Shapes are assumed validated.
    pub fn forward_sdf_unchecked(&self, x: Vec3<T>, mods: &ModulationSignals<T>, ws: &mut Workspace<T>) -> T {
        ws.h[0].copy_from_slice(&x.to_array());
        for (i, layer) in self.trunk.iter().enumerate() {
            let (prev, next) = ws.h.split_at_mut(i + 1);
            let u = &mut ws.u[i];
            layer.affine_into(&prev[i], u);
            let out = &mut next[0];
            for k in 0..u.len() {
                out[k] = (mods.gammas[i][k] * u[k] + mods.betas[i][k]).sin();
            }
        }
        ws.d = crate::scalar::dot(self.sdf_head.row(0), &ws.h[TRUNK_DEPTH]) + self.sdf_head.bias[0];
        ws.d
    }

    /// Full forward pass including the color path.
    pub fn forward_full_unchecked(
        &self,
        x: Vec3<T>,
        v: Vec3<T>,
        mods: &ModulationSignals<T>,
        ws: &mut Workspace<T>,
    ) -> T {
        let d = self.forward_sdf_unchecked(x, mods, ws);
        let hw = self.hidden_width();
        ws.color_in[..hw].copy_from_slice(&ws.h[TRUNK_DEPTH]);
        ws.color_in[hw..].copy_from_slice(&v.to_array());
        self.color_film.affine_into(&ws.color_in, &mut ws.u_f);
        let (g, b) = (&mods.gammas[TRUNK_DEPTH], &mods.betas[TRUNK_DEPTH]);
        for k in 0..ws.u_f.len() {
            ws.feature[k] = (g[k] * ws.u_f[k] + b[k]).sin();
        }
        let mut logits = [T::zero(); 3];
        self.color_head.affine_into(&ws.feature, &mut logits);
        ws.color = logits.map(sigmoid);
        d
    }

    pub fn query(&self, x: Vec3<T>, v: Vec3<T>, mods: &ModulationSignals<T>) -> Result<FieldSample<T>> {
        check_unit(v)?;
        self.check_modulation(mods)?;
        let mut ws = self.workspace();
        let d = self.forward_full_unchecked(x, v, mods, &mut ws);
        Ok(FieldSample { d, color: ws.color, feature: ws.feature.clone() })
    }

    pub fn sdf(&self, x: Vec3<T>, mods: &ModulationSignals<T>) -> Result<T> {
        self.check_modulation(mods)?;
        let mut ws = self.workspace();
        Ok(self.forward_sdf_unchecked(x, mods, &mut ws))
    }

    /// Reverse pass over the graph traced in `ws`.
    ///
    /// `grad_d` is `dL/dd`; `grad_color`/`grad_feature` are only read when the
    /// forward pass included the color path. Returns `dL/dx`. When `grads` is
    /// given, parameter and modulation derivatives are accumulated into it.
    pub fn backward_unchecked(
        &self,
        mods: &ModulationSignals<T>,
        ws: &mut Workspace<T>,
        grad_d: T,
        color_grads: Option<([T; 3], Option<&[T]>)>,
        mut grads: Option<&mut FieldGradients<T>>,
    ) -> Vec3<T> {
        let hw = self.hidden_width();
        ws.gh.iter_mut().for_each(|g| *g = T::zero());

        if let Some((grad_color, grad_feature)) = color_grads {
            let fw = self.feature_width();
            let mut g_logit = [T::zero(); 3];
            for k in 0..3 {
                let c = ws.color[k];
                g_logit[k] = grad_color[k] * c * (T::one() - c);
            }
            match grad_feature {
                Some(gf) => ws.g_f.copy_from_slice(gf),
                None => ws.g_f.iter_mut().for_each(|g| *g = T::zero()),
            }
            self.color_head.backprop_input(&g_logit, &mut ws.g_f);
            let (gam, bet) = (&mods.gammas[TRUNK_DEPTH], &mods.betas[TRUNK_DEPTH]);
            let gu = &mut ws.gu[..fw];
            for k in 0..fw {
                let ds = ws.g_f[k] * (gam[k] * ws.u_f[k] + bet[k]).cos();
                gu[k] = ds * gam[k];
                if let Some(g) = grads.as_deref_mut() {
                    g.mods.betas[TRUNK_DEPTH][k] += ds;
                    g.mods.gammas[TRUNK_DEPTH][k] += ds * ws.u_f[k];
                }
            }
            if let Some(g) = grads.as_deref_mut() {
                g.params.color_head.accumulate_outer(&g_logit, &ws.feature);
                g.params.color_film.accumulate_outer(gu, &ws.color_in);
            }
            ws.g_cin.iter_mut().for_each(|g| *g = T::zero());
            self.color_film.backprop_input(gu, &mut ws.g_cin);
            for k in 0..hw {
                ws.gh[k] += ws.g_cin[k];
            }
        }

        if grad_d != T::zero() {
            crate::scalar::axpy(grad_d, self.sdf_head.row(0), &mut ws.gh);
            if let Some(g) = grads.as_deref_mut() {
                g.params.sdf_head.accumulate_outer(&[grad_d], &ws.h[TRUNK_DEPTH]);
            }
        }

        for i in (0..TRUNK_DEPTH).rev() {
            let (gam, bet) = (&mods.gammas[i], &mods.betas[i]);
            let u = &ws.u[i];
            let gu = &mut ws.gu[..hw];
            for k in 0..hw {
                let ds = ws.gh[k] * (gam[k] * u[k] + bet[k]).cos();
                gu[k] = ds * gam[k];
                if let Some(g) = grads.as_deref_mut() {
                    g.mods.betas[i][k] += ds;
                    g.mods.gammas[i][k] += ds * u[k];
                }
            }
            if let Some(g) = grads.as_deref_mut() {
                g.params.trunk[i].accumulate_outer(gu, &ws.h[i]);
            }
            let in_dim = self.trunk[i].in_dim();
            let prev = &mut ws.gh_prev[..in_dim];
            prev.iter_mut().for_each(|g| *g = T::zero());
            self.trunk[i].backprop_input(gu, prev);
            if i > 0 {
                ws.gh.copy_from_slice(prev);
            }
        }
        Vec3::new(ws.gh_prev[0], ws.gh_prev[1], ws.gh_prev[2])
    }

    /// Exact derivative of `d` with respect to the query point.
    pub fn sdf_input_gradient(&self, x: Vec3<T>, mods: &ModulationSignals<T>) -> Result<Vec3<T>> {
        self.check_modulation(mods)?;
        let mut ws = self.workspace();
        self.forward_sdf_unchecked(x, mods, &mut ws);
        Ok(self.backward_unchecked(mods, &mut ws, T::one(), None, None))
    }

    /// Mean squared error between predicted SDF values and `targets`, with
    /// the gradient of that loss for every parameter and modulation signal
    /// reachable from `d`.
    ///
    /// The batch is split into fixed-size chunks whose partial gradients are
    /// summed in chunk order, so the result does not depend on the number of
    /// worker threads.
    pub fn regression_gradients(
        &self,
        mods: &ModulationSignals<T>,
        points: &[Vec3<T>],
        targets: &[T],
    ) -> Result<(T, FieldGradients<T>)> {
        ensure!(!points.is_empty(), Precondition, "regression batch is empty");
        ensure!(points.len() == targets.len(), Shape, "{} points but {} targets", points.len(), targets.len());
        self.check_modulation(mods)?;
        const CHUNK: usize = 32;
        let scale = T::lit(2.0) / T::from_usize_lossy(points.len());
        let partials: Vec<(T, FieldGradients<T>)> = points
            .par_chunks(CHUNK)
            .zip(targets.par_chunks(CHUNK))
            .map(|(xs, ts)| {
                let mut ws = self.workspace();
                let mut g = self.zero_gradients();
                let mut sse = T::zero();
                for (x, t) in xs.iter().zip(ts) {
                    let r = self.forward_sdf_unchecked(*x, mods, &mut ws) - *t;
                    sse += r * r;
                    self.backward_unchecked(mods, &mut ws, scale * r, None, Some(&mut g));
                }
                (sse, g)
            })
            .collect();
        let mut iter = partials.into_iter();
        let (mut sse, mut total) = iter.next().expect("non-empty batch");
        for (s, g) in iter {
            sse += s;
            total.add_assign(&g);
        }
        Ok((sse / T::from_usize_lossy(points.len()), total))
    }

    pub fn cast<U: Real>(&self) -> FieldNetwork<U> {
        FieldNetwork {
            trunk: self.trunk.iter().map(Linear::cast).collect(),
            sdf_head: self.sdf_head.cast(),
            color_film: self.color_film.cast(),
            color_head: self.color_head.cast(),
        }
    }
}

pub(crate) fn check_unit<T: Real>(v: Vec3<T>) -> Result<()> {
    let n = v.norm().to_f64_lossy();
    ensure!((n - 1.0).abs() <= UNIT_TOLERANCE, Precondition, "view direction has norm {n}, expected 1");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::layer::film_siren_forward;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_net(hw: usize, fw: usize) -> FieldNetwork<f64> {
        let mut trunk = vec![Linear::zeros(3, hw)];
        trunk.extend((1..TRUNK_DEPTH).map(|_| Linear::zeros(hw, hw)));
        FieldNetwork::from_layers(trunk, Linear::zeros(hw, 1), Linear::zeros(hw + 3, fw), Linear::zeros(fw, 3)).unwrap()
    }

    fn random_setup(seed: u64) -> (FieldNetwork<f64>, ModulationSignals<f64>, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = FieldNetwork::new(FieldConfig { hidden_width: 12, feature_width: 6 }, &mut rng);
        let widths = net.film_widths();
        let mods = ModulationSignals {
            gammas: widths.iter().map(|w| (0..*w).map(|_| rng.random_range(0.5..3.0)).collect()).collect(),
            betas: widths.iter().map(|w| (0..*w).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
        };
        (net, mods, rng)
    }

    fn unit(rng: &mut ChaCha8Rng) -> Vec3<f64> {
        loop {
            let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if v.norm() > 0.1 {
                return v.normalize();
            }
        }
    }

    #[test]
    fn zero_network_is_constant_head_bias() {
        let mut net = zero_net(4, 3);
        net.sdf_head.bias[0] = 0.37;
        let mods = net.siren_modulation(0.0);
        for x in [Vec3::zero(), Vec3::new(1.0, -2.0, 0.5)] {
            assert_eq!(net.sdf(x, &mods).unwrap(), 0.37);
            assert_eq!(net.sdf_input_gradient(x, &mods).unwrap(), Vec3::zero());
        }
    }

    #[test]
    fn sdf_ignores_view_direction() {
        let (net, mods, mut rng) = random_setup(1);
        let x = Vec3::new(0.1, -0.2, 0.05);
        let d0 = net.query(x, Vec3::new(0.0, 0.0, 1.0), &mods).unwrap().d;
        let mut colors = Vec::new();
        for _ in 0..100 {
            let s = net.query(x, unit(&mut rng), &mods).unwrap();
            assert_eq!(s.d.to_bits(), d0.to_bits());
            colors.push(s.color);
        }
        assert!(colors.iter().any(|c| c != &colors[0]), "color path should see v");
    }

    #[test]
    fn forward_matches_layer_by_layer_oracle() {
        for seed in 0..20 {
            let (net, mods, mut rng) = random_setup(seed);
            let x = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let v = unit(&mut rng);
            let got = net.query(x, v, &mods).unwrap();

            let mut h = x.to_array().to_vec();
            for i in 0..TRUNK_DEPTH {
                h = film_siren_forward(&net.trunk[i], &h, &mods.gammas[i], &mods.betas[i]).unwrap();
            }
            let d = net.sdf_head.affine(&h).unwrap()[0];
            let mut cin = h.clone();
            cin.extend(v.to_array());
            let f = film_siren_forward(&net.color_film, &cin, &mods.gammas[8], &mods.betas[8]).unwrap();
            let logits = net.color_head.affine(&f).unwrap();
            assert!((got.d - d).abs() < 1e-10);
            for k in 0..3 {
                assert!((got.color[k] - 1.0 / (1.0 + (-logits[k]).exp())).abs() < 1e-10);
            }
            for (a, b) in got.feature.iter().zip(&f) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn width_one_chain_rule() {
        // Width-1 trunk: h_{i+1} = sin(g_i (w_i h_i + b_i) + p_i), input only x_1.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut net = zero_net(1, 1);
        let mut w = [0.0; TRUNK_DEPTH];
        let mut b = [0.0; TRUNK_DEPTH];
        for i in 0..TRUNK_DEPTH {
            w[i] = rng.random_range(-1.5..1.5);
            b[i] = rng.random_range(-0.5..0.5);
            net.trunk[i].weight[0] = w[i];
            net.trunk[i].bias[0] = b[i];
        }
        net.sdf_head.weight[0] = 0.8;
        let mut mods = net.siren_modulation(1.0);
        mods.betas[3][0] = 0.3;
        let x = Vec3::new(0.4, 1.0, -2.0);
        let mut h = x.x;
        let mut deriv = 1.0;
        for i in 0..TRUNK_DEPTH {
            let s = 1.0 * (w[i] * h + b[i]) + mods.betas[i][0];
            deriv *= s.cos() * w[i];
            h = s.sin();
        }
        let g = net.sdf_input_gradient(x, &mods).unwrap();
        assert!((g.x - 0.8 * deriv).abs() < 1e-14);
        assert_eq!((g.y, g.z), (0.0, 0.0));

        // Single trunk layer d = sin(x_1): only layer 0 active, later layers
        // replaced by the identity through a zero-frequency detour is not
        // expressible, so check the first-layer derivative directly.
        let mut one = zero_net(1, 1);
        one.trunk[0].weight[0] = 1.0;
        let h1 = |x: f64| (x).sin();
        let x1 = 0.7;
        let mods1 = one.siren_modulation(1.0);
        let mut ws = one.workspace();
        one.forward_sdf_unchecked(Vec3::new(x1, 0.0, 0.0), &mods1, &mut ws);
        assert!((ws.h[1][0] - h1(x1)).abs() < 1e-15);
    }

    #[test]
    fn regression_gradient_of_head_bias() {
        let mut net = zero_net(2, 2);
        net.sdf_head.bias[0] = 0.5;
        let mods = net.siren_modulation(1.0);
        let pts = vec![Vec3::zero(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 0.0)];
        let targets = vec![0.1, 0.2, 0.6];
        let (loss, g) = net.regression_gradients(&mods, &pts, &targets).unwrap();
        let expect_loss = (0.4f64.powi(2) + 0.3f64.powi(2) + 0.1f64.powi(2)) / 3.0;
        assert!((loss - expect_loss).abs() < 1e-15);
        let expect_grad = 2.0 * (0.4 + 0.3 - 0.1) / 3.0;
        assert!((g.params.sdf_head.bias[0] - expect_grad).abs() < 1e-15);
    }

    #[test]
    fn regression_at_targets_has_zero_loss_and_gradient() {
        let (net, mods, mut rng) = random_setup(5);
        let pts: Vec<_> = (0..40).map(|_| unit(&mut rng) * 0.3).collect();
        let targets: Vec<_> = pts.iter().map(|p| net.sdf(*p, &mods).unwrap()).collect();
        let (loss, g) = net.regression_gradients(&mods, &pts, &targets).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.params.layers().iter().all(|l| l.weight.iter().chain(&l.bias).all(|v| *v == 0.0)));
        assert!(g.mods.to_flat().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn precondition_errors() {
        let (net, mods, _) = random_setup(2);
        assert!(net.query(Vec3::zero(), Vec3::new(0.0, 0.0, 2.0), &mods).is_err());
        assert!(net.regression_gradients(&mods, &[], &[]).is_err());
        let wrong = ModulationSignals::<f64>::zeros(&[3; 9]);
        assert!(net.sdf(Vec3::zero(), &wrong).is_err());
    }
}
