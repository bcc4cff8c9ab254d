//! Finite-difference verification of the hand-written derivatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::field::{FieldConfig, FieldNetwork, LatentCode, Linear, MappingConfig, MappingNetwork, ModulationSignals, OMEGA0};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    /// Random networks to test.
    pub trials: usize,
    pub points_per_trial: usize,
    pub hidden_width: usize,
    pub feature_width: usize,
    pub z_dim: usize,
    pub mapping_width: usize,
    /// Parameter coordinates sampled per layer per trial; the first trial
    /// checks every coordinate.
    pub coords_per_layer: usize,
    pub step: f64,
    /// Points in the central-difference stencil: 3 or 5.
    pub stencil: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Test hook: perturbs the analytic gradients so the check must fail.
    #[serde(skip)]
    pub corrupt: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            points_per_trial: 3,
            hidden_width: 12,
            feature_width: 6,
            z_dim: 6,
            mapping_width: 12,
            coords_per_layer: 3,
            step: 1e-4,
            stencil: 5,
            tolerance: 1e-4,
            seed: 0,
            corrupt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckRow {
    pub name: String,
    pub checks: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub rows: Vec<GradcheckRow>,
    pub tolerance: f64,
    pub trials: usize,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.checks > 0 && r.max_rel_error < self.tolerance)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max)
    }
}

/// `|a - f| / max(|a|, |f|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

struct Problem {
    z: LatentCode<f64>,
    points: Vec<(Vec3<f64>, Vec3<f64>)>,
    sdf_targets: Vec<f64>,
    color_targets: Vec<[f64; 3]>,
    feature_weights: Vec<Vec<f64>>,
}

impl Problem {
    fn random(cfg: &GradcheckConfig, rng: &mut ChaCha8Rng) -> Self {
        let z = LatentCode::sample(cfg.z_dim, rng);
        let mut points = Vec::new();
        for _ in 0..cfg.points_per_trial {
            let x = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let v = loop {
                let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                if v.norm() > 0.1 {
                    break v.normalize();
                }
            };
            points.push((x, v));
        }
        let n = points.len();
        Self {
            z,
            points,
            sdf_targets: (0..n).map(|_| rng.random_range(-0.5..0.5)).collect(),
            color_targets: (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect(),
            feature_weights: (0..n).map(|_| (0..cfg.feature_width).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
        }
    }

    /// `sum_k (d_k - t_k)^2 / 2 + |c_k - tc_k|^2 / 2 + a_k . f_k`, which
    /// exercises the SDF, color and feature outputs together.
    fn loss(&self, net: &FieldNetwork<f64>, mapping: &MappingNetwork<f64>) -> f64 {
        let mods = mapping.forward(&self.z).expect("shapes fixed by construction");
        let mut ws = net.workspace();
        let mut total = 0.0;
        for (k, (x, v)) in self.points.iter().enumerate() {
            let d = net.forward_full_unchecked(*x, *v, &mods, &mut ws);
            total += 0.5 * (d - self.sdf_targets[k]).powi(2);
            let c = ws.color();
            total += (0..3).map(|i| 0.5 * (c[i] - self.color_targets[k][i]).powi(2)).sum::<f64>();
            total += ws.feature().iter().zip(&self.feature_weights[k]).map(|(f, a)| f * a).sum::<f64>();
        }
        total
    }

    fn gradients(&self, net: &FieldNetwork<f64>, mapping: &MappingNetwork<f64>) -> (FieldNetwork<f64>, MappingNetwork<f64>) {
        let mods = mapping.forward(&self.z).expect("shapes fixed by construction");
        let mut ws = net.workspace();
        let mut g = net.zero_gradients();
        for (k, (x, v)) in self.points.iter().enumerate() {
            let d = net.forward_full_unchecked(*x, *v, &mods, &mut ws);
            let c = ws.color();
            let gc = [0, 1, 2].map(|i| c[i] - self.color_targets[k][i]);
            net.backward_unchecked(
                &mods,
                &mut ws,
                d - self.sdf_targets[k],
                Some((gc, Some(&self.feature_weights[k]))),
                Some(&mut g),
            );
        }
        let gm = mapping.backward(&self.z, &g.mods).expect("shapes fixed by construction");
        (g.params, gm)
    }
}

/// Central difference of `f` around 0 with step `h`.
pub fn central_difference(f: &mut dyn FnMut(f64) -> f64, h: f64, stencil: usize) -> f64 {
    if stencil == 3 {
        (f(h) - f(-h)) / (2.0 * h)
    } else {
        (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h)
    }
}

fn sample_coords(layer: &Linear<f64>, n: usize, all: bool, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let total = layer.weight.len() + layer.bias.len();
    if all || n >= total {
        (0..total).collect()
    } else {
        (0..n).map(|_| rng.random_range(0..total)).collect()
    }
}

fn param_mut(layer: &mut Linear<f64>, k: usize) -> &mut f64 {
    let nw = layer.weight.len();
    if k < nw {
        &mut layer.weight[k]
    } else {
        &mut layer.bias[k - nw]
    }
}

fn param(layer: &Linear<f64>, k: usize) -> f64 {
    let nw = layer.weight.len();
    if k < nw {
        layer.weight[k]
    } else {
        layer.bias[k - nw]
    }
}

fn corrupt(v: f64, on: bool) -> f64 {
    if on {
        v * 1.01 + 1e-3
    } else {
        v
    }
}

/// Compares analytic input, parameter and mapping gradients of random small
/// networks against central differences.
pub fn run(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    ensure!(cfg.trials >= 1 && cfg.points_per_trial >= 1, Parameter, "gradcheck needs trials and points");
    ensure!(cfg.step > 0.0 && cfg.tolerance > 0.0, Parameter, "step and tolerance must be positive");
    ensure!(cfg.stencil == 3 || cfg.stencil == 5, Parameter, "stencil must have 3 or 5 points, got {}", cfg.stencil);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut names = vec!["input".to_string()];
    names.extend(FieldNetwork::<f64>::layer_names());
    let field_rows = names.len();
    let mut rows: Vec<GradcheckRow> = names.into_iter().map(|name| GradcheckRow { name, checks: 0, max_rel_error: 0.0 }).collect();
    let h = cfg.step;

    for trial in 0..cfg.trials {
        let fcfg = FieldConfig { hidden_width: cfg.hidden_width, feature_width: cfg.feature_width };
        let mut net = FieldNetwork::new(fcfg, &mut rng);
        let mcfg = MappingConfig { z_dim: cfg.z_dim, hidden_width: cfg.mapping_width, w_dim: cfg.mapping_width, leaky_slope: 0.2 };
        let mut mapping = MappingNetwork::new(&mcfg, &net.film_widths(), OMEGA0, &mut rng);
        if trial == 0 {
            rows.extend(mapping.named_layers().into_iter().map(|(name, _)| GradcheckRow { name, checks: 0, max_rel_error: 0.0 }));
        }
        let prob = Problem::random(cfg, &mut rng);
        let mods: ModulationSignals<f64> = mapping.forward(&prob.z)?;

        // d(d)/dx at every point.
        for (x, _) in &prob.points {
            let g = net.sdf_input_gradient(*x, &mods)?;
            for axis in 0..3 {
                let mut f = |s: f64| {
                    let mut p = *x;
                    match axis {
                        0 => p.x += s,
                        1 => p.y += s,
                        _ => p.z += s,
                    }
                    net.sdf(p, &mods).expect("modulation checked above")
                };
                let num = central_difference(&mut f, h, cfg.stencil);
                let r = relative_error(corrupt(g[axis], cfg.corrupt), num);
                rows[0].checks += 1;
                rows[0].max_rel_error = rows[0].max_rel_error.max(r);
            }
        }

        let (gf, gm) = prob.gradients(&net, &mapping);
        let all = trial == 0;
        let nf = net.layers().len();
        for l in 0..nf {
            let coords = sample_coords(net.layers()[l], cfg.coords_per_layer, all, &mut rng);
            for k in coords {
                let orig = param(net.layers()[l], k);
                let mut f = |s: f64| {
                    *param_mut(net.layers_mut()[l], k) = orig + s;
                    prob.loss(&net, &mapping)
                };
                let num = central_difference(&mut f, h, cfg.stencil);
                *param_mut(net.layers_mut()[l], k) = orig;
                let r = relative_error(corrupt(param(gf.layers()[l], k), cfg.corrupt), num);
                let row = &mut rows[1 + l];
                row.checks += 1;
                row.max_rel_error = row.max_rel_error.max(r);
            }
        }
        let gml: Vec<Linear<f64>> = gm.named_layers().into_iter().map(|(_, l)| l.clone()).collect();
        for (l, gl) in gml.iter().enumerate() {
            let coords = sample_coords(gl, cfg.coords_per_layer, all, &mut rng);
            for k in coords {
                let p0 = *param_mut(mapping.layers_mut()[l], k);
                let mut f = |s: f64| {
                    *param_mut(mapping.layers_mut()[l], k) = p0 + s;
                    prob.loss(&net, &mapping)
                };
                let num = central_difference(&mut f, h, cfg.stencil);
                *param_mut(mapping.layers_mut()[l], k) = p0;
                let r = relative_error(corrupt(param(gl, k), cfg.corrupt), num);
                let row = &mut rows[field_rows + l];
                row.checks += 1;
                row.max_rel_error = row.max_rel_error.max(r);
            }
        }
    }
    Ok(GradcheckReport { rows, tolerance: cfg.tolerance, trials: cfg.trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes_and_lists_every_layer() {
        let cfg = GradcheckConfig { trials: 3, ..Default::default() };
        let rep = run(&cfg).unwrap();
        let names: Vec<_> = rep.rows.iter().map(|r| r.name.as_str()).collect();
        for i in 0..8 {
            assert!(names.contains(&format!("trunk.{i}").as_str()));
        }
        for n in ["input", "sdf_head", "color_film", "color_head", "mapping.0", "mapping.head"] {
            assert!(names.contains(&n), "{n} missing");
        }
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn stencil_orders() {
        let mut f = |s: f64| (3.0 * (0.2 + s)).sin();
        let exact = 3.0 * 0.6f64.cos();
        let e3 = (central_difference(&mut f, 1e-2, 3) - exact).abs();
        let e5 = (central_difference(&mut f, 1e-2, 5) - exact).abs();
        assert!(e3 > 1e-4 && e5 < 1e-6, "{e3} {e5}");
    }

    #[test]
    fn corrupted_gradients_fail() {
        let cfg = GradcheckConfig { trials: 1, corrupt: true, ..Default::default() };
        assert!(!run(&cfg).unwrap().passed());
    }
}
