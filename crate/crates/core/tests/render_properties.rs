use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdfvol::camera::CameraPose;
use sdfvol::field::{AnalyticSdf, ConditionedField, FieldConfig, FieldNetwork, ModulationSignals};
use sdfvol::render::{composite, render, sdf_to_density, DensityParams, RaySamples, RenderOptions};
use sdfvol::Vec3d;

fn frontal(res: usize) -> CameraPose<f64> {
    CameraPose::from_angles(0.0, 0.0, 12.0, 0.88, 1.12, res, res).unwrap()
}

#[test]
fn random_networks_give_bounded_opacity_on_ten_thousand_rays() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..4u64 {
        let net = FieldNetwork::<f64>::new(FieldConfig { hidden_width: 16, feature_width: 2 }, &mut rng);
        let mods = ModulationSignals::uniform(&net.film_widths(), 30.0, 0.1 * seed as f64);
        let field = ConditionedField::new(&net, &mods).unwrap();
        let opts = RenderOptions::geometry(24, 1e-2, seed).unwrap();
        let out = render(&field, &frontal(50), &opts).unwrap();
        for ((&o, &d), &v) in out.opacity.iter().zip(&out.depth).zip(&out.valid) {
            assert!((0.0..=1.0).contains(&o), "opacity {o}");
            // unnormalised depth is bounded by opacity times the far plane
            assert!(d >= 0.0 && d <= o * 1.12 + 1e-12);
            assert_eq!(v, o >= 0.5);
        }
    }
}

#[test]
fn depth_converges_to_the_surface_as_alpha_shrinks() {
    let sphere = AnalyticSdf::sphere(Vec3d::zero(), 0.1).unwrap();
    let cam = CameraPose::from_angles(0.0, 0.0, 12.0, 0.88, 1.12, 1, 1).unwrap();
    let errors: Vec<f64> = [1e-2, 3e-3, 1e-3, 3e-4]
        .iter()
        .map(|&a| {
            let opts = RenderOptions::geometry(512, a, 0).unwrap();
            let out = render(&sphere, &cam, &opts).unwrap();
            (out.depth[0] - 0.9).abs()
        })
        .collect();
    // once alpha is below the bin size the quadrature error dominates
    for w in errors[..3].windows(2) {
        assert!(w[1] < w[0], "{errors:?}");
    }
    assert!(errors[3] < 0.24 / 512.0, "{errors:?}");
}

#[test]
fn thread_count_does_not_change_network_renders() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = FieldNetwork::<f64>::new(FieldConfig { hidden_width: 16, feature_width: 3 }, &mut rng);
    let mods = net.siren_modulation(30.0);
    let field = ConditionedField::new(&net, &mods).unwrap();
    let opts = RenderOptions::geometry(16, 1e-2, 9).unwrap().with_color(true).with_features(true);
    let cam = frontal(24);
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let a = pool(1).install(|| render(&field, &cam, &opts).unwrap());
    let b = pool(4).install(|| render(&field, &cam, &opts).unwrap());
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.depth), bits(&b.depth));
    assert_eq!(bits(&a.color), bits(&b.color));
    assert_eq!(bits(&a.feature), bits(&b.feature));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn weights_are_a_sub_probability(
        sdf in prop::collection::vec(-0.2f64..0.2, 1..64),
        alpha in 1e-3f64..0.1,
        delta in 0.0f64..1.0,
    ) {
        let n = sdf.len();
        let samples = RaySamples::with_offset(0.88, 1.12, n, delta * 0.24 / n as f64).unwrap();
        let p = DensityParams::new(alpha).unwrap();
        let sigma: Vec<f64> = sdf.iter().map(|&d| sdf_to_density(d, p)).collect();
        let ts: Vec<f64> = samples.positions().collect();
        let (_, w) = composite(&samples, &sigma, &ts, 1).unwrap();
        let sum: f64 = w.weights.iter().sum();
        prop_assert!(w.weights.iter().all(|&x| x >= 0.0));
        prop_assert!((sum - w.opacity).abs() < 1e-12);
        prop_assert!((w.opacity - (1.0 - w.transmittance[n - 1] * (1.0 - w.alpha[n - 1]))).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&w.opacity));
        for pair in w.transmittance.windows(2) {
            prop_assert!(pair[1] <= pair[0]);
        }
    }
}
