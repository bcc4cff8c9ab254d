use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use sdfvol::camera::CameraPose;
use sdfvol::consistency::{evaluate_pair, ConsistencyReport, EvalOptions};
use sdfvol::field::io::ModelFile;
use sdfvol::field::{
    AnalyticScene, AnalyticSdf, ConditionedField, FieldConfig, FieldNetwork, LatentCode, ModulationSignals, OMEGA0,
};
use sdfvol::geometry::{attach_vertex_noise, export_mesh, marching_cubes, sample_grid, subdivide, Bounds, MeshFormat};
use sdfvol::imageio::{write_depth_png, write_gray_png, write_pfm, write_raw_f32, write_rgb_png};
use sdfvol::losses::{mean_abs_residual, sample_box, sample_shell, sphere_init_fit, write_history_csv};
use sdfvol::render::{render as render_field, RenderOptions};
use sdfvol::{gradcheck as gc, Error, Vec3d};

use crate::config::{RunConfig, SceneConfig};
use crate::{CliError, Common};

/// Held-out points for the sphere-init report.
const HELD_OUT_POINTS: usize = 4096;

enum Scene {
    Analytic(AnalyticScene<f64>),
    Network(ModelFile<f64>),
}

impl Scene {
    fn load(cfg: &RunConfig) -> Result<Self, CliError> {
        Ok(match &cfg.scene {
            SceneConfig::Analytic { sdf, albedo } => Self::Analytic(AnalyticScene::new(*sdf, *albedo)),
            SceneConfig::Network { path } => Self::Network(ModelFile::load(path)?),
        })
    }

    /// Modulation for identity `k`: stored signals if present, otherwise a
    /// latent drawn from `seed + k` through the mapping network, otherwise
    /// plain SIREN signals.
    fn modulation(&self, seed: u64, k: usize) -> Result<Option<ModulationSignals<f64>>, CliError> {
        let Self::Network(m) = self else { return Ok(None) };
        if let Some(mods) = &m.modulation {
            return Ok(Some(mods.clone()));
        }
        if let Some(map) = &m.mapping {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            return Ok(Some(map.forward(&LatentCode::sample(map.z_dim(), &mut rng))?));
        }
        Ok(Some(m.field.siren_modulation(OMEGA0)))
    }
}

/// Runs `$body` with `$f` bound to a `Field<f64>` for identity `$k`.
macro_rules! with_field {
    ($scene:expr, $seed:expr, $k:expr, |$f:ident| $body:expr) => {{
        let mods = $scene.modulation($seed, $k)?;
        match (&$scene, &mods) {
            (Scene::Analytic(s), _) => {
                let $f = s;
                $body
            }
            (Scene::Network(m), Some(mods)) => {
                let $f = &ConditionedField::new(&m.field, mods)?;
                $body
            }
            (Scene::Network(_), None) => unreachable!("network scenes always have modulation"),
        }
    }};
}

fn prepare_out(common: &Common, required: bool) -> Result<Option<PathBuf>, CliError> {
    let Some(dir) = &common.out else {
        return if required { Err(CliError::Usage("--out DIR is required".into())) } else { Ok(None) };
    };
    if dir.exists() {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!("{} exists and is not a directory", dir.display())));
        }
        let non_empty = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_some();
        if non_empty && !common.force {
            return Err(CliError::Usage(format!("{} is not empty; pass --force to overwrite", dir.display())));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(Some(dir.clone()))
}

fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, extra: Value) -> Result<(), CliError> {
    let mut m = json!({ "command": command, "config": cfg });
    if let (Value::Object(m), Value::Object(extra)) = (&mut m, extra) {
        m.extend(extra);
    }
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&m).expect("manifest serialises") + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

pub fn init_sphere(cfg: &RunConfig, common: &Common) -> Result<(), CliError> {
    let dir = prepare_out(common, true)?.expect("required");
    let si = &cfg.sphere_init;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fc = FieldConfig { hidden_width: cfg.network.hidden_width, feature_width: cfg.network.feature_width };
    let net = FieldNetwork::<f64>::new(fc, &mut rng);
    let mods = net.siren_modulation(OMEGA0);
    log::info!("fitting sphere r={} for {} iterations, width {}", si.radius, si.iterations, fc.hidden_width);
    let history_path = dir.join("history.csv");
    let fit = match sphere_init_fit(net, &mods, si, &mut rng) {
        Ok(fit) => fit,
        Err(Error::Diverged { iteration, loss, initial, history }) => {
            write_history_csv(&history_path, &history)?;
            let extra = json!({ "diverged": { "iteration": iteration, "loss": loss, "initial": initial } });
            write_manifest(&dir, "init-sphere", cfg, extra)?;
            return Err(Error::Diverged { iteration, loss, initial, history }.into());
        }
        Err(e) => return Err(e.into()),
    };
    write_history_csv(&history_path, &fit.history)?;
    let model_path = dir.join("model.bin");
    ModelFile { field: fit.net, mapping: None, modulation: Some(mods) }.save(&model_path)?;

    // evaluate what was actually written (parameters are stored as f32)
    let saved = ModelFile::<f64>::load(&model_path)?;
    let mods = saved.modulation.as_ref().expect("saved with modulation");
    let target = AnalyticSdf::sphere(Vec3d::zero(), si.radius)?;
    let mut eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_e7a1);
    let shell = sample_shell::<f64, _>(0.5 * si.radius, 1.5 * si.radius, HELD_OUT_POINTS, &mut eval_rng);
    let boxed: Vec<Vec3d> = (0..HELD_OUT_POINTS).map(|_| sample_box(si.box_half_extent, &mut eval_rng)).collect();
    let shell_err = mean_abs_residual(&saved.field, mods, &target, &shell)?;
    let box_err = mean_abs_residual(&saved.field, mods, &target, &boxed)?;
    let final_loss = *fit.history.last().expect("at least one iteration");
    println!("final batch mse {final_loss:e}");
    println!("held-out mean |d - d_true|: shell {shell_err:.6}, box {box_err:.6}");
    let extra = json!({
        "outputs": { "model": "model.bin", "history": "history.csv" },
        "final_loss": final_loss,
        "held_out": {
            "points": HELD_OUT_POINTS,
            "shell": [0.5 * si.radius, 1.5 * si.radius],
            "shell_mean_abs_error": shell_err,
            "box_mean_abs_error": box_err,
        },
    });
    write_manifest(&dir, "init-sphere", cfg, extra)
}

pub fn render(cfg: &RunConfig, common: &Common, features: bool) -> Result<(), CliError> {
    let dir = prepare_out(common, true)?.expect("required");
    let scene = Scene::load(cfg)?;
    let r = &cfg.render;
    let cam = cfg.camera.pose(r.resolution)?;
    let opts = RenderOptions::geometry(r.samples, r.alpha, cfg.seed)?.with_color(true).with_features(features);
    let out = with_field!(scene, cfg.seed, 0, |f| render_field(f, &cam, &opts)?);
    let (w, h) = (out.width, out.height);
    let mut files = vec!["color.png", "color.pfm", "depth.pfm", "depth.png", "opacity.pfm", "opacity.png"];
    write_rgb_png(&dir.join("color.png"), w, h, &out.color)?;
    write_pfm(&dir.join("color.pfm"), w, h, 3, &out.color)?;
    write_pfm(&dir.join("depth.pfm"), w, h, 1, &out.depth)?;
    write_depth_png(&dir.join("depth.png"), w, h, &out.depth, &out.valid, cam.near, cam.far)?;
    write_pfm(&dir.join("opacity.pfm"), w, h, 1, &out.opacity)?;
    write_gray_png(&dir.join("opacity.png"), w, h, &out.opacity, 0.0, 1.0)?;
    if features {
        if out.feature_width == 0 {
            log::warn!("scene has no feature channels; features.f32 not written");
        } else {
            write_raw_f32(&dir.join("features.f32"), &[h, w, out.feature_width], Some("hwc"), &out.feature)?;
            files.push("features.f32");
        }
    }
    println!("{} of {} rays valid", out.valid_count(), out.pixel_count());
    let extra = json!({
        "outputs": files,
        "camera": cam,
        "seed": cfg.seed,
        "alpha": r.alpha,
        "samples": r.samples,
        "valid_rays": out.valid_count(),
    });
    write_manifest(&dir, "render", cfg, extra)
}

pub struct MeshArgs {
    pub subdivide: usize,
    pub noise: bool,
    pub format: MeshFormat,
    pub save_grid: bool,
}

pub fn extract_mesh(cfg: &RunConfig, common: &Common, args: MeshArgs) -> Result<(), CliError> {
    let dir = prepare_out(common, true)?.expect("required");
    let scene = Scene::load(cfg)?;
    let half = cfg.mesh_half_extent();
    let bounds = Bounds::cube(half)?;
    let grid = with_field!(scene, cfg.seed, 0, |f| sample_grid(f, bounds, cfg.mesh.resolution)?);
    if args.save_grid {
        grid.save_raw(&dir.join("grid.f32"))?;
    }
    let base = marching_cubes(&grid, cfg.mesh.iso);
    let mut mesh = base.clone();
    for _ in 0..args.subdivide {
        mesh = subdivide(&mesh);
    }
    if args.noise {
        mesh = attach_vertex_noise(&mesh, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    }
    if mesh.is_empty() {
        log::warn!("level set {} is empty inside +-{half}; writing an empty mesh", cfg.mesh.iso);
    }
    let name = format!("mesh.{}", args.format.extension());
    export_mesh(&mesh, &dir.join(&name), args.format)?;
    println!("{} vertices, {} faces", mesh.vertex_count(), mesh.face_count());
    let radii: Vec<f64> = base.vertices.iter().map(|v| v.norm()).collect();
    let stat = |f: fn(f64, f64) -> f64, init| radii.iter().copied().fold(init, f);
    let extra = json!({
        "outputs": if args.save_grid { vec![name, "grid.f32".into()] } else { vec![name] },
        "half_extent": half,
        "cell_size": grid.cell_size().x,
        "subdivide": args.subdivide,
        "noise": args.noise,
        "vertices": mesh.vertex_count(),
        "faces": mesh.face_count(),
        "area": mesh.area(),
        "watertight": mesh.is_watertight(),
        "euler_characteristic": mesh.euler_characteristic(),
        "base_radius_min": if radii.is_empty() { None } else { Some(stat(f64::min, f64::INFINITY)) },
        "base_radius_max": if radii.is_empty() { None } else { Some(stat(f64::max, 0.0)) },
    });
    write_manifest(&dir, "extract-mesh", cfg, extra)
}

fn csv_row(label: &str, seed: &str, r: [f64; 5]) -> String {
    let [ch, l1, px, fv, sv] = r;
    format!("{label},{seed},{ch:.9e},{l1:.9e},{px},{fv:.9e},{sv:.9e}\n")
}

pub fn eval_consistency(cfg: &RunConfig, common: &Common) -> Result<(), CliError> {
    let dir = prepare_out(common, true)?.expect("required");
    let scene = Scene::load(cfg)?;
    let c = &cfg.consistency;
    let cam = &cfg.camera;
    let frontal = cam.pose(c.resolution)?;
    let side = CameraPose::from_angles(cfg.side_azimuth(), c.side_elevation, cam.fov_deg, cam.near, cam.far, c.resolution, c.resolution)?;
    let mut csv = String::from(
        "identity,seed,chamfer,reprojection_median_l1,reprojection_pixels,frontal_valid_fraction,side_valid_fraction\n",
    );
    let mut reports: Vec<ConsistencyReport> = Vec::with_capacity(c.identities);
    for k in 0..c.identities {
        let seed = cfg.seed.wrapping_add(k as u64);
        let opts = EvalOptions { samples: c.samples, resolution: c.resolution, alpha: c.alpha, seed, occlusion: c.occlusion };
        let report = with_field!(scene, cfg.seed, k, |f| evaluate_pair(f, &frontal, &side, &opts))
            .map_err(|e| CliError::Runtime(format!("identity {k}: {e}")))?;
        report.write_json(&dir.join(format!("pair_{k:03}.json")))?;
        report.write_nn_png(&dir.join(format!("nn_{k:03}.png")), 4.0)?;
        report.write_l1_png(&dir.join(format!("l1_{k:03}.png")), 32.0)?;
        let row = [
            report.chamfer,
            report.reprojection_median_l1.unwrap_or(f64::NAN),
            report.reprojection_pixels as f64,
            report.frontal_valid_fraction,
            report.side_valid_fraction,
        ];
        csv.push_str(&csv_row(&k.to_string(), &seed.to_string(), row));
        println!("identity {k}: chamfer {:.6} bins, reprojection median L1 {:?}", report.chamfer, report.reprojection_median_l1);
        reports.push(report);
    }
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&ConsistencyReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let mean_row = [
        mean(&|r| r.chamfer),
        mean(&|r| r.reprojection_median_l1.unwrap_or(f64::NAN)),
        mean(&|r| r.reprojection_pixels as f64),
        mean(&|r| r.frontal_valid_fraction),
        mean(&|r| r.side_valid_fraction),
    ];
    csv.push_str(&csv_row("mean", "", mean_row));
    let csv_path = dir.join("summary.csv");
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    println!("mean chamfer {:.6} bins over {} pairs", mean_row[0], reports.len());
    let extra = json!({
        "outputs": { "summary": "summary.csv", "pairs": reports.len() },
        "frontal_camera": frontal,
        "side_camera": side,
        "mean_chamfer": mean_row[0],
        "pairs": reports.iter().map(|r| r.summary()).collect::<Vec<_>>(),
    });
    write_manifest(&dir, "eval-consistency", cfg, extra)
}

pub fn gradcheck(cfg: &RunConfig, common: &Common, corrupt: bool) -> Result<(), CliError> {
    let dir = prepare_out(common, false)?;
    let gcfg = gc::GradcheckConfig { corrupt, ..cfg.gradcheck.with_seed(cfg.seed) };
    let report = gc::run(&gcfg)?;
    let mut table = String::new();
    writeln!(table, "{:<14} {:>8} {:>14}  status", "layer", "checks", "max_rel_error").unwrap();
    for row in &report.rows {
        let ok = row.checks > 0 && row.max_rel_error < report.tolerance;
        let status = if ok { "ok" } else { "FAIL" };
        writeln!(table, "{:<14} {:>8} {:>14.3e}  {status}", row.name, row.checks, row.max_rel_error).unwrap();
    }
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    writeln!(
        table,
        "{verdict}: max relative error {:.3e} (tolerance {:e}, {} trials)",
        report.max_rel_error(),
        report.tolerance,
        report.trials
    )
    .unwrap();
    print!("{table}");
    if let Some(dir) = dir {
        let path = dir.join("gradcheck.json");
        let text = serde_json::to_string_pretty(&report).expect("report serialises") + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let extra = json!({ "outputs": ["gradcheck.json"], "passed": report.passed(), "corrupted": corrupt });
        write_manifest(&dir, "gradcheck", cfg, extra)?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("gradient check failed: max relative error {:.3e}", report.max_rel_error())))
    }
}
