mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] sdfvol::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Config(_) => 1,
            Self::Library(_) | Self::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sdfvol", version, about = "SDF volume rendering experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,
    /// Output directory for the run.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct PoseArgs {
    /// Camera azimuth in radians.
    #[arg(long, allow_negative_numbers = true)]
    azimuth: Option<f64>,
    /// Camera elevation in radians.
    #[arg(long, allow_negative_numbers = true)]
    elevation: Option<f64>,
    /// Field of view in degrees.
    #[arg(long)]
    fov: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct QuadratureArgs {
    /// Density sharpness alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Samples per ray.
    #[arg(long)]
    samples: Option<usize>,
    /// Image side in pixels.
    #[arg(long)]
    resolution: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a field network to a sphere SDF.
    InitSphere {
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Render color, depth and opacity buffers.
    Render {
        #[command(flatten)]
        pose: PoseArgs,
        #[command(flatten)]
        quad: QuadratureArgs,
        /// Also write the composited feature buffer (network scenes).
        #[arg(long)]
        features: bool,
    },
    /// Sample the SDF on a grid and extract the zero level set.
    ExtractMesh {
        /// Grid resolution per axis.
        #[arg(long)]
        resolution: Option<usize>,
        /// Half-extent of the sampling cube.
        #[arg(long)]
        half_extent: Option<f64>,
        /// Midpoint subdivision steps.
        #[arg(long, value_name = "K", default_value_t = 0)]
        subdivide: usize,
        /// Attach one standard-normal value per vertex.
        #[arg(long)]
        noise: bool,
        #[arg(long, default_value = "ply")]
        format: String,
        /// Also store the sampled grid as raw f32.
        #[arg(long)]
        save_grid: bool,
    },
    /// Compare depth clouds of a frontal and a side view.
    EvalConsistency {
        #[command(flatten)]
        pose: PoseArgs,
        #[command(flatten)]
        quad: QuadratureArgs,
        /// Side-view azimuth in radians.
        #[arg(long, allow_negative_numbers = true)]
        side_azimuth: Option<f64>,
        /// Number of pairs (identities) to evaluate.
        #[arg(long)]
        identities: Option<usize>,
        /// Keep pixels hidden behind nearer geometry.
        #[arg(long)]
        no_occlusion: bool,
    },
    /// Compare analytic gradients with finite differences.
    Gradcheck {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, hide = true)]
        corrupt_gradients: bool,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_pose(cfg: &mut RunConfig, p: &PoseArgs) {
    if let Some(a) = p.azimuth {
        cfg.camera.azimuth = a;
    }
    if let Some(e) = p.elevation {
        cfg.camera.elevation = e;
    }
    if let Some(f) = p.fov {
        cfg.camera.fov_deg = f;
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    let mut cfg = load_config(&cli.common)?;
    let common = &cli.common;
    match cli.command {
        Command::InitSphere { iterations } => {
            if let Some(n) = iterations {
                cfg.sphere_init.iterations = n;
            }
            cfg.validate()?;
            commands::init_sphere(&cfg, common)
        }
        Command::Render { pose, quad, features } => {
            apply_pose(&mut cfg, &pose);
            if let Some(a) = quad.alpha {
                cfg.render.alpha = a;
            }
            if let Some(n) = quad.samples {
                cfg.render.samples = n;
            }
            if let Some(r) = quad.resolution {
                cfg.render.resolution = r;
            }
            cfg.validate()?;
            commands::render(&cfg, common, features)
        }
        Command::ExtractMesh { resolution, half_extent, subdivide, noise, format, save_grid } => {
            if let Some(r) = resolution {
                cfg.mesh.resolution = r;
            }
            if half_extent.is_some() {
                cfg.mesh.half_extent = half_extent;
            }
            let format = format.parse().map_err(CliError::Usage)?;
            cfg.validate()?;
            commands::extract_mesh(&cfg, common, commands::MeshArgs { subdivide, noise, format, save_grid })
        }
        Command::EvalConsistency { pose, quad, side_azimuth, identities, no_occlusion } => {
            apply_pose(&mut cfg, &pose);
            let c = &mut cfg.consistency;
            if let Some(a) = quad.alpha {
                c.alpha = a;
            }
            if let Some(n) = quad.samples {
                c.samples = n;
            }
            if let Some(r) = quad.resolution {
                c.resolution = r;
            }
            if side_azimuth.is_some() {
                c.side_azimuth = side_azimuth;
            }
            if let Some(n) = identities {
                c.identities = n;
            }
            if no_occlusion {
                c.occlusion = false;
            }
            cfg.validate()?;
            commands::eval_consistency(&cfg, common)
        }
        Command::Gradcheck { trials, corrupt_gradients } => {
            if let Some(t) = trials {
                cfg.gradcheck.trials = t;
            }
            cfg.validate()?;
            commands::gradcheck(&cfg, common, corrupt_gradients)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
