mod config;
mod error;
mod run;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use pgsc_core::message::Schema;

use config::PipelineConfig;
use error::{exit_code, ConfigError};
use run::Run;

#[derive(Parser, Debug)]
#[command(name = "pgsc", version, about = "Power-grid supply-chain attack synthesis, risk and detection")]
struct Cli {
    /// Flat TOML configuration; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed (overrides the config's `seed`).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory (overrides the config's `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SurfaceArg {
    Scada,
    Stability,
}

impl From<SurfaceArg> for Schema {
    fn from(s: SurfaceArg) -> Self {
        match s {
            SurfaceArg::Scada => Schema::Scada,
            SurfaceArg::Stability => Schema::Stability,
        }
    }
}

#[derive(clap::Args, Debug)]
struct SurfaceOpt {
    /// Attack surface (overrides the config's `surface`).
    #[arg(long, value_enum)]
    surface: Option<SurfaceArg>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a grid scenario and write its trajectory.
    Simulate {
        /// Scenario TOML (overrides the config's `scenario`).
        #[arg(long, value_name = "PATH")]
        scenario: Option<PathBuf>,
    },
    /// Split the real data and train the GAN.
    TrainGan {
        #[command(flatten)]
        surface: SurfaceOpt,
        /// Not supported: training keeps no checkpoints.
        #[arg(long)]
        resume: bool,
    },
    /// Sample attack vectors from a trained generator.
    Generate {
        #[command(flatten)]
        surface: SurfaceOpt,
    },
    /// VaR/CVaR of the generated attack vectors.
    Risk {
        #[command(flatten)]
        surface: SurfaceOpt,
    },
    /// Fit the forest and baseline detectors on real vs generated rows.
    TrainDetector {
        #[command(flatten)]
        surface: SurfaceOpt,
    },
    /// Score the detectors on their held-out split.
    Evaluate {
        #[command(flatten)]
        surface: SurfaceOpt,
    },
    /// Every stage on both surfaces, plus the constraint check.
    Pipeline,
}

fn resolve(cli: &Cli) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    match &cli.command {
        Command::Simulate { scenario: Some(path) } => cfg.scenario = Some(path.clone()),
        Command::TrainGan { surface, .. }
        | Command::Generate { surface }
        | Command::Risk { surface }
        | Command::TrainDetector { surface }
        | Command::Evaluate { surface } => {
            if let Some(s) = surface.surface {
                cfg.surface = s.into();
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    if let Command::TrainGan { resume: true, .. } = cli.command {
        return Err(stages::unsupported(
            "--resume is not supported: GAN training keeps no checkpoints; start a fresh run",
        ));
    }
    let cfg = resolve(&cli)?;
    let surface = cfg.surface;
    let mut run = Run::new(cfg)?;
    let name = match cli.command {
        Command::Simulate { .. } => {
            let dir = run.surface_dir(None)?;
            run.stage("simulate", None, |r| stages::simulate_stage(r, &dir))?;
            "simulate"
        }
        Command::TrainGan { .. } => {
            let dir = run.surface_dir(None)?;
            run.stage("train-gan", Some(surface), |r| stages::train_gan_stage(r, surface, &dir))?;
            "train-gan"
        }
        Command::Generate { .. } => {
            let dir = run.surface_dir(None)?;
            run.stage("generate", Some(surface), |r| stages::generate_stage(r, surface, &dir))?;
            "generate"
        }
        Command::Risk { .. } => {
            let dir = run.surface_dir(None)?;
            run.stage("risk", Some(surface), |r| stages::risk_stage(r, surface, &dir))?;
            "risk"
        }
        Command::TrainDetector { .. } => {
            let dir = run.surface_dir(None)?;
            run.stage("train-detector", Some(surface), |r| stages::train_detector_stage(r, surface, &dir))?;
            "train-detector"
        }
        Command::Evaluate { .. } => {
            let dir = run.surface_dir(None)?;
            run.stage("evaluate", Some(surface), |r| stages::evaluate_stage(r, surface, &dir))?;
            "evaluate"
        }
        Command::Pipeline => {
            let root = run.surface_dir(None)?;
            let trajectory = run.stage("simulate", None, |r| stages::simulate_stage(r, &root))?;
            for surface in [Schema::Scada, Schema::Stability] {
                let dir = run.surface_dir(Some(surface))?;
                stages::surface_pipeline(&mut run, surface, &dir, &trajectory)?;
            }
            "pipeline"
        }
    };
    let manifest = run.finish(name)?;
    log::info!("wrote {}", manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
