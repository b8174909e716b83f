use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use emu_core::emulator::Architecture;
use emu_core::pipeline::{self, Error, InferMode, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "emu",
    version,
    about = "Train and evaluate a Bayesian atmospheric-correction emulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic tile dataset.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Replace an existing dataset directory.
        #[arg(long)]
        force: bool,
    },
    /// Train the emulator and checkpoint every epoch.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        arch: Option<Arch>,
    },
    /// Predict every test tile.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Stochastic forward passes in bayes mode.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Score predictions against the teacher tiles.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Time static, Monte-Carlo and reference processing.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    Dcfc,
    Dccnn,
    Dcvdsr,
}

impl From<Arch> for Architecture {
    fn from(a: Arch) -> Self {
        match a {
            Arch::Dcfc => Architecture::Dcfc,
            Arch::Dccnn => Architecture::Dccnn,
            Arch::Dcvdsr => Architecture::Dcvdsr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Static,
    Bayes,
}

impl From<Mode> for InferMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Static => InferMode::Static,
            Mode::Bayes => InferMode::Bayes,
        }
    }
}

fn load(common: &Common, mut overrides: Overrides) -> Result<RunConfig, Error> {
    overrides.seed = common.seed;
    RunConfig::load(&common.config, &overrides)
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("EMU_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Config(format!("EMU_THREADS must be a positive integer, got `{v}`"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<pipeline::Outcome, Error> {
    configure_threads()?;
    match cli.command {
        Command::Generate { common, force } => {
            pipeline::generate(&load(&common, Overrides::default())?, force)
        }
        Command::Train { common, arch } => {
            let o = Overrides {
                architecture: arch.map(Into::into),
                ..Default::default()
            };
            Ok(pipeline::train(&load(&common, o)?)?.outcome)
        }
        Command::Infer {
            common,
            mode,
            samples,
        } => {
            let o = Overrides {
                mode: mode.map(Into::into),
                samples,
                ..Default::default()
            };
            pipeline::infer(&load(&common, o)?)
        }
        Command::Evaluate { common } => {
            Ok(pipeline::evaluate(&load(&common, Overrides::default())?)?.0)
        }
        Command::Bench { common, samples } => {
            let mut cfg = load(&common, Overrides::default())?;
            if let Some(t) = samples {
                cfg.bench.samples = t;
                cfg.validate()?;
            }
            Ok(pipeline::bench(&cfg)?.0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for line in &out.summary {
                println!("{line}");
            }
            println!("manifest: {}", out.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("emu: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
