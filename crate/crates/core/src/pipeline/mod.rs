//! The commands behind the `emu` binary, usable as a library.
//!
//! Layout on disk:
//!
//! ```text
//! <data.dir>/manifest.txt, tiles/*.gtil, run-generate.txt
//! <output>/model.dcem, normalization.txt, train-log.csv, run-train.txt
//! <output>/predictions/<tile>.gtil, run-infer.txt
//! <output>/reports/<tile>.txt, aggregate.txt, *.csv, run-evaluate.txt
//! <output>/bench.csv, bench-summary.txt, run-bench.txt
//! ```

mod commands;
mod config;

pub use commands::{
    bench, evaluate, generate, infer, load_pairs, prediction_raster, run_manifest_text, train,
    BenchResult, BenchRow, Outcome, TrainOutcome, CHECKPOINT_FILE, NORMALIZATION_FILE,
    PREDICTION_DIR, REPORT_DIR, TRAIN_LOG_FILE,
};
pub use config::{
    parse_seed_list, BenchSection, DataSection, EvaluateSection, InferMode, InferSection,
    Overrides, RunConfig, TrainSection,
};

use crate::{emulator, metrics, synth};

/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<synth::Error> for Error {
    fn from(e: synth::Error) -> Self {
        match e {
            synth::Error::Config(_) => Error::Config(e.to_string()),
            _ => Error::Data(e.to_string()),
        }
    }
}

impl From<emulator::Error> for Error {
    fn from(e: emulator::Error) -> Self {
        use emulator::Error as E;
        match e {
            E::NonFinite { .. } | E::Diverged { .. } => Error::Numeric(e.to_string()),
            E::Config(_) | E::UnknownArchitecture(_) | E::NoSamples => Error::Config(e.to_string()),
            _ => Error::Data(e.to_string()),
        }
    }
}

impl From<metrics::Error> for Error {
    fn from(e: metrics::Error) -> Self {
        match e {
            metrics::Error::Levels(_) => Error::Config(e.to_string()),
            metrics::Error::Misaligned(_) => Error::Data(e.to_string()),
        }
    }
}

impl From<crate::autodiff::Error> for Error {
    fn from(e: crate::autodiff::Error) -> Self {
        Error::Data(e.to_string())
    }
}
