//! Synthetic data, training, evaluation and the command implementations
//! behind the `sgnet` binary.

mod commands;
pub mod gradsuite;
pub mod config;
pub mod model;
pub mod rng;
pub mod synthetic;
pub mod train;

use std::path::PathBuf;

use thiserror::Error;

use crate::conllu::IngestError;
use crate::encoder::ModelError;
use crate::numerics::NumericsError;
use crate::sdoi::MaskError;

pub use commands::*;
pub use config::{RunConfig, Settings};
pub use model::TaskModel;
pub use synthetic::{gen_synthetic, SyntheticExample, Target, Task};
pub use train::{evaluate, train, EvalReport, TrainReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("{0}")]
    Config(String),
    #[error("{origin}:{line}: {message}")]
    ConfigLine {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
    #[error("loss became {loss} at step {step}")]
    Diverged { step: usize, loss: f64 },
}
