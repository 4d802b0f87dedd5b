//! Experiment driver: synthetic dataset generation, model training, and the
//! three evaluation tasks (noisy-evidence classification, placeholder
//! inference, novelty detection), plus DOT export for visual audits.

pub mod commands;
pub mod config;
pub mod dot;
pub mod metrics;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

macro_rules! data_error_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error_from!(
    std::io::Error,
    graphspn::data::GraphError,
    graphspn::model::ModelError,
    graphspn::mrf::MrfError,
    graphspn::templates::DecomposeError,
    graphspn::learn::LearnError,
    graphspn::spn::SpnError
);
