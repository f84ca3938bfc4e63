//! Run configurations, result records and command execution for the
//! `yamabe` binary.

pub mod commands;
pub mod config;
pub mod record;

pub use commands::{run, startup_self_tests, Outcome, RunOptions};
pub use config::RunConfig;
pub use record::{Check, ResultRecord, Table};

use yamabe_core::{
    AnomalyError, CollarError, ExprError, GeomError, PipelineError, ProbeError, RenvolError, VariationError,
    YamabeError,
};

/// Errors that stop a run before any check is evaluated.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{module}: {message}")]
    Domain { module: &'static str, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// Process exit status for the error.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

macro_rules! domain_from {
    ($($ty:ty => $module:literal),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Domain { module: $module, message: e.to_string() }
            }
        })*
    };
}

domain_from!(
    ExprError => "expr",
    GeomError => "geom",
    CollarError => "collar",
    YamabeError => "yamabe",
    RenvolError => "renvol",
    AnomalyError => "anomaly",
    VariationError => "variation",
    ProbeError => "volprobe",
);

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let module = match e {
            PipelineError::Geom(_) => "geom",
            PipelineError::Collar(_) => "collar",
            PipelineError::Yamabe(_) => "yamabe",
            PipelineError::Renvol(_) => "renvol",
            PipelineError::Anomaly(_) => "anomaly",
        };
        CliError::Domain {
            module,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
