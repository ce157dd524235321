use nextstep_core::ingest::IngestError;
use nextstep_core::{CoreError, EvalError, GenError, PredictError};
use nextstep_service::LoadError;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad invocation: missing or malformed flags and config.
    #[error("{0}")]
    Usage(String),
    /// The inputs could not be read or processed.
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }

    pub fn io(what: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", what.display()))
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(IngestError, CoreError, EvalError, GenError, PredictError, LoadError);
