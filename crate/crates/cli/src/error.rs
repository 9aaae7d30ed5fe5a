use std::fmt;
use std::path::{Path, PathBuf};

use ossmm_core::features::FeatureError;
use ossmm_core::ingest::IngestError;
use ossmm_core::ml::MlError;
use ossmm_core::stream::StreamError;
use ossmm_core::synth::SynthError;
use ossmm_core::ModelError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_MISSING_INPUT: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input data.
    Validation(String),
    /// A prerequisite file is absent. `producer` is the command that writes it.
    MissingInput { path: PathBuf, producer: &'static str },
    Internal(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::MissingInput { .. } => EXIT_MISSING_INPUT,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn missing(path: &Path, producer: &'static str) -> Self {
        CliError::MissingInput {
            path: path.to_path_buf(),
            producer,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::MissingInput { path, producer } => write!(
                f,
                "missing input {}; run `ossmm-kit {producer}` to produce it",
                path.display()
            ),
            CliError::Internal(e) => write!(f, "internal error: {e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Internal(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.into())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io { ref path, ref source } if source.kind() == std::io::ErrorKind::NotFound => {
                CliError::missing(path, "synth")
            }
            IngestError::Io { .. } => CliError::Internal(e.into()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::WrongHeader | FeatureError::MalformedRow { .. } | FeatureError::Csv(_) => {
                CliError::Validation(e.to_string())
            }
            other => CliError::Internal(other.into()),
        }
    }
}

impl From<MlError> for CliError {
    fn from(e: MlError) -> Self {
        match e {
            MlError::InvalidConfig(_) | MlError::Format(_) | MlError::MissingClass(_) => {
                CliError::Validation(e.to_string())
            }
            other => CliError::Internal(other.into()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::TooShort(_) | SynthError::TooFewNights(_) | SynthError::InvalidProfile(_) => {
                CliError::Validation(e.to_string())
            }
            SynthError::Ingest(i) => i.into(),
            other => CliError::Internal(other.into()),
        }
    }
}

impl From<StreamError> for CliError {
    fn from(e: StreamError) -> Self {
        match e {
            StreamError::OutOfOrderFrame { .. } => CliError::Validation(e.to_string()),
            StreamError::Ml(m) => m.into(),
            other => CliError::Internal(other.into()),
        }
    }
}
