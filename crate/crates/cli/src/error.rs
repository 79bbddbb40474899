use std::path::Path;

use fishbone_core::classifier::ClassifierError;
use fishbone_core::cluster::ClusterError;
use fishbone_core::corpus::CorpusError;
use fishbone_core::embedding::EmbedError;
use fishbone_core::fishbone::FishboneError;
use fishbone_core::render::RenderError;
use fishbone_core::segment::SegmentError;
use fishbone_core::summarizer::SummarizerError;
use thiserror::Error;

/// Every failure the CLI reports, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("provider: {0}")]
    Provider(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Provider(_) => 3,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    /// An upstream artifact is absent; names the command that writes it.
    pub fn missing_artifact(path: &Path, producer: &str) -> Self {
        CliError::Usage(format!("{} not found; run `fishbone {producer}` first", path.display()))
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::EmptyKeyword | CorpusError::UntrimmedKeyword(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SegmentError> for CliError {
    fn from(e: SegmentError) -> Self {
        match e {
            SegmentError::ZeroPrelude => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::InvalidParameter(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::InvalidConfig(_) | EmbedError::MissingToken(_) => CliError::Config(e.to_string()),
            EmbedError::Provider { .. } | EmbedError::DimensionMismatch { .. } => CliError::Provider(e.to_string()),
            EmbedError::Cache(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        match e {
            ClusterError::InvalidConfig(_) | ClusterError::InvalidRange { .. } => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SummarizerError> for CliError {
    fn from(e: SummarizerError) -> Self {
        match e {
            SummarizerError::InvalidConfig(_) | SummarizerError::MissingToken(_) | SummarizerError::ZeroThemes => {
                CliError::Config(e.to_string())
            }
            SummarizerError::EmptyInput | SummarizerError::Cache(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<FishboneError> for CliError {
    fn from(e: FishboneError) -> Self {
        match e {
            FishboneError::Embedding(e) => e.into(),
            FishboneError::Cluster(e) => e.into(),
            FishboneError::Summarizer(e) => e.into(),
            FishboneError::InvalidConfig(_) | FishboneError::EmptyTopic => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> Self {
        match e {
            RenderError::InvalidOptions(_) | RenderError::UnknownFormat(_) => CliError::Config(e.to_string()),
            RenderError::Parse(_) | RenderError::Schema(_) => CliError::Data(e.to_string()),
        }
    }
}
