use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("profile matrix has no models")]
    EmptyModelSet,
    #[error("no clusters supplied for aggregation")]
    NoClusters,
    #[error("cluster index {index} out of range for {k} clusters")]
    ClusterOutOfRange { index: usize, k: usize },
    #[error("invalid trade-off configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed profile matrix: {0}")]
    MalformedProfile(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("cannot fit {k} clusters to {points} points")]
    TooFewPoints { k: usize, points: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid clustering request: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("embedding provider rejected credentials: {0}")]
    AuthError(String),
    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid embedding input: {0}")]
    InvalidInput(String),
    #[error("invalid embedding provider config: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("record `{query_id}` has no result for model `{model}`")]
    IncompleteProfile { query_id: String, model: String },
    #[error("no embedding for record `{0}`")]
    MissingEmbedding(String),
    #[error("no training records")]
    NoRecords,
    #[error("invalid record `{query_id}`: {message}")]
    InvalidRecord { query_id: String, message: String },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

#[derive(Debug, Error)]
pub enum RecordsError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("artifact version mismatch: file has `{found}`, reader expects `{expected}`")]
    VersionMismatch { found: String, expected: String },
    #[error("artifact digest mismatch: recorded {recorded}, computed {computed}")]
    DigestMismatch { recorded: String, computed: String },
    #[error("malformed artifact: {0}")]
    MalformedArtifact(String),
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum RouteError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("query text is empty")]
    EmptyQuery,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("record `{query_id}` has no result for routed model `{model}`")]
    IncompleteProfile { query_id: String, model: String },
    #[error("no embedding cached for record `{0}`")]
    MissingEmbedding(String),
    #[error("no test records")]
    NoRecords,
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

/// Umbrella error for the end-to-end training pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Records(#[from] RecordsError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}
