//! Error types for every stage of the localization pipeline.

use thiserror::Error;

/// Errors from the dense linear-algebra primitives.
#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix dimensions must be at least 1x1")]
    Empty,
    #[error(
        "Gram matrix is singular or ill-conditioned (condition number {cond:.3e} exceeds cap {cap:.0e})"
    )]
    IllConditioned { cond: f64, cap: f64 },
    #[error("conformation must be 3xN with N >= {min}, got {rows}x{cols}")]
    BadConformation { rows: usize, cols: usize, min: usize },
}

/// Errors raised while constructing scenes or parsing scenario files.
#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scenario field `{field}`: {reason}")]
    BadScenario { field: &'static str, reason: String },
    #[error("point sets must both have 3 rows, got {left} and {right}")]
    RowCountMismatch { left: usize, right: usize },
}

/// Errors from measurement synthesis and distance-matrix completion.
#[derive(Debug, Error)]
pub enum MeasureError {
    #[error(
        "known intra-body block is singular or ill-conditioned (condition number {cond:.3e}); \
         this completion needs an invertible block -- consider an alternative matrix-completion method"
    )]
    IllConditionedBlock { cond: f64 },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
}

/// Errors from the embedding and alignment steps.
#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("input must be a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error(
        "degenerate geometry: the dissimilarities admit no {dim}-dimensional embedding ({reason})"
    )]
    DegenerateGeometry { dim: usize, reason: String },
    #[error("registration is ambiguous: cross-covariance is rank deficient (sv ratio {ratio:.3e})")]
    AmbiguousRegistration { ratio: f64 },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
}

/// Pipeline stage names, used to tag estimator failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Completion,
    Mds,
    Anchoring,
    Translation,
    Rotation,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Completion => "completion",
            Stage::Mds => "mds",
            Stage::Anchoring => "anchoring",
            Stage::Translation => "translation",
            Stage::Rotation => "rotation",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Underlying cause of a pipeline stage failure.
#[derive(Debug, Error)]
pub enum StageFailure {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("body {body} conformation is rank deficient: {source}")]
    Conformation {
        body: u8,
        #[source]
        source: MatrixError,
    },
}

/// An estimator failure tagged with the stage that produced it.
#[derive(Debug, Error)]
#[error("{stage} stage: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageFailure,
}

impl PipelineError {
    pub fn new(stage: Stage, source: impl Into<StageFailure>) -> Self {
        Self {
            stage,
            source: source.into(),
        }
    }
}

/// Errors from matrix CSV serialization.
#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: cannot parse `{token}` as a number")]
    BadNumber { line: usize, token: String },
    #[error("line {line}: expected {expected} fields, got {got}")]
    RaggedRow {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("input contains no rows")]
    EmptyInput,
}

/// Errors from experiment configuration and execution.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    BadConfig(String),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("RMSE of an empty estimate list is undefined")]
    EmptyEstimates,
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Umbrella error for callers that drive the whole crate surface.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}
