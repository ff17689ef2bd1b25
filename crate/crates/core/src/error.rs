//! Error types, one enum per subsystem.

use thiserror::Error;

/// Clip ingestion and domain-type construction.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invariant violated{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Invariant { row: Option<usize>, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ModelError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        ModelError::Parse { line, message: message.into() }
    }

    pub(crate) fn invariant(row: Option<usize>, message: impl Into<String>) -> Self {
        ModelError::Invariant { row, message: message.into() }
    }
}

/// Subtitle text that does not follow the single-line template.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct FormatError {
    pub line: usize,
    pub reason: String,
}

impl FormatError {
    pub(crate) fn new(line: usize, reason: impl Into<String>) -> Self {
        Self { line, reason: reason.into() }
    }
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("region vertex set is empty")]
    EmptyRegion,
    #[error("vertex index {0} is out of range")]
    VertexOutOfRange(usize),
    #[error("series too short: need at least 3 frames, got {0}")]
    TooShort(usize),
    #[error("series length mismatch: velocity has {velocity}, AU has {au}")]
    LengthMismatch { velocity: usize, au: usize },
    #[error("threshold tau must lie in (0, 1), got {0}")]
    InvalidTau(f64),
    #[error("|au_delta| = {0} does not exceed the slight-change threshold 0.25")]
    BelowThreshold(f64),
    #[error("vocabulary: {0}")]
    Vocabulary(String),
    #[error("region config: {0}")]
    RegionConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum IntensityError {
    #[error("selection is empty")]
    EmptySelection,
    #[error("landmark index {0} is out of range")]
    OutOfRange(usize),
    #[error("normalization needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("ragged amplitude matrix: row {row} has {got} columns, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
}

#[derive(Debug, Error)]
pub enum AcousticError {
    #[error("percentiles of an empty list are undefined")]
    EmptyInput,
    #[error("invalid thresholds: p25 {p25} > p75 {p75}")]
    InvalidThresholds { p25: f64, p75: f64 },
    #[error("rate is undefined for a line of zero or negative duration")]
    DivisionByZero,
    #[error("pitch must be positive when present, got {0}")]
    InvalidPitch(f64),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding provider failed: {0}")]
    Provider(String),
    #[error("embedding has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("embedding is zero or not finite")]
    Degenerate,
}

#[derive(Debug, Error)]
pub enum AgraError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("weights must be non-negative and sum to 1, got alpha={alpha}, beta={beta}")]
    InvalidWeights { alpha: f64, beta: f64 },
    #[error("query is empty")]
    EmptyQuery,
    #[error("embedder error on entry {entry}: {source}")]
    Embedder { entry: usize, source: EmbedError },
    #[error("query embedding has dimension {got}, index has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("llm request failed: {0}")]
    Request(String),
    #[error("llm response malformed: {0}")]
    Response(String),
    #[error("llm script exhausted after {0} calls")]
    ScriptExhausted(usize),
    #[error("missing API key: environment variable {0} is not set")]
    MissingKey(String),
}

#[derive(Debug, Error)]
pub enum SingCotError {
    #[error("max_rounds must be at least 1")]
    InvalidRounds,
    #[error("session has no lyric lines")]
    EmptySession,
    #[error("lyrics and descriptors differ in length ({lyrics} vs {descriptors})")]
    Misaligned { lyrics: usize, descriptors: usize },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Retrieval(#[from] AgraError),
    #[error("template error: {0}")]
    Template(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("DegenerateInput: {0}")]
    DegenerateInput(String),
    #[error("NoBeats: no music beat falls inside the clip")]
    NoBeats,
    #[error("sequence needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("vertex index {0} is out of range")]
    IndexOutOfRange(usize),
}

#[derive(Debug, Error)]
pub enum GenMathError {
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("interval [{start}, {end}) is invalid for a timeline of length {len}")]
    BadInterval { start: usize, end: usize, len: usize },
    #[error("positional offset {offset} exceeds the table size {max}")]
    OffsetTooLarge { offset: usize, max: usize },
    #[error("beta must lie in [0, 1], got {0}")]
    InvalidBeta(f64),
    #[error("sequence too short: need {needed} steps, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("gradient magnitudes must be finite and non-negative, got {0}")]
    InvalidGradient(f64),
    #[error("weight file: {0}")]
    WeightFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
