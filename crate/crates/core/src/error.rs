//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by graph construction, filter banks, scattering,
/// training, and dataset ingestion.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("edge ({i}, {j}) has non-positive weight {w}")]
    NonPositiveWeight { i: usize, j: usize, w: f64 },
    #[error("duplicate undirected edge ({i}, {j})")]
    DuplicateEdge { i: usize, j: usize },
    #[error("self-loop edge ({i}, {i}) is not allowed in the edge list")]
    SelfLoopEdge { i: usize },
    #[error("node {i} is isolated and the isolated-node policy is `reject`")]
    IsolatedNode { i: usize },
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("graph with {n} nodes exceeds the dense-oracle cap {cap}")]
    GraphTooLargeForDenseOracle { n: usize, cap: usize },
    #[error("scale {scale} exceeds cascade depth {m}")]
    ScaleExceedsCascade { scale: usize, m: usize },
    #[error("invalid scale pair (t1 = {t1}, tj = {tj}): need 1 <= t1 <= tj")]
    InvalidScales { t1: usize, tj: usize },
    #[error("scattering order {order} unsupported (must be 1, 2, or 3)")]
    UnsupportedOrder { order: usize },
    #[error("path index {index} out of range for a bank with {j} wavelets")]
    PathIndexOutOfRange { index: usize, j: usize },
    #[error("non-finite parameter at position {position}")]
    NonFiniteParameter { position: usize },
    #[error("invalid selection shape: J = {j}, m = {m}")]
    InvalidShape { j: usize, m: usize },
    #[error("shape mismatch: {context} (expected {expected}, got {got})")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("backward pass requires a forward trace; run the transform with gradient retention")]
    MissingCache,
    #[error("anchor initialization needs at least {needed} rows, got {got}")]
    BatchTooSmall { needed: usize, got: usize },
    #[error("anchors are already initialized")]
    AlreadyInitialized,
    #[error("anchors are not initialized")]
    AnchorsNotInitialized,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite gradient at position {position}")]
    NonFiniteGradient { position: usize },
    #[error("empty {split} split")]
    EmptySplit { split: &'static str },
    #[error("dataset of size {size} too small for {folds}-fold cross-validation")]
    DatasetTooSmall { size: usize, folds: usize },
    #[error("length mismatch: {context} ({a} vs {b})")]
    LengthMismatch {
        context: &'static str,
        a: usize,
        b: usize,
    },
    #[error("parse error in {file} at line {line}: {message}")]
    ParseError {
        file: String,
        line: usize,
        message: String,
    },
    #[error("graph indicator is inconsistent: {message}")]
    InconsistentIndicator { message: String },
    #[error("edge list is not symmetric: directed pair ({i}, {j}) has no reverse")]
    AsymmetricEdgeList { i: usize, j: usize },
    #[error("invalid size range [{lo}, {hi}] (need 4 <= lo <= hi)")]
    InvalidSizeRange { lo: usize, hi: usize },
    #[error("regression target dimension {dim} has zero variance")]
    ZeroVarianceTarget { dim: usize },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
