use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (asymmetry {residual:e} relative to norm {norm:e})")]
    Asymmetric { residual: f64, norm: f64 },

    #[error("rows are not unit-normalized (row {row} has norm {norm})")]
    NotNormalized { row: usize, norm: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("zero-norm vector for word {word:?}")]
    ZeroNorm { word: String },

    #[error("word {word:?} is not in the vocabulary")]
    UnknownWord { word: String },

    #[error("graph needs at least 2 nodes, got {found}")]
    TooFewNodes { found: usize },

    #[error("graph {which} has an all-zero Laplacian spectrum")]
    ZeroSpectrum { which: &'static str },

    #[error("graph has {nodes} nodes, above the isomorphism ceiling of {limit}")]
    GraphTooLarge { nodes: usize, limit: usize },

    #[error("insufficient in-vocabulary pairs: need {required}, have {available}")]
    InsufficientPairs { required: usize, available: usize },

    #[error("empty seed dictionary: {0}")]
    EmptySeed(String),

    #[error("mutual nearest-neighbour dictionary is empty{}", iteration.map(|i| format!(" at refinement iteration {i}")).unwrap_or_default())]
    EmptyDictionary { iteration: Option<usize> },

    #[error("adversarial training diverged at epoch {epoch}: {message}")]
    Divergence { epoch: usize, message: String },

    #[error("no evaluable queries: {0}")]
    NoEvaluableQueries(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
