use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PolyxError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PolyxError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate hyperplane: normal norm {norm:e} is below 1e-12")]
    DegenerateHyperplane { norm: f64 },

    #[error("empty polyhedron")]
    EmptyPolyhedron,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("normals are linearly dependent at hyperplane index {index}")]
    LinearDependence { index: usize },

    #[error("search budget exceeded after {nodes} recursion nodes")]
    BudgetExceeded { nodes: u64 },

    #[error("solve exceeded its time budget after {nodes} recursion nodes")]
    Timeout { nodes: u64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),

    #[error("endmembers linearly dependent (condition number {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("class {0} is empty")]
    EmptyClass(usize),

    #[error("coincident centroids {0} and {1}")]
    CoincidentCentroids(usize, usize),

    #[error("enumeration guard exceeded: {subsets} subsets > {limit}")]
    GuardExceeded { subsets: u128, limit: u128 },

    #[error("polyhedron generation failed for n={n}, k={k} after {attempts} attempts")]
    GenerationFailed { n: usize, k: usize, attempts: usize },

    #[error("data length mismatch: expected {expected} bytes, found {found}")]
    LengthMismatch { expected: u64, found: u64 },

    #[error("unknown dtype {0:?}")]
    UnknownDtype(String),

    #[error("malformed {kind}: {message}")]
    Format { kind: &'static str, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PolyxError {
    /// Stable machine-readable category, used by the CLI and the C ABI.
    pub fn category(&self) -> &'static str {
        match self {
            PolyxError::DimensionMismatch { .. } => "dimension_mismatch",
            PolyxError::DegenerateHyperplane { .. } => "degenerate_hyperplane",
            PolyxError::EmptyPolyhedron => "empty_polyhedron",
            PolyxError::NonFinite(_) => "non_finite",
            PolyxError::Precondition(_) => "precondition",
            PolyxError::LinearDependence { .. } => "linear_dependence",
            PolyxError::BudgetExceeded { .. } => "budget_exceeded",
            PolyxError::Timeout { .. } => "timeout",
            PolyxError::InvalidInput(_) => "invalid_input",
            PolyxError::IllConditioned(_) => "ill_conditioned",
            PolyxError::RankDeficient { .. } => "rank_deficient",
            PolyxError::EmptyClass(_) => "empty_class",
            PolyxError::CoincidentCentroids(..) => "coincident_centroids",
            PolyxError::GuardExceeded { .. } => "guard_exceeded",
            PolyxError::GenerationFailed { .. } => "generation_failed",
            PolyxError::LengthMismatch { .. } => "length_mismatch",
            PolyxError::UnknownDtype(_) => "unknown_dtype",
            PolyxError::Format { .. } => "format",
            PolyxError::Io { .. } => "io",
        }
    }

    /// Process exit code for the CLI; zero is reserved for success.
    pub fn exit_code(&self) -> i32 {
        match self {
            PolyxError::InvalidInput(_)
            | PolyxError::DimensionMismatch { .. }
            | PolyxError::NonFinite(_)
            | PolyxError::DegenerateHyperplane { .. } => 2,
            PolyxError::Io { .. } => 3,
            PolyxError::Format { .. } => 4,
            PolyxError::LengthMismatch { .. } => 5,
            PolyxError::UnknownDtype(_) => 6,
            PolyxError::EmptyPolyhedron | PolyxError::EmptyClass(_) => 7,
            PolyxError::BudgetExceeded { .. } | PolyxError::Timeout { .. } => 8,
            PolyxError::RankDeficient { .. } | PolyxError::IllConditioned(_) => 9,
            _ => 10,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PolyxError::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(PolyxError::NonFinite(what))
    }
}

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(PolyxError::DimensionMismatch { expected, found })
    }
}
