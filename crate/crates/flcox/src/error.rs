use thiserror::Error;

/// Errors surfaced by the smoothing, FPCA, fitting, and simulation layers.
#[derive(Debug, Error)]
pub enum FlcoxError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid must be strictly increasing with at least 4 points, got {0} points")]
    InvalidGrid(usize),

    #[error("n_basis ({n_basis}) must be >= order ({order}); the spline space is degenerate otherwise")]
    BasisTooSmall { n_basis: usize, order: usize },

    #[error("n_basis ({n_basis}) exceeds the number of grid points ({n_grid}); least squares is underdetermined")]
    BasisTooLarge { n_basis: usize, n_grid: usize },

    #[error("singular normal equations in curve smoothing: increase ridge or reduce n_basis")]
    SingularSmoothing,

    #[error("covariance estimation needs at least 2 curves, got {0}")]
    InsufficientSample(usize),

    #[error("non-finite values encountered in {0}")]
    NonFinite(&'static str),

    #[error("all eigenvalues are zero: degenerate data")]
    DegenerateSpectrum,

    #[error("no events in the data: the partial likelihood is empty")]
    NoEvents,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Hessian is not positive definite after ridge escalation: collinear design")]
    Collinear,

    #[error("Laplace K matrix is not positive definite")]
    LaplaceNotPd,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no comparable pairs: concordance index is undefined")]
    NoComparablePairs,

    #[error("csv parse error at row {row}, column {col}: {msg}")]
    CsvParse { row: usize, col: String, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FlcoxError>;
