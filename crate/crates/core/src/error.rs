use thiserror::Error;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid involution: {0}")]
    Involution(String),
    #[error("invalid context: {0}")]
    Context(String),
    #[error("ad(a) is not invertible on the perp space (condition {0:.3e})")]
    NonRegular(f64),
    #[error("not an exact x-derivative: {0}")]
    NotExact(String),
    #[error("derivative order {0} exceeds the declared maximum {1}")]
    OrderExceeded(u32, u32),
    #[error("missing jet assignment for {0}")]
    MissingJet(String),
    #[error("sample set not closed under {0}")]
    NotClosed(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("flatness gate violated: residual {residual:.3e} > gate {gate:.3e}")]
    FlatnessGate { residual: f64, gate: f64 },
    #[error("integration became unstable: {0}")]
    Unstable(String),
    #[error("unknown equation tag `{0}`")]
    UnknownTag(String),
    #[error("invalid dressing: {0}")]
    Dressing(String),
    #[error("degenerate span at pole image (norm {0:.3e})")]
    DegenerateSpan(f64),
    #[error("aliasing: discarded Fourier tail {tail:.3e} exceeds {tol:.3e}")]
    Aliasing { tail: f64, tol: f64 },
    #[error("outside the big cell: Toeplitz condition {0:.3e}")]
    BigCell(f64),
    #[error("loop is singular on the circle (min |det| {0:.3e})")]
    SingularLoop(f64),
    #[error("factorization failed at grid point ({ix}, {it}): {reason}")]
    GridPointFailure { ix: usize, it: usize, reason: String },
    #[error("window overflow: mass {0:.3e} outside the buffer")]
    WindowOverflow(f64),
    #[error("invalid initial data: {0}")]
    InvalidData(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
