use thiserror::Error;

/// Errors raised by the discretization, solvers and optimizer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported refinement level {0} (supported: 1..=8)")]
    UnsupportedLevel(u32),

    #[error("control region is not aligned with the mesh: {0}")]
    MisalignedRegion(String),

    #[error("quadrature order {0} out of range (supported: 1..=12)")]
    QuadratureOrder(usize),

    #[error("non-finite source value at quadrature point ({x}, {y}) of cell {cell}")]
    NonFiniteSource { cell: usize, x: f64, y: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sparse factorization failed at pivot stage {stage}: {reason}")]
    SingularMatrix { stage: usize, reason: String },

    #[error("Newton iteration did not converge in {iterations} steps (residual history {history:?})")]
    NewtonDiverged { iterations: usize, history: Vec<f64> },

    #[error("linearized operator is singular at the current state: {0}")]
    SingularLinearization(String),

    #[error(
        "active-set iteration did not converge in {iterations} outer steps \
         (last max change {last_change:.3e}, active-set sizes {active_history:?})"
    )]
    PdasDiverged {
        iterations: usize,
        last_change: f64,
        active_history: Vec<(usize, usize)>,
    },

    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    #[error("point ({0}, {1}) lies outside the control region")]
    OutsideControlRegion(f64, f64),

    #[error("jet domain error: {0}")]
    JetDomain(String),

    #[error("no sign change of the root residual on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("level {level}: {source}")]
    AtLevel {
        level: u32,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
