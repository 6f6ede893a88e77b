use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("index out of range: {0}")]
    Range(String),

    #[error("invalid impulse placement: {0}")]
    Placement(String),

    #[error("operator size: {0}")]
    Size(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("unsupported geometry: {0}")]
    Geometry(String),

    #[error("cannot normalize: {0}")]
    Normalization(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error(
        "recovery infeasible: need a p grid point above {required_p:.4}, largest available is {max_p:.4}"
    )]
    RecoveryInfeasible { required_p: f64, max_p: f64 },

    #[error("operator is not Hermitian: {0}")]
    Hermiticity(String),

    #[error("relative phase is not real: {0}")]
    ComplexPhase(String),

    #[error("indeterminate sign: plus={plus:.6e} minus={minus:.6e} floor={floor:.6e}")]
    IndeterminateSign { plus: f64, minus: f64, floor: f64 },

    #[error("offset: {0}")]
    Offset(String),

    #[error("dimension {dim} exceeds the dense/Krylov oracle cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for configuration problems,
    /// 3 for numerical infeasibility.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::RecoveryInfeasible { .. }
            | Error::IndeterminateSign { .. }
            | Error::ComplexPhase(_)
            | Error::DimensionCap { .. }
            | Error::Hermiticity(_) => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
