use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { position: usize, name: String },

    #[error("expression `{expr}` is not finite at node ({x1}, {x2})")]
    NotFinite { expr: String, x1: f64, x2: f64 },

    #[error("bound violated by {name} = `{expr}`: value {value} at node ({x1}, {x2}) outside [{lower}, {upper}]")]
    BoundViolation {
        name: &'static str,
        expr: String,
        value: f64,
        x1: f64,
        x2: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular weight: {0}")]
    SingularWeight(String),

    #[error("under-resolved probe: frequency {frequency:.4} on spacing {max_spacing:.3e} needs at least {required_nodes} nodes along an axis of length {extent}")]
    UnderResolved {
        frequency: f64,
        max_spacing: f64,
        required_nodes: usize,
        extent: f64,
    },

    #[error("finite-difference step {0} outside the stable bracket")]
    UnstableStep(f64),

    #[error("extrapolation failed: {0}")]
    Extrapolation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Process exit status for configuration problems.
pub const EXIT_CONFIG: i32 = 1;
/// Process exit status for solver failures.
pub const EXIT_SOLVER: i32 = 2;
/// Process exit status for extrapolation failures.
pub const EXIT_EXTRAPOLATION: i32 = 3;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } | Error::SingularWeight(_) | Error::UnstableStep(_) => {
                EXIT_SOLVER
            }
            Error::Extrapolation(_) => EXIT_EXTRAPOLATION,
            _ => EXIT_CONFIG,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateGrid(_) => "degenerate-grid",
            Error::Syntax { .. } => "syntax",
            Error::UnknownIdentifier { .. } => "unknown-identifier",
            Error::NotFinite { .. } => "not-finite",
            Error::BoundViolation { .. } => "bound-violation",
            Error::InvalidInput(_) => "invalid-input",
            Error::NonConvergence { .. } => "non-convergence",
            Error::SingularWeight(_) => "singular-weight",
            Error::UnderResolved { .. } => "under-resolved",
            Error::UnstableStep(_) => "unstable-step",
            Error::Extrapolation(_) => "extrapolation",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
