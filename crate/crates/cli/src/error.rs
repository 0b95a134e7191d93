use std::fmt;
use std::process::ExitCode;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag combinations (exit 2).
    Usage(String),
    /// Unreadable, malformed or out-of-range input (exit 3).
    Data(String),
    /// Solver, feasibility or quadrature failure (exit 4).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Usage(_) => 2,
            Self::Data(_) => 3,
            Self::Numerical(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
            Self::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<sgm_core::Error> for CliError {
    fn from(e: sgm_core::Error) -> Self {
        use sgm_core::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidArgument(_) => Self::Usage(msg),
            E::InvalidFrequencySet(_)
            | E::DimensionMismatch { .. }
            | E::ConstantColumn { .. }
            | E::EmptyData(_)
            | E::OutOfUnitCube { .. } => Self::Data(msg),
            E::IndefiniteHessian { .. }
            | E::NotPositiveDefinite
            | E::Domain { .. }
            | E::ResourceCap { .. }
            | E::InfeasibleStart { .. }
            | E::LineSearchFailure { .. }
            | E::BoundViolation { .. } => Self::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
