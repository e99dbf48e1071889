use thiserror::Error;

pub type Result<T> = std::result::Result<T, NschError>;

#[derive(Debug, Error)]
pub enum NschError {
    #[error("iterative solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("right-hand side is not compatible with the Neumann problem: mean {mean:e}, max norm {norm:e}")]
    IncompatibleRhs { mean: f64, norm: f64 },

    #[error("argument {0} lies outside the open interval (-1, 1)")]
    SingularArgument(f64),

    #[error("gradient coefficient a({s}) = {value} is below the lower bound c0 = {c0}")]
    CoefficientBelowBound { s: f64, value: f64, c0: f64 },

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("time step {dt:e} exceeds the stability bound {bound:e} of the {what}")]
    StabilityViolation { dt: f64, bound: f64, what: &'static str },

    #[error("mismatched grids or configurations: {0}")]
    MismatchedGrids(String),

    #[error("snapshot format version mismatch: found {0:?}")]
    FormatVersionMismatch(Vec<u8>),

    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),

    #[error("malformed series file: {0}")]
    MalformedSeries(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<NschError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NschError {
    /// Strips any step annotation.
    pub fn root(&self) -> &NschError {
        match self {
            NschError::AtStep { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self.root(),
            NschError::NonConvergence { .. }
                | NschError::IncompatibleRhs { .. }
                | NschError::NonFinite(_)
                | NschError::StabilityViolation { .. }
                | NschError::SingularArgument(_)
        )
    }
}
