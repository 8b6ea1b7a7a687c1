use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("saturation {0} outside [0, 1]")]
    SaturationDomain(f64),

    #[error("capillary pressure {target} outside curve range [{min}, {max}]")]
    PressureRange { target: f64, min: f64, max: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("interface solve did not converge after {iterations} iterations (residual {residual:e})")]
    InterfaceSolve { iterations: usize, residual: f64 },

    #[error("degenerate interface derivative dR/dS = {0:e}")]
    DegenerateDerivative(f64),

    #[error("singular pivot in banded LU at row {0}")]
    SingularPivot(usize),

    #[error("newton failed to converge in {iterations} iterations (scaled residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("time step cut {cuts} consecutive times at t = {time:e} s")]
    TooManyCuts { cuts: usize, time: f64 },

    #[error("run aborted: {0}")]
    RunAborted(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
