use thiserror::Error;

/// (location, variable, time-slice) index of a panel entry.
pub type PanelIndex = (usize, usize, usize);

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("panel contains {} exact zero value(s), first at (location, variable, time) = {:?}", .0.len(), .0.first())]
    ZeroValue(Vec<PanelIndex>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid spatial weights: {0}")]
    InvalidWeights(String),

    #[error("S = I - Psi' (x) W is numerically singular (min |1 - lambda*mu| = {0:e})")]
    SingularJacobian(f64),

    #[error("process is not stable: spectral radius {radius} (S invertible: {s_invertible})")]
    Unstable { radius: f64, s_invertible: bool },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate record for key {0}")]
    DuplicateKey(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
