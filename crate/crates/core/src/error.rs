use thiserror::Error;

use crate::propagator::TimeSeries;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("region outside grid")]
    RegionOutsideGrid,

    #[error("cannot renormalize null state")]
    NullState,

    #[error("probe at x = {0} is not strictly inside the grid")]
    ProbeOutsideGrid(f64),

    #[error("no metastable well for gamma = {0}")]
    NoMetastableWell(f64),

    #[error("degenerate barrier (height {0:e})")]
    DegenerateBarrier(f64),

    #[error("absorbing layer does not fit inside the grid: {0}")]
    LayerOutsideGrid(String),

    #[error("singular tridiagonal system at row {0}")]
    SingularSystem(usize),

    #[error("numerical blow-up at step {step}")]
    NumericalBlowUp { step: usize, partial: Box<TimeSeries> },

    #[error("imaginary-time relaxation did not converge after {steps} steps (last residual {residual:e})")]
    NotConverged { steps: usize, residual: f64 },

    #[error("{0}")]
    Analysis(String),

    #[error("measurement found particle outside")]
    ParticleOutside,

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
