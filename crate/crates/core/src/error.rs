use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("occupation {value} in channel {channel} exceeds the cutoff {cutoff}")]
    OccupationAboveCutoff { channel: usize, value: u8, cutoff: u8 },

    #[error("basis index {index} is out of range for dimension {dimension}")]
    IndexOutOfRange { index: usize, dimension: usize },

    #[error("expected {expected} channels, found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max |H - H^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parameter vector has length {found}, expected {expected}")]
    ParamLength { expected: usize, found: usize },

    #[error("circuit has no blocks")]
    EmptyCircuit,

    #[error("unknown layer tag `{0}`")]
    UnknownLayer(String),

    #[error("unknown target gate `{0}`")]
    UnknownTarget(String),

    #[error("non-finite {what} at evaluation {evaluation}")]
    NonFinite { what: &'static str, evaluation: usize },

    #[error("all {} restarts aborted: {}", .0.len(), .0.join("; "))]
    AllRestartsAborted(Vec<String>),

    #[error("integration step {step:e} underflowed in sector {sector} at local time {time}")]
    StepUnderflow { sector: usize, time: f64, step: f64 },

    #[error("target state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("{0}")]
    Domain(String),
}
