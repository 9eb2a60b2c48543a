use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "explicit scheme unstable: alpha*dt/h^2 = {ratio:.6} exceeds {bound:.6}; \
         substep must be <= {max_substep_seconds:.6e} s"
    )]
    Cfl {
        ratio: f64,
        bound: f64,
        max_substep_seconds: f64,
    },

    #[error("numerical failure at timestep {timestep}: non-finite temperature in voxel {voxel}")]
    NumericalFailure { timestep: usize, voxel: usize },

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("temperature undefined for voxel {voxel} at timestep {timestep}")]
    InactiveTarget { voxel: usize, timestep: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("non-finite target in row {row}")]
    NonFiniteTarget { row: usize },

    #[error("feature vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("normal matrix is singular (pivot {pivot}); use Ridge regression instead")]
    SingularMatrix { pivot: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("schedule covers timesteps 0..={available}, forecast needs 0..={required}")]
    ScheduleTooShort { required: usize, available: usize },

    #[error("stage {stage}: {source}")]
    Stage { stage: usize, source: Box<Error> },
}
