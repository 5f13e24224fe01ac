use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "chain of {n_sites} sites with local dimension {local_dim} needs {amplitudes} amplitudes, \
         above the cap of {cap}; reduce the number of sites"
    )]
    MemoryCap {
        n_sites: usize,
        local_dim: usize,
        amplitudes: u128,
        cap: usize,
    },

    #[error("invalid chain shape: {0}")]
    InvalidShape(String),

    #[error("vector is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("site {site} out of range for a chain of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("operator is not unitary (residual {residual:e})")]
    NotUnitary { residual: f64 },

    #[error("operator is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("invalid level partition: {0}")]
    InvalidPartition(String),

    #[error("invalid static-layer parameters: {0}")]
    InvalidParams(String),

    #[error("invalid kick: {0}")]
    InvalidKick(String),

    #[error("eigenphase {phase} lies at the principal-log branch cut; reduce epsilon")]
    BranchCut { phase: f64 },

    #[error("carrier conjugation does not close with order {order}")]
    ConjugationOrder { order: usize },

    #[error("probe does not carry charge {charge} under the carrier (residual {residual:e})")]
    ProbeCharge { charge: usize, residual: f64 },

    #[error("record too short: {0} samples (need at least 2)")]
    TooShort(usize),

    #[error("spectral window [{lo}, {hi}] does not fit in {n} bins")]
    WindowOutOfRange { lo: i64, hi: i64, n: usize },

    #[error("dense dimension {dim} exceeds the cap of {cap}; reduce the number of sites")]
    DenseCap { dim: usize, cap: usize },

    #[error("degenerate fit grid: {0}")]
    DegenerateGrid(String),

    #[error("invalid baseline mapping: {0}")]
    InvalidBaseline(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear algebra failure: {0}")]
    LinAlg(String),
}

pub type Result<T> = std::result::Result<T, Error>;
