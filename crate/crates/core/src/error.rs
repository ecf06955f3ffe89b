use thiserror::Error;

/// Errors raised by the process-matrix toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |M - M^dagger| = {deviation:e} exceeds tolerance {tolerance:e}")]
    NonHermitian { deviation: f64, tolerance: f64 },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("subsystem index {index} out of range for {len} subsystems")]
    SubsystemOutOfRange { index: usize, len: usize },

    #[error("basis index {index} out of range for dimension {dim} (at subsystem {subsystem})")]
    BasisIndexOutOfRange { subsystem: usize, index: usize, dim: usize },

    #[error("not a permutation of 0..{len}: {perm:?}")]
    NotAPermutation { perm: Vec<usize>, len: usize },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid party layout: {0}")]
    InvalidLayout(String),

    #[error("unknown party `{0}`")]
    UnknownParty(String),

    #[error("term has {found} basis indices but the layout has {expected} subsystems")]
    TermLength { expected: usize, found: usize },

    #[error("party pairing mismatch: {0}")]
    PairingMismatch(String),

    #[error("keep-set splits party `{party}` sub-party {subparty}: its {kept} is kept but its {dropped} is not")]
    SplitInputOutput {
        party: String,
        subparty: usize,
        kept: &'static str,
        dropped: &'static str,
    },

    #[error("expected a two-party process, found {0} parties")]
    NotBipartite(usize),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("eigenvalue computation failed to converge")]
    EigenFailure,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
