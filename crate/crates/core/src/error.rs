use thiserror::Error;

/// Errors raised by state, layer and operator constructions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid particle spec: {0}")]
    InvalidSpec(String),
    #[error("empty factor sequence")]
    EmptyFactors,
    #[error("invalid gauge element: {0}")]
    InvalidGauge(String),
    #[error("layers are not collinear")]
    NotCollinear,
    #[error("sector mismatch: {0}")]
    SectorMismatch(String),
    #[error("symmetrization requires identical particle specs")]
    HeterogeneousSpecs,
    #[error("wrong symmetry tag for statistics: {0}")]
    WrongSymmetry(String),
    #[error("dimension {dim} exceeds cap {cap}")]
    CapExceeded { dim: usize, cap: usize },
    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },
    #[error("zero state cannot be measured")]
    ZeroState,
    #[error("invalid time step: {0}")]
    InvalidTimeStep(String),
    #[error("invalid slots: {0}")]
    InvalidSlots(String),
    #[error("region contains foreign site {0}")]
    ForeignSite(usize),
    #[error("gauge tags differ: {0:?} vs {1:?}")]
    GaugeMismatch(String, String),
    #[error("invalid partition: {0}")]
    PartitionError(String),
    #[error("amplitude conflict for layer {0}")]
    AmplitudeConflict(usize),
    #[error("layer record mismatch: {0}")]
    RecordMismatch(String),
    #[error("glued layer {0} is not in canonical form")]
    NotCanonical(usize),
    #[error("occupation {occupation} exceeds cutoff {cutoff}")]
    OverCutoff { occupation: usize, cutoff: usize },
    #[error("invalid mode: {0}")]
    InvalidMode(String),
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
