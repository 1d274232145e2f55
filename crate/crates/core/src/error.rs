use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spin index {index} out of range for a register of {len} spins")]
    SpinOutOfRange { index: usize, len: usize },
    #[error("spin {0} is not an electron")]
    NotElectron(usize),
    #[error("spin {0} is not a nucleus")]
    NotNucleus(usize),
    #[error("J_z = {0} is not attainable in this register")]
    UnattainableJz(f64),
    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("operator is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("target site {0} is occupied")]
    TargetOccupied(usize),
    #[error("electron {0} has an active coupling and cannot be shuttled")]
    ElectronCoupled(usize),
    #[error("angle {angle} rad is not a multiple of the {step} rad grid")]
    OffGrid { angle: f64, step: f64 },
    #[error("invalid bit train: {0}")]
    InvalidTrain(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no shuttle plan: {0}")]
    ShuttlePlan(String),
    #[error("logical basis is not orthonormal (deviation {0:e})")]
    NonOrthonormalBasis(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
