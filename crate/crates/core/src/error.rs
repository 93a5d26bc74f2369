use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("singular matrix")]
    Singular,
    #[error("not a symplectic similitude: {0}")]
    NotSimilitude(String),
    #[error("similitude factor is not a power of p: {0}")]
    SimilitudeNotPrimePower(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("unsupported regime: {0}")]
    Unsupported(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("nonzero remainder in character division: {0}")]
    CharacterDivision(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code under the CLI contract: unsupported-regime errors exit 2,
    /// everything else exits 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Unsupported(_) => 2,
            _ => 1,
        }
    }
}
