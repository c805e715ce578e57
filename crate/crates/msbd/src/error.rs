use crate::fourier::Lattice;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("lattice mismatch: {0} vs {1}")]
    LatticeMismatch(Lattice, Lattice),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("rank-deficient observations: zero energy in frequency bin {bin}")]
    RankDeficient { bin: usize },

    #[error("non-invertible iterate: spectral bin {bin} has magnitude {magnitude:.3e}, below {floor:.3e}")]
    NonInvertibleIterate {
        bin: usize,
        magnitude: f64,
        floor: f64,
    },

    #[error("iterate is not unit-norm: |‖h‖ - 1| = {deviation:.3e}")]
    NotUnitNorm { deviation: f64 },

    #[error("direction is not tangent: |<z,h>| = {inner:.3e} exceeds 1e-8·‖z‖ = {bound:.3e}")]
    NotTangent { inner: f64, bound: f64 },

    #[error("stationary-point enumeration budget exceeded: {count} points requested, cap is {cap}")]
    BudgetExceeded { count: u128, cap: u128 },

    #[error("imaginary residual {residual:.3e} exceeds {bound:.3e} in real inverse transform")]
    ImaginaryResidual { residual: f64, bound: f64 },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
