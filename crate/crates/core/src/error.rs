use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// `j + m` is not an integer, or `j` is negative.
    #[error("malformed angular momentum pair (2j = {twice_j}, 2m = {twice_m})")]
    MalformedHalfInt { twice_j: i32, twice_m: i32 },

    #[error("{what} index {index} out of range (allowed {allowed})")]
    IndexOutOfRange {
        what: &'static str,
        index: i64,
        allowed: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("coherent-state truncation tail {tail:.3e} exceeds tolerance {tol:.3e}")]
    TruncationTail { tail: f64, tol: f64 },

    #[error("rate `{rate}` has a pole at t = {t} (pole estimate {pole_estimate})")]
    RatePole {
        rate: &'static str,
        t: f64,
        pole_estimate: f64,
    },

    #[error("trace drift {drift:.3e} at t = {t} exceeds tolerance {tol:.3e}")]
    TraceDrift { t: f64, drift: f64, tol: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("population {population:.3e} of the top Fock levels exceeds {tol:.3e}")]
    FockTail { population: f64, tol: f64 },

    #[error("{quantity} undefined: photon number {photon_number:.3e} below threshold {threshold:.1e}")]
    Undefined {
        quantity: &'static str,
        photon_number: f64,
        threshold: f64,
    },

    #[error("imaginary residue {residue:.3e} in {quantity} exceeds {tol:.1e}")]
    ImaginaryResidue {
        quantity: &'static str,
        residue: f64,
        tol: f64,
    },
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical integration itself, as opposed to
    /// invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RatePole { .. }
                | Error::TraceDrift { .. }
                | Error::NonFinite { .. }
                | Error::FockTail { .. }
                | Error::Undefined { .. }
                | Error::ImaginaryResidue { .. }
                | Error::TruncationTail { .. }
        )
    }
}
