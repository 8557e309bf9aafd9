use thiserror::Error;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("matrix input contains non-finite entries")]
    NonFinite,

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("moments became non-finite at kick {kick_index}")]
    Divergence { kick_index: u64 },

    #[error(
        "no stationary state: spectral radius of the cycle map is {spectral_radius} (must be < 1)"
    )]
    NoStationaryState { spectral_radius: f64 },

    #[error("non-physical moments (q={sigma_q}, qp={sigma_qp}, p={sigma_p}): {reason}")]
    NonPhysical {
        sigma_q: f64,
        sigma_qp: f64,
        sigma_p: f64,
        reason: &'static str,
    },

    #[error("time grid step {step:e} s is too coarse; at most {max_step:e} s is required")]
    GridTooCoarse { step: f64, max_step: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
