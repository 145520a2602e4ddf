use thiserror::Error;

/// Errors raised by the exact engines, the sampler, and the run orchestration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("hamiltonian is not Hermitian (max |H - H^dagger| = {deviation:e})")]
    NonHermitian { deviation: f64 },

    #[error(
        "transfer matrices do not commute (residual {residual:e}); \
         no time-independent eigenbasis exists, use the Monte Carlo sampler instead"
    )]
    NonCommutingFamily { residual: f64 },

    #[error("common eigenbasis fails to reconstruct the transfer matrices (residual {residual:e})")]
    SpectralMismatch { residual: f64 },

    #[error("volterra step too large: gamma*h = {product} >= 1, try h <= {suggested:e}")]
    StepTooLarge { product: f64, suggested: f64 },

    #[error("time {time} is not a node of the grid with step {step}")]
    TimeOffGrid { time: f64, step: f64 },

    #[error("negative probability mass {mass:e} deposited at x = {location}")]
    NegativeWeight { location: f64, mass: f64 },

    #[error("imaginary residue {residue:e} after summing over transfer eigenmodes")]
    ImaginaryResidue { residue: f64 },

    #[error("negative click mass {mass:e} at site {site}")]
    NegativeMass { site: i64, mass: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("density matrix trace drifted by {drift:e}")]
    TraceDrift { drift: f64 },

    #[error("lindblad step {dt:e} exceeds the stability bound {bound:e}")]
    LindbladStepTooLarge { dt: f64, bound: f64 },

    #[error("stationary distribution is undefined at zero measurement rate")]
    StationaryUndefinedAtZeroRate,

    #[error("moment order {0} is not supported by the finite-difference stencil")]
    UnsupportedMomentOrder(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True when the error is a numerical guard tripping rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonCommutingFamily { .. }
                | Error::SpectralMismatch { .. }
                | Error::NegativeWeight { .. }
                | Error::ImaginaryResidue { .. }
                | Error::NegativeMass { .. }
                | Error::TraceDrift { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
