use thiserror::Error;

/// Errors produced by the power-profile models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("band plan is not contiguous: band `{previous}` ends at {end} THz but `{next}` starts at {start} THz")]
    NonContiguousBands {
        previous: String,
        end: f64,
        next: String,
        start: f64,
    },

    #[error("band `{band}` width {width} THz is not an integer multiple of the {spacing} THz channel spacing")]
    BandNotMultiple {
        band: String,
        width: f64,
        spacing: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported unit conversion from {from} to {to}")]
    UnsupportedConversion {
        from: &'static str,
        to: &'static str,
    },

    #[error("negative frequency separation {0} THz; order the channel pair before querying the Raman gain")]
    NegativeSeparation(f64),

    #[error("frequency {value} THz lies outside the tabulated support [{low}, {high}] THz")]
    OutOfSupport { value: f64, low: f64, high: f64 },

    #[error("total power is zero; the spectrum carries no signal")]
    ZeroTotalPower,

    #[error("approximation order must be a positive integer")]
    InvalidOrder,

    #[error(
        "Raman slope is zero; the reference shaping value is undefined on the Raman-free path"
    )]
    RamanFree,

    #[error("position {z} km is outside the span [0, {length}] km")]
    PositionOutOfRange { z: f64, length: f64 },

    #[error("spectrum has {got} channels but the grid has {expected}")]
    GridMismatch { expected: usize, got: usize },

    #[error(
        "channel {channel} power became {power:e} W at z = {z} km; increase the steps per span"
    )]
    NumericalInstability { channel: usize, power: f64, z: f64 },

    #[error("root find failed: no sign change over output total power [{low:e}, {high:e}] W")]
    NoBracket { low: f64, high: f64 },

    #[error("no noise figure configured for band `{0}`")]
    MissingNoiseFigure(String),

    #[error("noise power is zero on channel {0}; OSNR is undefined")]
    UndefinedOsnr(usize),

    #[error("OSNR targeting did not converge in {} iterations (last RMSE {:e})", .history.len(), .history.last().copied().unwrap_or(f64::NAN))]
    NotConverged { history: Vec<f64> },
}

impl Error {
    /// True for errors caused by the model inputs rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::NonContiguousBands { .. }
                | Error::BandNotMultiple { .. }
                | Error::Config(_)
                | Error::UnsupportedConversion { .. }
                | Error::OutOfSupport { .. }
                | Error::InvalidOrder
                | Error::GridMismatch { .. }
                | Error::MissingNoiseFigure(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
