//! Channel grids, band plans, fiber loss and Raman gain models.

mod attenuation;
mod grid;
mod raman;
mod table;
pub mod units;

pub use attenuation::AttenuationProfile;
pub use grid::{build_channel_grid, standard_bands, Band, ChannelGrid, DEFAULT_BAND_EDGES};
pub use raman::{RamanGainModel, DEFAULT_WINDOW, PEAK_SHIFT};
pub use table::PiecewiseLinear;

use crate::error::{Error, Result};

/// One fiber span: loss profile, Raman gain model and length (km).
#[derive(Debug, Clone, PartialEq)]
pub struct FiberSpec {
    pub attenuation: AttenuationProfile,
    pub raman: RamanGainModel,
    pub length: f64,
}

impl FiberSpec {
    pub fn new(
        attenuation: AttenuationProfile,
        raman: RamanGainModel,
        length: f64,
    ) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Config(format!(
                "span length must be positive, got {length} km"
            )));
        }
        Ok(Self {
            attenuation,
            raman,
            length,
        })
    }

    /// Copy of this fiber with a different length.
    pub fn with_length(&self, length: f64) -> Result<Self> {
        Self::new(self.attenuation.clone(), self.raman.clone(), length)
    }
}
