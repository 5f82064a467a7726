use super::grid::ChannelGrid;
use super::table::PiecewiseLinear;
use super::units::db_per_km_to_per_km;
use crate::error::{Error, Result};

/// Fiber loss as a function of frequency. Values are Napierian 1/km except
/// for tabulated samples, which are stored in dB/km as supplied.
#[derive(Debug, Clone, PartialEq)]
pub enum AttenuationProfile {
    Constant(f64),
    /// `min + curvature·(f − vertex)²`, with `min` in 1/km, `vertex` in THz
    /// and `curvature` in 1/km/THz².
    Parabolic {
        min: f64,
        vertex: f64,
        curvature: f64,
    },
    /// Samples of (THz, dB/km), interpolated piecewise-linearly.
    Tabulated(PiecewiseLinear),
}

impl AttenuationProfile {
    /// Parabola fitted to a standard single-mode fiber loss curve: 0.19 dB/km
    /// at 189 THz rising to about 0.24 dB/km at the U-band lower edge and
    /// 0.26 dB/km at the S-band upper edge.
    pub fn standard_smf() -> Self {
        Self::parabolic_db(0.19, 189.0, 2.5e-4)
    }

    /// Parabolic profile from dB/km parameters.
    pub fn parabolic_db(min_db_per_km: f64, vertex: f64, curvature_db: f64) -> Self {
        AttenuationProfile::Parabolic {
            min: db_per_km_to_per_km(min_db_per_km),
            vertex,
            curvature: db_per_km_to_per_km(curvature_db),
        }
    }

    pub fn tabulated_db(samples: &[(f64, f64)]) -> Result<Self> {
        Ok(AttenuationProfile::Tabulated(PiecewiseLinear::new(
            samples,
        )?))
    }

    /// α(f) in 1/km.
    pub fn attenuation_at(&self, f: f64) -> Result<f64> {
        match self {
            AttenuationProfile::Constant(a) => Ok(*a),
            AttenuationProfile::Parabolic {
                min,
                vertex,
                curvature,
            } => Ok(min + curvature * (f - vertex).powi(2)),
            AttenuationProfile::Tabulated(table) => {
                table
                    .eval(f)
                    .map(db_per_km_to_per_km)
                    .ok_or(Error::OutOfSupport {
                        value: f,
                        low: table.low(),
                        high: table.high(),
                    })
            }
        }
    }

    /// α(f_i) for every channel; fails if any value is not strictly positive.
    pub fn per_channel(&self, grid: &ChannelGrid) -> Result<Vec<f64>> {
        let alpha = grid
            .frequencies()
            .iter()
            .map(|&f| self.attenuation_at(f))
            .collect::<Result<Vec<_>>>()?;
        if let Some(i) = alpha.iter().position(|a| !(*a > 0.0)) {
            return Err(Error::Config(format!(
                "attenuation must be positive; got {} 1/km at {} THz",
                alpha[i],
                grid.frequency(i)
            )));
        }
        Ok(alpha)
    }

    /// Same as [`per_channel`](Self::per_channel) but allows α = 0, for
    /// lossless reference runs.
    pub fn per_channel_allow_lossless(&self, grid: &ChannelGrid) -> Result<Vec<f64>> {
        let alpha = grid
            .frequencies()
            .iter()
            .map(|&f| self.attenuation_at(f))
            .collect::<Result<Vec<_>>>()?;
        if alpha.iter().any(|a| *a < 0.0) {
            return Err(Error::Config("attenuation must be non-negative".into()));
        }
        Ok(alpha)
    }
}
