use super::table::PiecewiseLinear;
use crate::error::{Error, Result};

/// Frequency shift (THz) of the Raman gain peak in silica.
pub const PEAK_SHIFT: f64 = 14.0;

/// Width (THz) of the triangular gain window.
pub const DEFAULT_WINDOW: f64 = 15.5;

/// Raman gain efficiency g_R(Δf) in 1/W/km.
///
/// The triangular parameters (`slope`, `window`) are always present because
/// the closed-form model is built on them; a tabulated curve, when supplied,
/// is only used by the numerical solver.
#[derive(Debug, Clone, PartialEq)]
pub struct RamanGainModel {
    slope: f64,
    window: f64,
    table: Option<PiecewiseLinear>,
}

impl RamanGainModel {
    /// `g_R(Δf) = slope·Δf` on `[0, window]`, zero elsewhere.
    pub fn triangular(slope: f64, window: f64) -> Result<Self> {
        if !(slope >= 0.0 && slope.is_finite()) {
            return Err(Error::Config(format!(
                "Raman slope must be non-negative, got {slope}"
            )));
        }
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::Config(format!(
                "Raman window must be positive, got {window}"
            )));
        }
        Ok(Self {
            slope,
            window,
            table: None,
        })
    }

    /// Triangular model whose ramp reaches `peak` at the 14 THz shift.
    pub fn from_peak(peak: f64) -> Result<Self> {
        Self::triangular(peak / PEAK_SHIFT, DEFAULT_WINDOW)
    }

    /// A measured curve of (Δf THz, 1/W/km) samples starting at Δf = 0.
    /// The triangular fit is kept for the closed form.
    pub fn tabulated(samples: &[(f64, f64)], slope: f64, window: f64) -> Result<Self> {
        let mut model = Self::triangular(slope, window)?;
        let table = PiecewiseLinear::new(samples)?;
        if table.low() != 0.0 || table.values()[0] != 0.0 {
            return Err(Error::Config(
                "tabulated Raman gain must start at (0, 0)".into(),
            ));
        }
        if table.values().iter().any(|g| *g < 0.0) {
            return Err(Error::Config(
                "tabulated Raman gain must be non-negative".into(),
            ));
        }
        model.table = Some(table);
        Ok(model)
    }

    /// Same model with the tabulated curve dropped.
    pub fn to_triangular(&self) -> Self {
        Self {
            table: None,
            ..self.clone()
        }
    }

    /// c_R in 1/W/km/THz.
    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// Δ_R in THz.
    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn is_tabulated(&self) -> bool {
        self.table.is_some()
    }

    /// g_R(Δf) for Δf ≥ 0. Tabulated curves are zero beyond their last sample.
    pub fn raman_gain_at(&self, df: f64) -> Result<f64> {
        if df < 0.0 {
            return Err(Error::NegativeSeparation(df));
        }
        Ok(match &self.table {
            Some(table) => table.eval(df).unwrap_or(0.0),
            None if df <= self.window => self.slope * df,
            None => 0.0,
        })
    }
}
