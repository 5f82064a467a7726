use std::sync::Arc;

use crate::error::{Error, Result};
use crate::profiles::units::{dbm_to_watt, watt_to_dbm};
use crate::profiles::ChannelGrid;

/// Per-channel signal powers (W) on a channel grid at position `z` (km).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    grid: Arc<ChannelGrid>,
    powers: Vec<f64>,
    z: f64,
}

impl PowerSpectrum {
    pub fn new(grid: Arc<ChannelGrid>, powers: Vec<f64>, z: f64) -> Result<Self> {
        if powers.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: grid.len(),
                got: powers.len(),
            });
        }
        if let Some(i) = powers.iter().position(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::Config(format!(
                "channel {i} power must be finite and non-negative, got {}",
                powers[i]
            )));
        }
        Ok(Self { grid, powers, z })
    }

    /// Every channel at `power` watts, z = 0.
    pub fn flat(grid: Arc<ChannelGrid>, power: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![power; n], 0.0)
    }

    pub fn flat_dbm(grid: Arc<ChannelGrid>, dbm: f64) -> Result<Self> {
        Self::flat(grid, dbm_to_watt(dbm))
    }

    pub fn from_dbm(grid: Arc<ChannelGrid>, dbm: &[f64]) -> Result<Self> {
        Self::new(grid, dbm.iter().map(|&p| dbm_to_watt(p)).collect(), 0.0)
    }

    /// Internal constructor for values that are already known to be valid.
    pub(crate) fn from_parts(grid: Arc<ChannelGrid>, powers: Vec<f64>, z: f64) -> Self {
        debug_assert_eq!(grid.len(), powers.len());
        Self { grid, powers, z }
    }

    pub fn grid(&self) -> &ChannelGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<ChannelGrid> {
        &self.grid
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn into_powers(self) -> Vec<f64> {
        self.powers
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn to_dbm(&self) -> Vec<f64> {
        self.powers.iter().map(|&p| watt_to_dbm(p)).collect()
    }

    pub fn with_z(mut self, z: f64) -> Self {
        self.z = z;
        self
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_parts(
            self.grid.clone(),
            self.powers.iter().map(|p| p * factor).collect(),
            self.z,
        )
    }

    /// Channel-wise product with `gains`.
    pub fn amplified(&self, gains: &[f64]) -> Self {
        debug_assert_eq!(gains.len(), self.powers.len());
        Self::from_parts(
            self.grid.clone(),
            self.powers.iter().zip(gains).map(|(p, g)| p * g).collect(),
            self.z,
        )
    }

    /// Spectrum divided by its total power.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::ZeroTotalPower);
        }
        Ok(self.scaled(1.0 / total))
    }

    pub(crate) fn same_grid(&self, other: &PowerSpectrum) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.grid.len(),
                got: other.grid.len(),
            })
        }
    }
}
