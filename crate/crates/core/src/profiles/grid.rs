use std::ops::Range;

use crate::error::{Error, Result};

/// A named contiguous spectral region, edges in THz.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub name: String,
    pub low: f64,
    pub high: f64,
}

impl Band {
    pub fn new(name: impl Into<String>, low: f64, high: f64) -> Self {
        Self {
            name: name.into(),
            low,
            high,
        }
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// Default band edges in THz, ascending in frequency. Widths match the
/// usual U/L/C/S allocations (5.5, 7.10, 4.05 and 9.75 THz).
pub const DEFAULT_BAND_EDGES: [(&str, f64, f64); 4] = [
    ("U", 179.10, 184.60),
    ("L", 184.60, 191.70),
    ("C", 191.70, 195.75),
    ("S", 195.75, 205.50),
];

/// Bands for a plan spelled with band letters, e.g. `"CLU"` or `"SCL"`.
/// Letter order is irrelevant; bands come back ascending in frequency.
pub fn standard_bands(plan: &str) -> Result<Vec<Band>> {
    let plan = plan.to_ascii_uppercase();
    if plan.is_empty() {
        return Err(Error::Config("empty band plan".into()));
    }
    if let Some(c) = plan
        .chars()
        .find(|c| !DEFAULT_BAND_EDGES.iter().any(|(n, ..)| n.starts_with(*c)))
    {
        return Err(Error::Config(format!(
            "unknown band `{c}` in plan `{plan}`"
        )));
    }
    Ok(DEFAULT_BAND_EDGES
        .iter()
        .filter(|(name, ..)| plan.contains(name))
        .map(|&(name, low, high)| Band::new(name, low, high))
        .collect())
}

/// Channel centers on a uniform grid spanning a contiguous set of bands.
///
/// Channels sit at bin centers, so channel `k` is at `f_min + (k + 1/2)·spacing`
/// and the per-channel power equals the spectral density times the spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGrid {
    frequencies: Vec<f64>,
    spacing: f64,
    bands: Vec<Band>,
    band_ranges: Vec<Range<usize>>,
}

/// Tolerance (THz) used when checking band contiguity.
const EDGE_TOL: f64 = 1e-9;

/// Build the channel grid that fills `bands` at the given spacing (THz).
pub fn build_channel_grid(bands: &[Band], spacing: f64) -> Result<ChannelGrid> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Config(format!(
            "channel spacing must be positive, got {spacing}"
        )));
    }
    if bands.is_empty() {
        return Err(Error::Config("band plan has no bands".into()));
    }
    for band in bands {
        if !(band.high > band.low) {
            return Err(Error::Config(format!(
                "band `{}` has non-positive width ({} to {} THz)",
                band.name, band.low, band.high
            )));
        }
    }
    for pair in bands.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if (a.high - b.low).abs() > EDGE_TOL {
            return Err(Error::NonContiguousBands {
                previous: a.name.clone(),
                end: a.high,
                next: b.name.clone(),
                start: b.low,
            });
        }
    }

    let f_min = bands[0].low;
    let mut band_ranges = Vec::with_capacity(bands.len());
    let mut start = 0usize;
    for band in bands {
        let ratio = band.width() / spacing;
        let count = ratio.round();
        if count < 1.0 || (ratio - count).abs() > 1e-6 {
            return Err(Error::BandNotMultiple {
                band: band.name.clone(),
                width: band.width(),
                spacing,
            });
        }
        let end = start + count as usize;
        band_ranges.push(start..end);
        start = end;
    }
    let frequencies = (0..start)
        .map(|k| f_min + (k as f64 + 0.5) * spacing)
        .collect();

    Ok(ChannelGrid {
        frequencies,
        spacing,
        bands: bands.to_vec(),
        band_ranges,
    })
}

impl ChannelGrid {
    /// Grid for one of the standard band plans (see [`standard_bands`]).
    pub fn standard(plan: &str, spacing: f64) -> Result<Self> {
        build_channel_grid(&standard_bands(plan)?, spacing)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn frequency(&self, channel: usize) -> f64 {
        self.frequencies[channel]
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Lower edge of the occupied spectrum.
    pub fn f_min(&self) -> f64 {
        self.bands[0].low
    }

    /// Upper edge of the occupied spectrum.
    pub fn f_max(&self) -> f64 {
        self.bands[self.bands.len() - 1].high
    }

    pub fn bandwidth(&self) -> f64 {
        self.f_max() - self.f_min()
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    /// Channel indices belonging to band `band`.
    pub fn band_channels(&self, band: usize) -> Range<usize> {
        self.band_ranges[band].clone()
    }

    /// Index of the band that contains `channel`.
    pub fn band_of(&self, channel: usize) -> usize {
        self.band_ranges
            .iter()
            .position(|r| r.contains(&channel))
            .expect("channel index out of range")
    }

    pub fn band_name_of(&self, channel: usize) -> &str {
        &self.bands[self.band_of(channel)].name
    }
}
