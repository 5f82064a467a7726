//! Accuracy metrics and the closed-form-vs-RK4 parameter sweep.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::closedform::{power_profile, ClosedFormParams};
use crate::error::{Error, Result};
use crate::ode::{integrate_span, SolverOptions};
use crate::profiles::{
    AttenuationProfile, ChannelGrid, FiberSpec, RamanGainModel, DEFAULT_WINDOW, PEAK_SHIFT,
};
use crate::spectrum::PowerSpectrum;

/// ε_P = Σ P_i(L) / Σ P̂_i(L), closed form over oracle.
pub fn total_power_error_ratio(closedform: &PowerSpectrum, oracle: &PowerSpectrum) -> Result<f64> {
    closedform.same_grid(oracle)?;
    let reference = oracle.total();
    if !(reference > 0.0) {
        return Err(Error::ZeroTotalPower);
    }
    Ok(closedform.total() / reference)
}

/// Largest per-channel |10·log10(P_i/P̂_i)|.
pub fn max_db_error(closedform: &PowerSpectrum, oracle: &PowerSpectrum) -> Result<f64> {
    closedform.same_grid(oracle)?;
    Ok(closedform
        .powers()
        .iter()
        .zip(oracle.powers())
        .map(|(a, b)| (10.0 * (a / b).log10()).abs())
        .fold(0.0, f64::max))
}

/// `count` evenly spaced values from `start` to `end` inclusive; a single
/// value is `start`.
pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|k| start + (end - start) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// An inclusive sweep axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(start: f64, end: f64, count: usize) -> Self {
        Self { start, end, count }
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.end, self.count)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config(format!("{name}: count must be at least 1")));
        }
        if !(self.start.is_finite() && self.end.is_finite()) || self.end < self.start {
            return Err(Error::Config(format!(
                "{name}: range [{}, {}] must be finite and ordered",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Band plans, e.g. "C", "CL", "CLU", "SCLU".
    pub bands: Vec<String>,
    /// Peak Raman gain G_R (1/W/km) at the 14 THz shift.
    pub raman_peak: Axis,
    /// Per-channel launch power (dBm).
    pub launch_power_dbm: Axis,
    /// Span length (km).
    pub length: Axis,
    pub orders: Vec<u32>,
    pub spacing: f64,
    pub window: f64,
    pub attenuation: AttenuationProfile,
    pub solver: SolverOptions,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            bands: ["C", "CL", "CLU", "SCLU"].map(String::from).to_vec(),
            raman_peak: Axis::new(0.3, 0.4, 5),
            launch_power_dbm: Axis::new(-5.0, 0.0, 5),
            length: Axis::new(50.0, 150.0, 5),
            orders: (1..=6).collect(),
            spacing: 0.05,
            window: DEFAULT_WINDOW,
            attenuation: AttenuationProfile::standard_smf(),
            solver: SolverOptions::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::Config("sweep needs at least one band plan".into()));
        }
        if self.orders.is_empty() || self.orders.contains(&0) {
            return Err(Error::Config(
                "orders must be a non-empty list of positive integers".into(),
            ));
        }
        self.raman_peak.validate("raman_peak")?;
        self.launch_power_dbm.validate("launch_power_dbm")?;
        self.length.validate("length")?;
        if self.length.start <= 0.0 {
            return Err(Error::Config("span lengths must be positive".into()));
        }
        if self.raman_peak.start < 0.0 {
            return Err(Error::Config("Raman gain must be non-negative".into()));
        }
        Ok(())
    }
}

/// One (band, G_R, power, length, order) comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub band: String,
    pub raman_peak: f64,
    pub launch_power_dbm: f64,
    pub length: f64,
    pub order: u32,
    pub error_ratio: f64,
    pub max_db_error: f64,
    /// Wall time of the cell's RK4 run (shared by all orders), seconds.
    pub oracle_seconds: f64,
    /// Wall time of this order's closed-form evaluation, seconds.
    pub closedform_seconds: f64,
}

impl SweepRecord {
    /// Same record ignoring wall-clock fields.
    pub fn same_result(&self, other: &SweepRecord) -> bool {
        self.band == other.band
            && self.raman_peak.to_bits() == other.raman_peak.to_bits()
            && self.launch_power_dbm.to_bits() == other.launch_power_dbm.to_bits()
            && self.length.to_bits() == other.length.to_bits()
            && self.order == other.order
            && self.error_ratio.to_bits() == other.error_ratio.to_bits()
            && self.max_db_error.to_bits() == other.max_db_error.to_bits()
    }
}

/// A cell (or one order of it) that could not be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub band: String,
    pub raman_peak: f64,
    pub launch_power_dbm: f64,
    pub length: f64,
    /// `None` when the oracle itself failed.
    pub order: Option<u32>,
    pub error: Error,
}

/// Box-plot statistics of ε_P for one (band, order).
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub band: String,
    pub order: u32,
    pub count: usize,
    pub mean_abs_deviation: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<SweepFailure>,
    pub summary: Vec<BoxStats>,
}

impl SweepResult {
    /// Mean |ε_P − 1| per order over the records of `bands`, in order of
    /// first appearance.
    pub fn mean_abs_deviation_by_order(&self, bands: &[&str]) -> Vec<(u32, f64)> {
        let mut orders: Vec<u32> = Vec::new();
        for r in &self.records {
            if !orders.contains(&r.order) {
                orders.push(r.order);
            }
        }
        orders
            .into_iter()
            .filter_map(|n| {
                let values: Vec<f64> = self
                    .records
                    .iter()
                    .filter(|r| r.order == n && bands.contains(&r.band.as_str()))
                    .map(|r| (r.error_ratio - 1.0).abs())
                    .collect();
                (!values.is_empty()).then(|| (n, values.iter().sum::<f64>() / values.len() as f64))
            })
            .collect()
    }

    /// Order with the smallest mean |ε_P − 1| over `bands`.
    pub fn best_order(&self, bands: &[&str]) -> Option<u32> {
        self.mean_abs_deviation_by_order(bands)
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(n, _)| n)
    }
}

/// Linearly interpolated quantile of sorted data (`q` in [0, 1]).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Box statistics with the 1.5×IQR outlier rule.
pub fn box_stats(band: &str, order: u32, values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let (low_fence, high_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = sorted
        .iter()
        .filter(|v| (low_fence..=high_fence).contains(*v));
    let whisker_low = inside.clone().cloned().fold(f64::INFINITY, f64::min);
    let whisker_high = inside.cloned().fold(f64::NEG_INFINITY, f64::max);
    Some(BoxStats {
        band: band.to_string(),
        order,
        count: values.len(),
        mean_abs_deviation: values.iter().map(|v| (v - 1.0).abs()).sum::<f64>()
            / values.len() as f64,
        median: quantile(&sorted, 0.5),
        q1,
        q3,
        whisker_low,
        whisker_high,
        outliers: sorted
            .into_iter()
            .filter(|v| *v < low_fence || *v > high_fence)
            .collect(),
    })
}

struct Cell {
    band: usize,
    raman_peak: f64,
    power_dbm: f64,
    length: f64,
}

fn run_cell(
    cell: &Cell,
    band: &str,
    grid: &Arc<ChannelGrid>,
    config: &SweepConfig,
) -> (Vec<SweepRecord>, Vec<SweepFailure>) {
    let failure = |order: Option<u32>, error: Error| SweepFailure {
        band: band.to_string(),
        raman_peak: cell.raman_peak,
        launch_power_dbm: cell.power_dbm,
        length: cell.length,
        order,
        error,
    };
    let setup = || -> Result<(FiberSpec, PowerSpectrum)> {
        let raman = RamanGainModel::triangular(cell.raman_peak / PEAK_SHIFT, config.window)?;
        let fiber = FiberSpec::new(config.attenuation.clone(), raman, cell.length)?;
        let launch = PowerSpectrum::flat_dbm(grid.clone(), cell.power_dbm)?;
        Ok((fiber, launch))
    };
    let (fiber, launch) = match setup() {
        Ok(v) => v,
        Err(e) => return (Vec::new(), vec![failure(None, e)]),
    };
    let started = Instant::now();
    let oracle = match integrate_span(&launch, &fiber, &config.solver) {
        Ok(r) => r.last().clone(),
        Err(e) => return (Vec::new(), vec![failure(None, e)]),
    };
    let oracle_seconds = started.elapsed().as_secs_f64();
    let mut records = Vec::with_capacity(config.orders.len());
    let mut failures = Vec::new();
    for &order in &config.orders {
        let started = Instant::now();
        let evaluated = ClosedFormParams::from_launch(&launch, &fiber, order)
            .and_then(|p| power_profile(&launch, &p, fiber.length))
            .and_then(|out| {
                Ok((
                    total_power_error_ratio(&out, &oracle)?,
                    max_db_error(&out, &oracle)?,
                ))
            });
        let closedform_seconds = started.elapsed().as_secs_f64();
        match evaluated {
            Ok((error_ratio, max_db_error)) => records.push(SweepRecord {
                band: band.to_string(),
                raman_peak: cell.raman_peak,
                launch_power_dbm: cell.power_dbm,
                length: cell.length,
                order,
                error_ratio,
                max_db_error,
                oracle_seconds,
                closedform_seconds,
            }),
            Err(e) => failures.push(failure(Some(order), e)),
        }
    }
    (records, failures)
}

/// Runs every (band, G_R, power, length) cell: one RK4 oracle run and one
/// closed-form evaluation per order. Cells run in parallel; records come
/// back in configuration order (band, G_R, power, length, order). Failing
/// cells are recorded and the sweep continues.
pub fn run_order_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let grids = config
        .bands
        .iter()
        .map(|b| ChannelGrid::standard(b, config.spacing).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for band in 0..config.bands.len() {
        for &raman_peak in &config.raman_peak.values() {
            for &power_dbm in &config.launch_power_dbm.values() {
                for &length in &config.length.values() {
                    cells.push(Cell {
                        band,
                        raman_peak,
                        power_dbm,
                        length,
                    });
                }
            }
        }
    }
    let outcomes: Vec<_> = cells
        .par_iter()
        .map(|c| run_cell(c, &config.bands[c.band], &grids[c.band], config))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in outcomes {
        records.extend(r);
        failures.extend(f);
    }
    let mut summary = Vec::new();
    for band in &config.bands {
        for &order in &config.orders {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| &r.band == band && r.order == order)
                .map(|r| r.error_ratio)
                .collect();
            summary.extend(box_stats(band, order, &values));
        }
    }
    Ok(SweepResult {
        records,
        failures,
        summary,
    })
}
