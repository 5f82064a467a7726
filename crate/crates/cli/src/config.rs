//! JSON run configuration. Quantities are given in THz, GHz, km, dB/km and
//! dBm at this boundary and converted to the core's units here.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use isrs_core::bench::{Axis, SweepConfig};
use isrs_core::inverse::TargetSpectrum;
use isrs_core::multispan::{Amplifier, GainPolicy, LinkSpec, ReceiverBoost};
use isrs_core::ode::{RamanChoice, SolverOptions};
use isrs_core::osnr::{AseConfig, AseModel, OsnrTargetOptions, RmseDomain};
use isrs_core::profiles::units::{db_to_linear, dbm_to_watt};
use isrs_core::profiles::{
    build_channel_grid, standard_bands, AttenuationProfile, Band, ChannelGrid, FiberSpec,
    RamanGainModel, DEFAULT_WINDOW, PEAK_SHIFT,
};
use isrs_core::PowerSpectrum;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub grid: GridConfig,
    pub fiber: FiberConfig,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub launch: Option<LaunchConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_order")]
    pub order: u32,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub osnr: Option<OsnrSection>,
}

fn default_order() -> u32 {
    3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Band letters, e.g. "CLU".
    #[serde(default)]
    pub plan: Option<String>,
    /// Explicit contiguous bands instead of a plan.
    #[serde(default)]
    pub bands: Option<Vec<BandConfig>>,
    #[serde(default = "default_spacing")]
    pub spacing_ghz: f64,
}

fn default_spacing() -> f64 {
    50.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub name: String,
    pub low_thz: f64,
    pub high_thz: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    pub length_km: f64,
    #[serde(default)]
    pub attenuation: AttenuationConfig,
    pub raman: RamanConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttenuationConfig {
    #[default]
    StandardSmf,
    Constant {
        db_per_km: f64,
    },
    Parabolic {
        min_db_per_km: f64,
        vertex_thz: f64,
        curvature_db_per_km_thz2: f64,
    },
    /// (frequency THz, dB/km) samples.
    Table {
        samples: Vec<(f64, f64)>,
    },
    /// CSV with `frequency_thz` and `attenuation_db_per_km` columns.
    TableFile {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamanConfig {
    /// Peak gain G_R (1/W/km) at the 14 THz shift; slope = G_R/14.
    #[serde(default)]
    pub peak_gain: Option<f64>,
    /// Slope c_R (1/W/km/THz).
    #[serde(default)]
    pub slope: Option<f64>,
    #[serde(default = "default_window")]
    pub window_thz: f64,
    /// Measured (Δf THz, 1/W/km) curve for the numerical solver.
    #[serde(default)]
    pub table: Option<Vec<(f64, f64)>>,
}

fn default_window() -> f64 {
    DEFAULT_WINDOW
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    #[serde(default = "one")]
    pub spans: usize,
    #[serde(default)]
    pub amplifier: AmplifierConfig,
    #[serde(default)]
    pub receiver_boost: BoostConfig,
}

fn one() -> usize {
    1
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            spans: 1,
            amplifier: AmplifierConfig::default(),
            receiver_boost: BoostConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplifierConfig {
    #[serde(default)]
    pub gain: GainConfig,
    /// Noise figure per band in dB; `null` is a noiseless stage.
    #[serde(default)]
    pub noise_figures_db: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GainConfig {
    #[default]
    RestoreTotal,
    PerBand,
    FixedDb(f64),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BoostConfig {
    #[default]
    Off,
    Ideal,
    Amplified(AmplifierConfig),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LaunchConfig {
    /// Same power on every channel, dBm.
    FlatDbm(f64),
    /// One dBm value per channel.
    PerChannelDbm(Vec<f64>),
    /// CSV with a `power_dbm` column (and optionally `frequency_thz`).
    TableFile(PathBuf),
    /// Launch computed by pre-emphasis.
    Preemphasis(PreemphasisConfig),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreemphasisConfig {
    pub target: TargetConfig,
    /// Fixes the launch total power; required for shapes and multi-span links.
    #[serde(default)]
    pub total_power_dbm: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    /// Flat shape.
    Flat,
    /// Per-channel shape, any scale.
    Shape(Vec<f64>),
    /// Same absolute output power on every channel, dBm.
    FlatOutputDbm(f64),
    /// Absolute output powers per channel, dBm.
    OutputDbm(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_steps")]
    pub steps_per_span: usize,
    #[serde(default)]
    pub photon_correction: bool,
    #[serde(default)]
    pub raman: RamanChoiceConfig,
}

fn default_steps() -> usize {
    50
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            steps_per_span: default_steps(),
            photon_correction: false,
            raman: RamanChoiceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RamanChoiceConfig {
    #[default]
    Triangular,
    Tabulated,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Samples per span in longitudinal tables.
    #[serde(default = "default_points")]
    pub longitudinal_points: usize,
    /// Also run the RK4 oracle and report it next to the closed form.
    #[serde(default)]
    pub compare_with_oracle: bool,
}

fn default_points() -> usize {
    51
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            longitudinal_points: default_points(),
            compare_with_oracle: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub bands: Vec<String>,
    pub raman_peak: AxisConfig,
    pub launch_power_dbm: AxisConfig,
    pub length_km: AxisConfig,
    #[serde(default = "default_orders")]
    pub orders: Vec<u32>,
}

fn default_orders() -> Vec<u32> {
    (1..=6).collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OsnrSection {
    #[serde(default = "flat_target")]
    pub target: TargetConfig,
    /// Launch total power; defaults to the flat launch power × channels.
    #[serde(default)]
    pub total_power_dbm: Option<f64>,
    #[serde(default = "unit_step")]
    pub step: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub ase_model: AseModelConfig,
    /// Defaults to the channel spacing.
    #[serde(default)]
    pub reference_bandwidth_ghz: Option<f64>,
    #[serde(default)]
    pub rmse_domain: RmseDomainConfig,
}

fn flat_target() -> TargetConfig {
    TargetConfig::Flat
}

fn unit_step() -> f64 {
    1.0
}

fn default_tolerance() -> f64 {
    1e-5
}

fn default_iterations() -> usize {
    20
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AseModelConfig {
    #[default]
    GainMinusOne,
    GainTimesNfMinusOne,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmseDomainConfig {
    #[default]
    Linear,
    Db,
}

/// Parses a config, reporting the failing field path and position.
pub fn parse_config(text: &str, origin: &Path) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::Parse {
            file: origin.to_path_buf(),
            line: inner.line(),
            column: inner.column(),
            field: path,
            message: inner.to_string(),
        }
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config(&text, path)
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Core(isrs_core::Error::Config(msg.into()))
}

/// A config resolved against its directory: everything except the launch,
/// which may need a solver run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub grid: Arc<ChannelGrid>,
    pub fiber: FiberSpec,
    pub link: LinkSpec,
    pub solver: SolverOptions,
    pub order: u32,
    pub output: OutputConfig,
    pub launch: Option<LaunchConfig>,
    pub sweep: Option<SweepConfig>,
    pub osnr: Option<(TargetConfig, OsnrTargetOptions, Option<f64>)>,
    base: PathBuf,
}

/// Command-line overrides.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub steps: Option<usize>,
    pub order: Option<u32>,
}

impl Scenario {
    pub fn resolve(config: RunConfig, base: &Path, overrides: Overrides) -> Result<Self, CliError> {
        let grid = Arc::new(resolve_grid(&config.grid)?);
        let attenuation = resolve_attenuation(&config.fiber.attenuation, base)?;
        let raman = resolve_raman(&config.fiber.raman)?;
        let fiber = FiberSpec::new(attenuation.clone(), raman, config.fiber.length_km)?;
        // Surface unusable loss values (outside a table, non-positive) now.
        attenuation.per_channel_allow_lossless(&grid)?;
        let link = resolve_link(&config.link, &fiber)?;
        let solver = SolverOptions {
            steps_per_span: overrides.steps.unwrap_or(config.solver.steps_per_span),
            photon_correction: config.solver.photon_correction,
            raman: match config.solver.raman {
                RamanChoiceConfig::Triangular => RamanChoice::Triangular,
                RamanChoiceConfig::Tabulated => RamanChoice::Tabulated,
            },
        };
        if solver.steps_per_span == 0 {
            return Err(config_error("steps per span must be at least 1"));
        }
        let order = overrides.order.unwrap_or(config.order);
        if order == 0 {
            return Err(config_error("approximation order must be at least 1"));
        }
        let sweep = config
            .sweep
            .as_ref()
            .map(|s| resolve_sweep(s, &config, attenuation.clone(), solver))
            .transpose()?;
        let osnr = config
            .osnr
            .as_ref()
            .map(|o| resolve_osnr(o, order))
            .transpose()?;
        let scenario = Self {
            name: config.scenario,
            grid,
            fiber,
            link,
            solver,
            order,
            output: config.output,
            launch: config.launch,
            sweep,
            osnr,
            base: base.to_path_buf(),
        };
        if let Some(LaunchConfig::TableFile(path)) = &scenario.launch {
            scenario.read_launch_table(path)?;
        }
        Ok(scenario)
    }

    pub fn path(&self, relative: &Path) -> PathBuf {
        self.base.join(relative)
    }

    /// Launch for the explicit launch modes; `None` for a pre-emphasis request.
    pub fn explicit_launch(&self) -> Result<Option<PowerSpectrum>, CliError> {
        let launch = match &self.launch {
            None => return Err(config_error("this command needs a `launch` section")),
            Some(LaunchConfig::FlatDbm(p)) => PowerSpectrum::flat_dbm(self.grid.clone(), *p)?,
            Some(LaunchConfig::PerChannelDbm(values)) => {
                PowerSpectrum::from_dbm(self.grid.clone(), values)?
            }
            Some(LaunchConfig::TableFile(path)) => self.read_launch_table(path)?,
            Some(LaunchConfig::Preemphasis(_)) => return Ok(None),
        };
        Ok(Some(launch))
    }

    fn read_launch_table(&self, path: &Path) -> Result<PowerSpectrum, CliError> {
        let full = self.path(path);
        let rows = read_csv_columns(&full, &["power_dbm"], &["frequency_thz"])?;
        if let Some(freqs) = &rows[1] {
            for (i, f) in freqs.iter().enumerate() {
                if i < self.grid.len() && (f - self.grid.frequency(i)).abs() > 1e-6 {
                    return Err(config_error(format!(
                        "{}: row {} is at {f} THz but channel {i} is at {} THz",
                        full.display(),
                        i + 1,
                        self.grid.frequency(i)
                    )));
                }
            }
        }
        Ok(PowerSpectrum::from_dbm(
            self.grid.clone(),
            rows[0].as_ref().expect("required column"),
        )?)
    }

    /// Total launch power implied by an explicit launch, W.
    pub fn launch_total(&self) -> Option<f64> {
        match &self.launch {
            Some(LaunchConfig::FlatDbm(p)) => Some(dbm_to_watt(*p) * self.grid.len() as f64),
            Some(LaunchConfig::PerChannelDbm(v)) => Some(v.iter().map(|p| dbm_to_watt(*p)).sum()),
            Some(LaunchConfig::TableFile(_)) => {
                self.explicit_launch().ok().flatten().map(|l| l.total())
            }
            Some(LaunchConfig::Preemphasis(p)) => p.total_power_dbm.map(dbm_to_watt),
            None => None,
        }
    }

    pub fn target(&self, target: &TargetConfig) -> Result<TargetSpectrum, CliError> {
        let grid = self.grid.clone();
        let n = grid.len();
        Ok(match target {
            TargetConfig::Flat => TargetSpectrum::flat(grid),
            TargetConfig::Shape(v) => TargetSpectrum::shape(grid, v.clone())?,
            TargetConfig::FlatOutputDbm(p) => {
                TargetSpectrum::absolute(grid, vec![dbm_to_watt(*p); n])?
            }
            TargetConfig::OutputDbm(v) => {
                TargetSpectrum::absolute(grid, v.iter().map(|p| dbm_to_watt(*p)).collect())?
            }
        })
    }
}

fn resolve_grid(config: &GridConfig) -> Result<ChannelGrid, CliError> {
    if !(config.spacing_ghz > 0.0) {
        return Err(config_error(format!(
            "channel spacing must be positive, got {} GHz",
            config.spacing_ghz
        )));
    }
    let bands = match (&config.plan, &config.bands) {
        (Some(plan), None) => standard_bands(plan)?,
        (None, Some(bands)) => bands
            .iter()
            .map(|b| Band::new(b.name.clone(), b.low_thz, b.high_thz))
            .collect(),
        _ => return Err(config_error("grid needs exactly one of `plan` or `bands`")),
    };
    Ok(build_channel_grid(&bands, config.spacing_ghz / 1000.0)?)
}

fn resolve_attenuation(
    config: &AttenuationConfig,
    base: &Path,
) -> Result<AttenuationProfile, CliError> {
    Ok(match config {
        AttenuationConfig::StandardSmf => AttenuationProfile::standard_smf(),
        AttenuationConfig::Constant { db_per_km } => AttenuationProfile::Constant(
            isrs_core::profiles::units::db_per_km_to_per_km(*db_per_km),
        ),
        AttenuationConfig::Parabolic {
            min_db_per_km,
            vertex_thz,
            curvature_db_per_km_thz2,
        } => {
            AttenuationProfile::parabolic_db(*min_db_per_km, *vertex_thz, *curvature_db_per_km_thz2)
        }
        AttenuationConfig::Table { samples } => AttenuationProfile::tabulated_db(samples)?,
        AttenuationConfig::TableFile { path } => {
            let full = base.join(path);
            let cols = read_csv_columns(&full, &["frequency_thz", "attenuation_db_per_km"], &[])?;
            let samples: Vec<(f64, f64)> = cols[0]
                .as_ref()
                .unwrap()
                .iter()
                .zip(cols[1].as_ref().unwrap())
                .map(|(f, a)| (*f, *a))
                .collect();
            AttenuationProfile::tabulated_db(&samples)?
        }
    })
}

fn resolve_raman(config: &RamanConfig) -> Result<RamanGainModel, CliError> {
    let slope = match (config.peak_gain, config.slope) {
        (Some(peak), None) => peak / PEAK_SHIFT,
        (None, Some(slope)) => slope,
        _ => {
            return Err(config_error(
                "raman needs exactly one of `peak_gain` or `slope`",
            ))
        }
    };
    Ok(match &config.table {
        Some(samples) => RamanGainModel::tabulated(samples, slope, config.window_thz)?,
        None => RamanGainModel::triangular(slope, config.window_thz)?,
    })
}

fn resolve_amplifier(config: &AmplifierConfig) -> Amplifier {
    let gain_policy = match config.gain {
        GainConfig::RestoreTotal => GainPolicy::RestoreTotal,
        GainConfig::PerBand => GainPolicy::PerBand,
        GainConfig::FixedDb(db) => GainPolicy::Fixed(db_to_linear(db)),
    };
    config.noise_figures_db.iter().fold(
        Amplifier {
            gain_policy,
            noise_figures_db: Vec::new(),
        },
        |amp, (band, nf)| amp.with_noise_figure(band.clone(), nf.unwrap_or(f64::NEG_INFINITY)),
    )
}

fn resolve_link(config: &LinkConfig, fiber: &FiberSpec) -> Result<LinkSpec, CliError> {
    if config.spans == 0 {
        return Err(config_error("a link needs at least one span"));
    }
    let boost = match &config.receiver_boost {
        BoostConfig::Off => ReceiverBoost::Off,
        BoostConfig::Ideal => ReceiverBoost::Ideal,
        BoostConfig::Amplified(a) => ReceiverBoost::Amplified(resolve_amplifier(a)),
    };
    Ok(LinkSpec::homogeneous(
        fiber.clone(),
        config.spans,
        resolve_amplifier(&config.amplifier),
        boost,
    )?)
}

fn axis(config: &AxisConfig) -> Axis {
    Axis::new(config.start, config.end, config.count)
}

fn resolve_sweep(
    section: &SweepSection,
    config: &RunConfig,
    attenuation: AttenuationProfile,
    solver: SolverOptions,
) -> Result<SweepConfig, CliError> {
    let sweep = SweepConfig {
        bands: section.bands.clone(),
        raman_peak: axis(&section.raman_peak),
        launch_power_dbm: axis(&section.launch_power_dbm),
        length: axis(&section.length_km),
        orders: section.orders.clone(),
        spacing: config.grid.spacing_ghz / 1000.0,
        window: config.fiber.raman.window_thz,
        attenuation,
        solver,
    };
    sweep.validate()?;
    for band in &sweep.bands {
        ChannelGrid::standard(band, sweep.spacing)?;
    }
    Ok(sweep)
}

fn resolve_osnr(
    section: &OsnrSection,
    order: u32,
) -> Result<(TargetConfig, OsnrTargetOptions, Option<f64>), CliError> {
    if matches!(
        section.target,
        TargetConfig::FlatOutputDbm(_) | TargetConfig::OutputDbm(_)
    ) {
        return Err(config_error(
            "an OSNR target is a shape: use `flat` or `shape`",
        ));
    }
    let options = OsnrTargetOptions {
        step: section.step,
        tolerance: section.tolerance,
        max_iterations: section.max_iterations,
        order,
        ase: AseConfig {
            model: match section.ase_model {
                AseModelConfig::GainMinusOne => AseModel::GainMinusOne,
                AseModelConfig::GainTimesNfMinusOne => AseModel::GainTimesNfMinusOne,
            },
            reference_bandwidth: section.reference_bandwidth_ghz.map(|b| b * 1e9),
        },
        domain: match section.rmse_domain {
            RmseDomainConfig::Linear => RmseDomain::Linear,
            RmseDomainConfig::Db => RmseDomain::Db,
        },
    };
    if !(options.step > 0.0) || !(options.tolerance > 0.0) || options.max_iterations == 0 {
        return Err(config_error(
            "osnr: step and tolerance must be positive and max_iterations at least 1",
        ));
    }
    Ok((
        section.target.clone(),
        options,
        section.total_power_dbm.map(dbm_to_watt),
    ))
}

/// Reads numeric CSV columns by header name. Required columns must exist;
/// optional ones come back as `None` when absent.
fn read_csv_columns(
    path: &Path,
    required: &[&str],
    optional: &[&str],
) -> Result<Vec<Option<Vec<f64>>>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Table {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Table {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .clone();
    let index = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut positions = Vec::new();
    for name in required {
        positions.push(Some(index(name).ok_or_else(|| CliError::Table {
            path: path.to_path_buf(),
            message: format!("missing column `{name}`"),
        })?));
    }
    positions.extend(optional.iter().map(|name| index(name)));
    let mut columns: Vec<Option<Vec<f64>>> =
        positions.iter().map(|p| p.map(|_| Vec::new())).collect();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Table {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        for (col, pos) in columns.iter_mut().zip(&positions) {
            if let (Some(col), Some(pos)) = (col.as_mut(), pos) {
                let cell = record.get(*pos).unwrap_or("").trim();
                let value = cell.parse::<f64>().map_err(|_| CliError::Table {
                    path: path.to_path_buf(),
                    message: format!("row {}: `{cell}` is not a number", row + 2),
                })?;
                col.push(value);
            }
        }
    }
    Ok(columns)
}
