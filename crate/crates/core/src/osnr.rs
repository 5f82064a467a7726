//! ASE noise accumulation and OSNR-targeted launch pre-emphasis.
//!
//! Noise injected by an amplifier is carried to the link end in proportion
//! to the signal: across a span each channel's noise is scaled by the
//! signal's out/in ratio, and at every amplifier it sees the same gain as
//! the signal. ISRS acting on the noise itself is neglected.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::inverse::{preemphasis_multispan, TargetSpectrum};
use crate::multispan::{
    propagate_multispan_closedform, Amplifier, LinkSpec, LinkTrace, ReceiverBoost,
};
use crate::profiles::units::PLANCK;
use crate::profiles::ChannelGrid;
use crate::spectrum::PowerSpectrum;

/// Per-channel ASE power (W) in the reference bandwidth at position `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectrum {
    grid: Arc<ChannelGrid>,
    ase_powers: Vec<f64>,
    z: f64,
}

impl NoiseSpectrum {
    pub fn new(grid: Arc<ChannelGrid>, ase_powers: Vec<f64>, z: f64) -> Result<Self> {
        if ase_powers.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: grid.len(),
                got: ase_powers.len(),
            });
        }
        if let Some(i) = ase_powers
            .iter()
            .position(|p| !(*p >= 0.0 && p.is_finite()))
        {
            return Err(Error::Config(format!(
                "ASE power for channel {i} must be finite and non-negative, got {}",
                ase_powers[i]
            )));
        }
        Ok(Self {
            grid,
            ase_powers,
            z,
        })
    }

    pub fn grid(&self) -> &ChannelGrid {
        &self.grid
    }

    pub fn powers(&self) -> &[f64] {
        &self.ase_powers
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn total(&self) -> f64 {
        self.ase_powers.iter().sum()
    }
}

/// Single-stage amplifier noise model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AseModel {
    /// h·f·NF·(G − 1)·B_ref
    #[default]
    GainMinusOne,
    /// h·f·(G·NF − 1)·B_ref
    GainTimesNfMinusOne,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AseConfig {
    pub model: AseModel,
    /// Reference bandwidth in Hz; `None` uses the channel spacing.
    pub reference_bandwidth: Option<f64>,
}

impl Default for AseConfig {
    fn default() -> Self {
        Self {
            model: AseModel::GainMinusOne,
            reference_bandwidth: None,
        }
    }
}

impl AseConfig {
    fn bandwidth(&self, grid: &ChannelGrid) -> f64 {
        self.reference_bandwidth.unwrap_or(grid.spacing() * 1e12)
    }
}

/// ASE power (W) added by one amplifier stage with linear gain `gain` and
/// linear noise figure `nf` at `frequency` THz.
pub fn ase_power(model: AseModel, frequency: f64, nf: f64, gain: f64, bandwidth: f64) -> f64 {
    let photon = PLANCK * frequency * 1e12;
    let excess = match model {
        AseModel::GainMinusOne => nf * (gain - 1.0),
        AseModel::GainTimesNfMinusOne => gain * nf - 1.0,
    };
    photon * excess.max(0.0) * bandwidth
}

/// Per-channel injection of `amp` applying `gains`.
fn injection(
    amp: &Amplifier,
    gains: &[f64],
    grid: &ChannelGrid,
    config: &AseConfig,
) -> Result<Vec<f64>> {
    let bandwidth = config.bandwidth(grid);
    let nf_per_band = grid
        .bands()
        .iter()
        .map(|b| amp.noise_figure(&b.name))
        .collect::<Result<Vec<_>>>()?;
    Ok(gains
        .iter()
        .enumerate()
        .map(|(i, g)| {
            ase_power(
                config.model,
                grid.frequency(i),
                nf_per_band[grid.band_of(i)],
                *g,
                bandwidth,
            )
        })
        .collect())
}

/// Noise at the link end for a recorded signal evolution.
///
/// `trace` may come from either the closed-form or the numerical
/// propagation of `link`. The transmitter is noiseless.
pub fn ase_accumulate(
    link: &LinkSpec,
    trace: &LinkTrace,
    config: &AseConfig,
) -> Result<NoiseSpectrum> {
    if trace.spans.len() != link.spans.len() || trace.gains.len() != link.amplifiers.len() {
        return Err(Error::Config(format!(
            "trace with {} spans and {} amplifiers does not match a link with {} spans",
            trace.spans.len(),
            trace.gains.len(),
            link.spans.len()
        )));
    }
    let grid = trace.received.grid_arc().clone();
    let mut noise = vec![0.0; grid.len()];
    for (k, span) in trace.spans.iter().enumerate() {
        for ((n, out), inp) in noise
            .iter_mut()
            .zip(span.output.powers())
            .zip(span.input.powers())
        {
            *n = if *inp > 0.0 { *n * out / inp } else { 0.0 };
        }
        if let Some(amp) = link.amplifiers.get(k) {
            let gains = &trace.gains[k];
            let added = injection(amp, gains, &grid, config)?;
            for ((n, g), a) in noise.iter_mut().zip(gains).zip(added) {
                *n = *n * g + a;
            }
        }
    }
    if let Some(gains) = &trace.receiver_gain {
        let added = match &link.receiver_boost {
            ReceiverBoost::Amplified(amp) => injection(amp, gains, &grid, config)?,
            _ => vec![0.0; grid.len()],
        };
        for ((n, g), a) in noise.iter_mut().zip(gains).zip(added) {
            *n = *n * g + a;
        }
    }
    NoiseSpectrum::new(grid, noise, trace.received.z())
}

/// Linear OSNR per channel, signal over ASE in the reference bandwidth.
pub fn osnr_profile(signal: &PowerSpectrum, noise: &NoiseSpectrum) -> Result<Vec<f64>> {
    if signal.len() != noise.ase_powers.len() {
        return Err(Error::GridMismatch {
            expected: signal.len(),
            got: noise.ase_powers.len(),
        });
    }
    signal
        .powers()
        .iter()
        .zip(&noise.ase_powers)
        .enumerate()
        .map(|(i, (s, n))| {
            if *n > 0.0 {
                Ok(s / n)
            } else {
                Err(Error::UndefinedOsnr(i))
            }
        })
        .collect()
}

/// Values divided by their mean.
pub fn normalize_to_mean(values: &[f64]) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| v / mean).collect()
}

/// Domain in which the normalized-OSNR error is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RmseDomain {
    #[default]
    Linear,
    Db,
}

/// RMSE between two mean-normalized profiles.
pub fn normalized_rmse(target: &[f64], estimate: &[f64], domain: RmseDomain) -> f64 {
    let map = |v: f64| match domain {
        RmseDomain::Linear => v,
        RmseDomain::Db => 10.0 * v.log10(),
    };
    let sum: f64 = target
        .iter()
        .zip(estimate)
        .map(|(t, e)| (map(*t) - map(*e)).powi(2))
        .sum();
    (sum / target.len() as f64).sqrt()
}

/// Peak-to-peak spread (dB) of a linear profile.
pub fn peak_to_peak_db(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    10.0 * (max / min).log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OsnrTargetOptions {
    /// Update exponent ξ.
    pub step: f64,
    /// RMSE threshold on the normalized OSNR.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub order: u32,
    pub ase: AseConfig,
    pub domain: RmseDomain,
}

impl Default for OsnrTargetOptions {
    fn default() -> Self {
        Self {
            step: 1.0,
            tolerance: 1e-5,
            max_iterations: 20,
            order: 3,
            ase: AseConfig::default(),
            domain: RmseDomain::Linear,
        }
    }
}

/// Outcome of a converged OSNR targeting run.
#[derive(Debug, Clone, PartialEq)]
pub struct OsnrTargetRun {
    /// Mean-normalized target OSNR shape.
    pub target: Vec<f64>,
    pub step: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// RMSE after each iteration.
    pub history: Vec<f64>,
    pub launch: PowerSpectrum,
    /// Received signal (after the receiver stage) of the final iterate.
    pub received: PowerSpectrum,
    pub noise: NoiseSpectrum,
    /// Linear OSNR of the final iterate.
    pub osnr: Vec<f64>,
}

/// Closed-form received signal, noise and OSNR for a launch.
#[derive(Debug, Clone, PartialEq)]
pub struct OsnrEstimate {
    pub received: PowerSpectrum,
    pub noise: NoiseSpectrum,
    pub osnr: Vec<f64>,
}

/// Forward closed-form propagation plus ASE accumulation.
pub fn estimate_osnr(
    launch: &PowerSpectrum,
    link: &LinkSpec,
    order: u32,
    ase: &AseConfig,
) -> Result<OsnrEstimate> {
    let forward = propagate_multispan_closedform(launch, link, order)?;
    let noise = ase_accumulate(link, &forward.trace, ase)?;
    let osnr = osnr_profile(&forward.trace.received, &noise)?;
    Ok(OsnrEstimate {
        received: forward.trace.received,
        noise,
        osnr,
    })
}

/// Launch (total power `launch_total`) whose received OSNR has the shape of
/// `target`.
///
/// The normalized received signal shape starts equal to the target OSNR
/// shape and is updated as `S̄ ← S̄·(target/estimate)^ξ` until the RMSE of
/// the mean-normalized OSNR drops below the tolerance.
pub fn target_osnr(
    target: &TargetSpectrum,
    link: &LinkSpec,
    launch_total: f64,
    options: &OsnrTargetOptions,
) -> Result<OsnrTargetRun> {
    if !(options.step > 0.0 && options.step.is_finite()) {
        return Err(Error::Config(format!(
            "step factor must be positive, got {}",
            options.step
        )));
    }
    if !(options.tolerance > 0.0) {
        return Err(Error::Config(format!(
            "RMSE tolerance must be positive, got {}",
            options.tolerance
        )));
    }
    if !target.is_normalized() {
        return Err(Error::Config(
            "an OSNR target is a shape; supply it normalized".into(),
        ));
    }
    let grid = target.grid().clone();
    let wanted = normalize_to_mean(target.values());
    let mut shape = target.clone();
    let mut history = Vec::with_capacity(options.max_iterations);
    for _ in 0..options.max_iterations {
        let launch = preemphasis_multispan(&shape, link, launch_total, options.order)?.launch;
        let estimate = estimate_osnr(&launch, link, options.order, &options.ase)?;
        let normalized = normalize_to_mean(&estimate.osnr);
        let rmse = normalized_rmse(&wanted, &normalized, options.domain);
        history.push(rmse);
        if rmse < options.tolerance {
            return Ok(OsnrTargetRun {
                target: wanted,
                step: options.step,
                tolerance: options.tolerance,
                max_iterations: options.max_iterations,
                history,
                launch,
                received: estimate.received,
                noise: estimate.noise,
                osnr: estimate.osnr,
            });
        }
        let next: Vec<f64> = shape
            .values()
            .iter()
            .zip(wanted.iter().zip(&normalized))
            .map(|(s, (t, e))| s * (t / e).powf(options.step))
            .collect();
        shape = TargetSpectrum::shape(grid.clone(), next)?;
    }
    Err(Error::NotConverged { history })
}
