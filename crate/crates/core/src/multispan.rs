//! Uncompensated multi-span links: spans separated by in-line amplifiers
//! whose gain restores the launch total power.

use crate::closedform::{power_profile, ClosedFormParams};
use crate::error::{Error, Result};
use crate::profiles::units::db_to_linear;
use crate::profiles::{ChannelGrid, FiberSpec};
use crate::spectrum::PowerSpectrum;

#[derive(Debug, Clone, PartialEq)]
pub enum GainPolicy {
    /// One scalar gain restoring the whole-spectrum total power.
    RestoreTotal,
    /// One gain per band restoring each band's launch total power.
    PerBand,
    /// Fixed linear gain.
    Fixed(f64),
}

/// An optical amplifier: gain policy plus noise figure per band (dB).
#[derive(Debug, Clone, PartialEq)]
pub struct Amplifier {
    pub gain_policy: GainPolicy,
    pub noise_figures_db: Vec<(String, f64)>,
}

impl Amplifier {
    pub fn restore_total() -> Self {
        Self {
            gain_policy: GainPolicy::RestoreTotal,
            noise_figures_db: Vec::new(),
        }
    }

    pub fn with_noise_figure(mut self, band: impl Into<String>, nf_db: f64) -> Self {
        self.noise_figures_db.push((band.into(), nf_db));
        self
    }

    /// Linear noise figure for `band`; −∞ dB maps to an ideal noiseless stage.
    pub fn noise_figure(&self, band: &str) -> Result<f64> {
        self.noise_figures_db
            .iter()
            .find(|(name, _)| name == band)
            .map(|(_, nf)| db_to_linear(*nf))
            .ok_or_else(|| Error::MissingNoiseFigure(band.to_string()))
    }
}

/// Stage after the last span.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ReceiverBoost {
    /// The link ends at the last span output.
    #[default]
    Off,
    /// Noiseless scaling that restores the launch total power.
    Ideal,
    /// A real amplifier (adds ASE) restoring power per its gain policy.
    Amplified(Amplifier),
}

impl ReceiverBoost {
    pub(crate) fn gain_policy(&self) -> GainPolicy {
        match self {
            ReceiverBoost::Amplified(a) => a.gain_policy.clone(),
            _ => GainPolicy::RestoreTotal,
        }
    }
}

/// Ordered spans with the amplifiers between them.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub spans: Vec<FiberSpec>,
    /// In-line amplifiers; `amplifiers[k]` follows `spans[k]`.
    pub amplifiers: Vec<Amplifier>,
    pub receiver_boost: ReceiverBoost,
}

impl LinkSpec {
    pub fn new(
        spans: Vec<FiberSpec>,
        amplifiers: Vec<Amplifier>,
        receiver_boost: ReceiverBoost,
    ) -> Result<Self> {
        let link = Self {
            spans,
            amplifiers,
            receiver_boost,
        };
        link.check_counts()?;
        Ok(link)
    }

    /// `count` copies of `fiber` with identical amplifiers.
    pub fn homogeneous(
        fiber: FiberSpec,
        count: usize,
        amplifier: Amplifier,
        receiver_boost: ReceiverBoost,
    ) -> Result<Self> {
        Self::new(
            vec![fiber; count],
            vec![amplifier; count.saturating_sub(1)],
            receiver_boost,
        )
    }

    /// A one-span link with no receiver stage.
    pub fn single(fiber: FiberSpec) -> Self {
        Self {
            spans: vec![fiber],
            amplifiers: Vec::new(),
            receiver_boost: ReceiverBoost::Off,
        }
    }

    fn check_counts(&self) -> Result<()> {
        if self.spans.is_empty() {
            return Err(Error::Config("a link needs at least one span".into()));
        }
        if self.amplifiers.len() + 1 != self.spans.len() {
            return Err(Error::Config(format!(
                "{} spans need {} in-line amplifiers, got {}",
                self.spans.len(),
                self.spans.len() - 1,
                self.amplifiers.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn validate(&self, grid: &ChannelGrid) -> Result<()> {
        self.check_counts()?;
        for amp in self.amplifiers.iter().chain(match &self.receiver_boost {
            ReceiverBoost::Amplified(a) => Some(a),
            _ => None,
        }) {
            match amp.gain_policy {
                GainPolicy::Fixed(g) if !(g > 0.0 && g.is_finite()) => {
                    return Err(Error::Config(format!(
                        "fixed gain must be positive, got {g}"
                    )))
                }
                _ => {}
            }
            for (name, nf) in &amp.noise_figures_db {
                if !grid.bands().iter().any(|b| &b.name == name) {
                    return Err(Error::Config(format!(
                        "noise figure given for unknown band `{name}`"
                    )));
                }
                if nf.is_nan() || *nf == f64::INFINITY {
                    return Err(Error::Config(format!("noise figure for `{name}` is {nf}")));
                }
            }
        }
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        self.spans.iter().map(|s| s.length).sum()
    }

    /// Position (km) where span `k` starts.
    pub fn span_start(&self, k: usize) -> f64 {
        self.spans[..k].iter().map(|s| s.length).sum()
    }
}

/// Input and output spectra of one span.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanEvolution {
    pub input: PowerSpectrum,
    pub output: PowerSpectrum,
}

/// Span-by-span record of a link propagation, model independent.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTrace {
    pub spans: Vec<SpanEvolution>,
    /// Per-channel linear gain of each in-line amplifier.
    pub gains: Vec<Vec<f64>>,
    pub receiver_gain: Option<Vec<f64>>,
    /// Spectrum at the link end, after the receiver stage if any.
    pub received: PowerSpectrum,
}

/// Gain restoring total power `launch_total` from a span output.
pub fn span_gain(span_output: &PowerSpectrum, launch_total: f64) -> Result<f64> {
    let out = span_output.total();
    if !(out > 0.0) {
        return Err(Error::ZeroTotalPower);
    }
    Ok(launch_total / out)
}

/// Per-channel gains an amplifier applies to `output`, with the link launch
/// spectrum as the power reference.
pub(crate) fn apply_gain_policy(
    policy: &GainPolicy,
    output: &PowerSpectrum,
    launch: &PowerSpectrum,
) -> Result<Vec<f64>> {
    let n = output.len();
    match policy {
        GainPolicy::RestoreTotal => Ok(vec![span_gain(output, launch.total())?; n]),
        GainPolicy::Fixed(g) => Ok(vec![*g; n]),
        GainPolicy::PerBand => {
            let grid = output.grid();
            let mut gains = vec![1.0; n];
            for b in 0..grid.bands().len() {
                let range = grid.band_channels(b);
                let target: f64 = launch.powers()[range.clone()].iter().sum();
                let have: f64 = output.powers()[range.clone()].iter().sum();
                let g = if target == 0.0 {
                    1.0
                } else if have > 0.0 {
                    target / have
                } else {
                    return Err(Error::ZeroTotalPower);
                };
                gains[range].iter_mut().for_each(|x| *x = g);
            }
            Ok(gains)
        }
    }
}

/// Closed-form multi-span propagation result.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSpanResult {
    pub params: Vec<ClosedFormParams>,
    pub trace: LinkTrace,
    span_starts: Vec<f64>,
}

impl MultiSpanResult {
    /// Spectrum at the last span output (before any receiver stage).
    pub fn final_output(&self) -> &PowerSpectrum {
        &self.trace.spans.last().expect("at least one span").output
    }

    /// Spectrum at link position `z`, using the parameters of the span that
    /// contains it. Amplifier sites resolve to the end of the earlier span.
    pub fn profile_at(&self, z: f64) -> Result<PowerSpectrum> {
        let total: f64 = self.span_starts.last().unwrap() + self.params.last().unwrap().length;
        if !(0.0..=total).contains(&z) {
            return Err(Error::PositionOutOfRange { z, length: total });
        }
        let k = self
            .span_starts
            .iter()
            .rposition(|&start| start < z)
            .unwrap_or(0);
        let local = (z - self.span_starts[k]).min(self.params[k].length);
        Ok(power_profile(&self.trace.spans[k].input, &self.params[k], local)?.with_z(z))
    }
}

/// Forward closed-form recursion: per-span parameters from each span input,
/// span output from the single-span profile, next input from the amplifier.
pub fn propagate_multispan_closedform(
    launch: &PowerSpectrum,
    link: &LinkSpec,
    order: u32,
) -> Result<MultiSpanResult> {
    link.validate(launch.grid())?;
    let mut params = Vec::with_capacity(link.spans.len());
    let mut spans = Vec::with_capacity(link.spans.len());
    let mut gains = Vec::new();
    let mut span_starts = Vec::with_capacity(link.spans.len());
    let mut input = launch.clone().with_z(0.0);
    let mut z0 = 0.0;
    for (k, fiber) in link.spans.iter().enumerate() {
        let local_input = input.clone().with_z(0.0);
        let p = ClosedFormParams::from_launch(&local_input, fiber, order)?;
        let output = power_profile(&local_input, &p, fiber.length)?.with_z(z0 + fiber.length);
        span_starts.push(z0);
        spans.push(SpanEvolution {
            input: input.clone(),
            output: output.clone(),
        });
        params.push(p);
        z0 += fiber.length;
        if k + 1 < link.spans.len() {
            let g = apply_gain_policy(&link.amplifiers[k].gain_policy, &output, launch)?;
            input = output.amplified(&g);
            gains.push(g);
        } else {
            input = output;
        }
    }
    let receiver_gain = match &link.receiver_boost {
        ReceiverBoost::Off => None,
        boost => Some(apply_gain_policy(&boost.gain_policy(), &input, launch)?),
    };
    let received = match &receiver_gain {
        Some(g) => input.amplified(g),
        None => input,
    };
    Ok(MultiSpanResult {
        params,
        trace: LinkTrace {
            spans,
            gains,
            receiver_gain,
            received,
        },
        span_starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{AttenuationProfile, RamanGainModel};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn fiber(att: AttenuationProfile, slope: f64, length: f64) -> FiberSpec {
        FiberSpec::new(
            att,
            RamanGainModel::triangular(slope, 15.5).unwrap(),
            length,
        )
        .unwrap()
    }

    fn clu() -> Arc<ChannelGrid> {
        Arc::new(ChannelGrid::standard("CLU", 0.05).unwrap())
    }

    #[test]
    fn span_gain_examples() {
        let s = PowerSpectrum::flat_dbm(clu(), -1.0).unwrap();
        assert_eq!(span_gain(&s, s.total()).unwrap(), 1.0);
        let alpha = 0.046052;
        let out = s.scaled((-alpha * 50.0f64).exp());
        assert_relative_eq!(
            span_gain(&out, s.total()).unwrap(),
            (alpha * 50.0f64).exp(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            span_gain(&out, s.total()).unwrap(),
            10.0,
            max_relative = 1e-4
        );
        assert_eq!(
            span_gain(&s.scaled(0.0), 1.0).unwrap_err(),
            Error::ZeroTotalPower
        );
    }

    #[test]
    fn one_span_is_the_single_span_profile() {
        let s = PowerSpectrum::flat_dbm(clu(), -1.0).unwrap();
        let f = fiber(AttenuationProfile::standard_smf(), 0.0286, 100.0);
        let r = propagate_multispan_closedform(&s, &LinkSpec::single(f.clone()), 3).unwrap();
        let p = ClosedFormParams::from_launch(&s, &f, 3).unwrap();
        let direct = power_profile(&s, &p, 100.0).unwrap();
        assert_eq!(r.final_output().powers(), direct.powers());
        assert_eq!(r.trace.received.powers(), direct.powers());
    }

    #[test]
    fn flat_loss_is_a_fixed_point() {
        let s = PowerSpectrum::flat_dbm(clu(), -1.0).unwrap();
        let f = fiber(AttenuationProfile::Constant(0.046), 0.0, 50.0);
        let link =
            LinkSpec::homogeneous(f, 4, Amplifier::restore_total(), ReceiverBoost::Off).unwrap();
        let r = propagate_multispan_closedform(&s, &link, 3).unwrap();
        for span in &r.trace.spans {
            for (a, b) in span.input.powers().iter().zip(s.powers()) {
                assert_relative_eq!(*a, *b, max_relative = 1e-12);
            }
        }
        for p in &r.params {
            assert_relative_eq!(p.alpha0, 0.046, max_relative = 1e-12);
        }
    }

    #[test]
    fn restore_policy_keeps_span_input_power() {
        let s = PowerSpectrum::flat_dbm(clu(), -1.0).unwrap();
        let f = fiber(AttenuationProfile::standard_smf(), 0.0286, 50.0);
        let link =
            LinkSpec::homogeneous(f, 5, Amplifier::restore_total(), ReceiverBoost::Ideal).unwrap();
        let r = propagate_multispan_closedform(&s, &link, 3).unwrap();
        for span in &r.trace.spans {
            assert_relative_eq!(span.input.total(), s.total(), max_relative = 1e-12);
        }
        assert_relative_eq!(r.trace.received.total(), s.total(), max_relative = 1e-12);
        // Tilted inputs change α₀ from span to span.
        assert!((r.params[0].alpha0 - r.params[4].alpha0).abs() > 1e-6);
    }

    #[test]
    fn tilt_accumulates_over_spans() {
        let s = PowerSpectrum::flat_dbm(clu(), -1.0).unwrap();
        let f = fiber(AttenuationProfile::standard_smf(), 0.0286, 50.0);
        let link =
            LinkSpec::homogeneous(f, 5, Amplifier::restore_total(), ReceiverBoost::Off).unwrap();
        let r = propagate_multispan_closedform(&s, &link, 3).unwrap();
        let tilts: Vec<f64> = r
            .trace
            .spans
            .iter()
            .map(|sp| {
                let db = sp.output.to_dbm();
                db[0] - db[db.len() - 1]
            })
            .collect();
        assert!(tilts.windows(2).all(|w| w[1] > w[0]), "{tilts:?}");
    }

    #[test]
    fn per_band_policy_restores_each_band() {
        let g = clu();
        let s = PowerSpectrum::flat_dbm(g.clone(), -1.0).unwrap();
        let f = fiber(AttenuationProfile::standard_smf(), 0.0286, 50.0);
        let amp = Amplifier {
            gain_policy: GainPolicy::PerBand,
            noise_figures_db: Vec::new(),
        };
        let link = LinkSpec::homogeneous(f, 3, amp, ReceiverBoost::Off).unwrap();
        let r = propagate_multispan_closedform(&s, &link, 3).unwrap();
        for span in &r.trace.spans[1..] {
            for b in 0..g.bands().len() {
                let range = g.band_channels(b);
                let have: f64 = span.input.powers()[range.clone()].iter().sum();
                let want: f64 = s.powers()[range].iter().sum();
                assert_relative_eq!(have, want, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn profile_queries_use_owning_span() {
        let s = PowerSpectrum::flat_dbm(clu(), -1.0).unwrap();
        let f = fiber(AttenuationProfile::standard_smf(), 0.0286, 50.0);
        let link =
            LinkSpec::homogeneous(f, 3, Amplifier::restore_total(), ReceiverBoost::Off).unwrap();
        let r = propagate_multispan_closedform(&s, &link, 3).unwrap();
        assert_eq!(r.profile_at(0.0).unwrap().powers(), s.powers());
        assert_eq!(
            r.profile_at(50.0).unwrap().powers(),
            r.trace.spans[0].output.powers()
        );
        assert_eq!(
            r.profile_at(150.0).unwrap().powers(),
            r.final_output().powers()
        );
        let mid = r.profile_at(75.0).unwrap();
        assert_eq!(mid.z(), 75.0);
        assert!(r.profile_at(151.0).is_err());
    }

    #[test]
    fn amplifier_count_is_checked() {
        let f = fiber(AttenuationProfile::Constant(0.046), 0.0, 50.0);
        assert!(LinkSpec::new(
            vec![f.clone(); 3],
            vec![Amplifier::restore_total()],
            ReceiverBoost::Off
        )
        .is_err());
        assert!(LinkSpec::new(vec![], vec![], ReceiverBoost::Off).is_err());
    }

    #[test]
    fn noise_figure_lookup() {
        let amp = Amplifier::restore_total().with_noise_figure("C", 5.5);
        assert_relative_eq!(
            amp.noise_figure("C").unwrap(),
            10f64.powf(0.55),
            max_relative = 1e-12
        );
        assert_eq!(
            amp.noise_figure("L").unwrap_err(),
            Error::MissingNoiseFigure("L".into())
        );
    }
}
