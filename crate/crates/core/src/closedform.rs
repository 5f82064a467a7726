//! Closed-form single-span power profile under ISRS and frequency-dependent
//! loss.
//!
//! Each channel evolves as
//!
//! ```text
//! P_i(z) = P_i(0) · exp( −α_i·z + c_R·(Γ_ref − Γ_i)·P_T(0)·(1 − e^{−α₀z})/α₀ )
//! ```
//!
//! where Γ is the shaping function (cumulative window-power imbalance, see
//! [`shaping_function`]), α₀ is the effective decay rate of the total power
//! (an order-n power mean of α weighted by the spectrum) and Γ_ref is the
//! shaping value of the channel that sees no net ISRS tilt, chosen so the
//! n-th total-power moment decays exponentially.

use crate::error::{Error, Result};
use crate::profiles::{AttenuationProfile, FiberSpec};
use crate::spectrum::PowerSpectrum;

/// How Γ_ref is evaluated along the span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceMode {
    /// Γ_ref fixed to its value at the span end and held over the span.
    #[default]
    SpanEnd,
    /// Γ_ref recomputed at every queried position.
    Longitudinal,
}

/// Which end of the span the parameters were estimated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Launch,
    Output,
}

/// Quantities derived once per span and reused at every z.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormParams {
    /// Effective total-power decay rate α₀ (1/km).
    pub alpha0: f64,
    pub order: u32,
    /// Shaping values Γ(f_i) in THz.
    pub gamma: Vec<f64>,
    /// Γ(f_R) in THz.
    pub gamma_ref: f64,
    /// (1 − e^{−α₀L})/α₀ in km.
    pub effective_length: f64,
    /// Total power (W) at the anchor end: P_T(0) for launch-derived
    /// parameters, P_T(L) for output-derived ones.
    pub total_power: f64,
    pub length: f64,
    /// Raman slope c_R (1/W/km/THz).
    pub slope: f64,
    /// α(f_i) in 1/km.
    pub attenuation: Vec<f64>,
    pub anchor: Anchor,
    pub reference: ReferenceMode,
}

/// `(1 − e^{−a·z})/a`, continuous at a = 0.
pub(crate) fn effective_length(alpha0: f64, z: f64) -> f64 {
    let x = alpha0 * z;
    if x.abs() < 1e-12 {
        z
    } else {
        -(-x).exp_m1() / alpha0
    }
}

fn check_order(order: u32) -> Result<()> {
    if order == 0 {
        Err(Error::InvalidOrder)
    } else {
        Ok(())
    }
}

fn positive_total(spectrum: &PowerSpectrum) -> Result<f64> {
    let total = spectrum.total();
    if total > 0.0 {
        Ok(total)
    } else {
        Err(Error::ZeroTotalPower)
    }
}

/// Splits Δ_R/B_s into the forward and backward edge offsets (floor, ceil),
/// snapping ratios that are integers up to rounding.
fn edge_offsets(ratio: f64) -> (usize, usize) {
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        (nearest as usize, nearest as usize)
    } else {
        (ratio.floor() as usize, ratio.ceil() as usize)
    }
}

/// Shaping function Γ(f_i) (THz) of a spectrum for a Raman window Δ_R (THz).
///
/// The spectrum is treated as a piecewise-constant density `P_k/B_s` over
/// each channel bin. For every channel the window power P_Δ is the exact
/// integral of that density over `[f_j − Δ_R, f_j + Δ_R]`, and
///
/// ```text
/// Γ(f_i) = Σ_{j≤i} [ B_s·P_Δ(f_j) − Δ_R·(P_{j+m} + P_{j−m'}) ] / P_T
/// ```
///
/// with `m = ⌊Δ_R/B_s⌋`, `m' = ⌈Δ_R/B_s⌉` and out-of-grid powers zero. The
/// bracket is the f-derivative of the triangular ISRS kernel integral, so
/// the edge powers at both ends of the window enter with the same sign.
pub fn shaping_function(spectrum: &PowerSpectrum, window: f64) -> Result<Vec<f64>> {
    let total = positive_total(spectrum)?;
    if !(window > 0.0) {
        return Err(Error::Config(format!(
            "Raman window must be positive, got {window}"
        )));
    }
    let powers = spectrum.powers();
    let n = powers.len();
    let spacing = spectrum.grid().spacing();
    let ratio = window / spacing;
    let (m_up, m_down) = edge_offsets(ratio);

    let mut cumulative = Vec::with_capacity(n + 1);
    cumulative.push(0.0);
    let mut acc = 0.0;
    for &p in powers {
        acc += p;
        cumulative.push(acc);
    }
    // Power of the density integrated from the lower grid edge up to `y`
    // channel bins.
    let integral_to = |y: f64| -> f64 {
        if y <= 0.0 {
            0.0
        } else if y >= n as f64 {
            cumulative[n]
        } else {
            let k = y.floor() as usize;
            cumulative[k] + (y - k as f64) * powers[k]
        }
    };

    let mut gamma = Vec::with_capacity(n);
    let mut running = 0.0;
    for j in 0..n {
        let center = j as f64 + 0.5;
        let window_power = integral_to(center + ratio) - integral_to(center - ratio);
        let upper = powers.get(j + m_up).copied().unwrap_or(0.0);
        let lower = j.checked_sub(m_down).map_or(0.0, |k| powers[k]);
        running += spacing * window_power - window * (upper + lower);
        gamma.push(running / total);
    }
    Ok(gamma)
}

/// Order-n power mean of α weighted by the normalized spectrum.
pub(crate) fn power_mean(alpha: &[f64], powers: &[f64], total: f64, order: u32) -> f64 {
    let n = order as i32;
    let moment: f64 = alpha
        .iter()
        .zip(powers)
        .map(|(a, p)| a.powi(n) * p)
        .sum::<f64>()
        / total;
    moment.powf(1.0 / order as f64)
}

/// α₀ = (Σ α(f_i)ⁿ P_i / P_T)^{1/n}.
pub fn total_attenuation_coefficient(
    spectrum: &PowerSpectrum,
    attenuation: &AttenuationProfile,
    order: u32,
) -> Result<f64> {
    check_order(order)?;
    let total = positive_total(spectrum)?;
    let alpha = attenuation.per_channel_allow_lossless(spectrum.grid())?;
    Ok(power_mean(&alpha, spectrum.powers(), total, order))
}

/// Moment weights α_iⁿ P_i / (α₀ⁿ P_T); plain power fractions when lossless.
pub(crate) fn moment_weights(
    alpha: &[f64],
    powers: &[f64],
    total: f64,
    alpha0: f64,
    order: u32,
) -> Vec<f64> {
    if alpha0 > 0.0 {
        let n = order as i32;
        let scale = alpha0.powi(n) * total;
        alpha
            .iter()
            .zip(powers)
            .map(|(a, p)| a.powi(n) * p / scale)
            .collect()
    } else {
        powers.iter().map(|p| p / total).collect()
    }
}

/// Γ_ref from launch-side quantities evaluated at position `z`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gamma_ref_at(
    alpha: &[f64],
    powers: &[f64],
    total: f64,
    gamma: &[f64],
    alpha0: f64,
    order: u32,
    slope: f64,
    z: f64,
) -> f64 {
    let weights = moment_weights(alpha, powers, total, alpha0, order);
    let raman = slope * total * effective_length(alpha0, z);
    let exponents: Vec<f64> = alpha
        .iter()
        .zip(gamma)
        .map(|(a, g)| (alpha0 - a) * z - raman * g)
        .collect();
    -log_sum_exp(&weights, &exponents) / raman
}

/// ln Σ w_i e^{x_i} for weights summing to one, with max subtraction.
///
/// The sum is renormalized by Σ w_i (one up to rounding) and accumulated
/// through `expm1`/`ln_1p`, so exponents of order 1e-10 keep full relative
/// precision; Γ_ref divides this value by a possibly tiny Raman exponent.
fn log_sum_exp(weights: &[f64], exponents: &[f64]) -> f64 {
    let max = weights
        .iter()
        .zip(exponents)
        .filter(|(w, _)| **w > 0.0)
        .map(|(_, x)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    let norm: f64 = weights.iter().sum();
    let excess: f64 = weights
        .iter()
        .zip(exponents)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, x)| w * (x - max).exp_m1())
        .sum::<f64>()
        / norm;
    max + excess.ln_1p()
}

/// Γ(f_R) at the span end: the shaping value that makes Σ α_iⁿ P_i(L) equal
/// α₀ⁿ P_T(0) e^{−α₀L}.
pub fn gamma_ref(
    spectrum: &PowerSpectrum,
    gamma: &[f64],
    alpha0: f64,
    order: u32,
    fiber: &FiberSpec,
    slope: f64,
) -> Result<f64> {
    check_order(order)?;
    if slope == 0.0 {
        return Err(Error::RamanFree);
    }
    if !(alpha0 > 0.0) {
        return Err(Error::Config(format!("α₀ must be positive, got {alpha0}")));
    }
    if gamma.len() != spectrum.len() {
        return Err(Error::GridMismatch {
            expected: spectrum.len(),
            got: gamma.len(),
        });
    }
    let total = positive_total(spectrum)?;
    let alpha = fiber
        .attenuation
        .per_channel_allow_lossless(spectrum.grid())?;
    Ok(gamma_ref_at(
        &alpha,
        spectrum.powers(),
        total,
        gamma,
        alpha0,
        order,
        slope,
        fiber.length,
    ))
}

impl ClosedFormParams {
    /// Parameters of one span from its launch spectrum.
    pub fn from_launch(launch: &PowerSpectrum, fiber: &FiberSpec, order: u32) -> Result<Self> {
        check_order(order)?;
        let total = positive_total(launch)?;
        let alpha = fiber
            .attenuation
            .per_channel_allow_lossless(launch.grid())?;
        let alpha0 = power_mean(&alpha, launch.powers(), total, order);
        let gamma = shaping_function(launch, fiber.raman.window())?;
        let slope = fiber.raman.slope();
        let gamma_ref = if slope == 0.0 {
            0.0
        } else {
            gamma_ref_at(
                &alpha,
                launch.powers(),
                total,
                &gamma,
                alpha0,
                order,
                slope,
                fiber.length,
            )
        };
        Ok(Self {
            alpha0,
            order,
            gamma,
            gamma_ref,
            effective_length: effective_length(alpha0, fiber.length),
            total_power: total,
            length: fiber.length,
            slope,
            attenuation: alpha,
            anchor: Anchor::Launch,
            reference: ReferenceMode::SpanEnd,
        })
    }

    pub fn with_reference(mut self, reference: ReferenceMode) -> Self {
        self.reference = reference;
        self
    }

    /// Exponential estimate of the total power, P_T(0)·e^{−α₀z}.
    pub fn total_power_at(&self, z: f64) -> f64 {
        match self.anchor {
            Anchor::Launch => self.total_power * (-self.alpha0 * z).exp(),
            Anchor::Output => self.total_power * (self.alpha0 * (self.length - z)).exp(),
        }
    }

    /// Launch-side total power P_T(0).
    pub fn launch_total_power(&self) -> f64 {
        self.total_power_at(0.0)
    }

    /// Per-channel log gain ln(P_i(z)/P_i(0)) using launch-side Γ_ref at z.
    fn log_gains(&self, launch: &PowerSpectrum, z: f64) -> Vec<f64> {
        let launch_total = self.launch_total_power();
        let raman = self.slope * launch_total * effective_length(self.alpha0, z);
        let gamma_ref = match self.reference {
            ReferenceMode::SpanEnd => self.gamma_ref,
            ReferenceMode::Longitudinal if self.slope != 0.0 && z > 0.0 => gamma_ref_at(
                &self.attenuation,
                launch.powers(),
                launch.total(),
                &self.gamma,
                self.alpha0,
                self.order,
                self.slope,
                z,
            ),
            ReferenceMode::Longitudinal => self.gamma_ref,
        };
        self.attenuation
            .iter()
            .zip(&self.gamma)
            .map(|(a, g)| -a * z + raman * (gamma_ref - g))
            .collect()
    }
}

/// Closed-form spectrum at position `z` in `[0, L]`.
pub fn power_profile(
    launch: &PowerSpectrum,
    params: &ClosedFormParams,
    z: f64,
) -> Result<PowerSpectrum> {
    if !(0.0..=params.length).contains(&z) {
        return Err(Error::PositionOutOfRange {
            z,
            length: params.length,
        });
    }
    if params.gamma.len() != launch.len() {
        return Err(Error::GridMismatch {
            expected: params.gamma.len(),
            got: launch.len(),
        });
    }
    if z == 0.0 {
        return Ok(launch.clone().with_z(0.0));
    }
    let powers = launch
        .powers()
        .iter()
        .zip(params.log_gains(launch, z))
        .map(|(p, g)| p * g.exp())
        .collect();
    Ok(PowerSpectrum::from_parts(
        launch.grid_arc().clone(),
        powers,
        z,
    ))
}

/// Closed-form spectra at each position in `positions`.
pub fn longitudinal_profile(
    launch: &PowerSpectrum,
    params: &ClosedFormParams,
    positions: &[f64],
) -> Result<Vec<PowerSpectrum>> {
    positions
        .iter()
        .map(|&z| power_profile(launch, params, z))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{build_channel_grid, Band, ChannelGrid, RamanGainModel};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn fiber(att: AttenuationProfile, slope: f64, length: f64) -> FiberSpec {
        FiberSpec::new(
            att,
            RamanGainModel::triangular(slope, 15.5).unwrap(),
            length,
        )
        .unwrap()
    }

    fn two_channel(powers: [f64; 2]) -> PowerSpectrum {
        let grid = build_channel_grid(&[Band::new("x", 193.0, 194.0)], 0.5).unwrap();
        PowerSpectrum::new(Arc::new(grid), powers.to_vec(), 0.0).unwrap()
    }

    #[test]
    fn alpha0_examples() {
        let s = two_channel([1e-3, 1e-3]);
        let grid = s.grid().clone();
        // α = 0.04 at the lower channel, 0.06 at the upper.
        let f0 = grid.frequency(0);
        let f1 = grid.frequency(1);
        let att = AttenuationProfile::tabulated_db(&[
            (f0, crate::profiles::units::per_km_to_db_per_km(0.04)),
            (f1, crate::profiles::units::per_km_to_db_per_km(0.06)),
        ])
        .unwrap();
        assert_relative_eq!(
            total_attenuation_coefficient(&s, &att, 1).unwrap(),
            0.05,
            max_relative = 1e-12
        );
        // ((0.04³ + 0.06³)/2)^(1/3), evaluated by hand.
        let expected = ((0.04f64.powi(3) + 0.06f64.powi(3)) / 2.0).cbrt();
        assert_relative_eq!(expected, 0.051925, max_relative = 1e-5);
        assert_relative_eq!(
            total_attenuation_coefficient(&s, &att, 3).unwrap(),
            expected,
            max_relative = 1e-12
        );
        assert_eq!(
            total_attenuation_coefficient(&s, &att, 0).unwrap_err(),
            Error::InvalidOrder
        );
    }

    #[test]
    fn alpha0_constant_profile() {
        let grid = Arc::new(ChannelGrid::standard("CLU", 0.05).unwrap());
        let powers = (0..grid.len())
            .map(|i| 1e-4 * (1.0 + (i % 7) as f64))
            .collect();
        let s = PowerSpectrum::new(grid, powers, 0.0).unwrap();
        for n in 1..=6 {
            let a0 =
                total_attenuation_coefficient(&s, &AttenuationProfile::Constant(0.046), n).unwrap();
            assert_relative_eq!(a0, 0.046, max_relative = 1e-12);
        }
    }

    #[test]
    fn narrow_band_gamma_is_offset_from_lower_edge() {
        let grid = Arc::new(ChannelGrid::standard("C", 0.05).unwrap());
        let powers = (0..grid.len())
            .map(|i| 1e-4 * (1.0 + (i % 5) as f64))
            .collect();
        let s = PowerSpectrum::new(grid.clone(), powers, 0.0).unwrap();
        let gamma = shaping_function(&s, 15.5).unwrap();
        for (g, f) in gamma.iter().zip(grid.frequencies()) {
            assert!((g - (f - grid.f_min())).abs() <= grid.spacing());
        }
    }

    #[test]
    fn single_channel_gamma_is_one_bin() {
        let grid = build_channel_grid(&[Band::new("x", 193.0, 193.05)], 0.05).unwrap();
        let s = PowerSpectrum::new(Arc::new(grid), vec![1e-3], 0.0).unwrap();
        let gamma = shaping_function(&s, 15.5).unwrap();
        assert_relative_eq!(gamma[0], 0.05, max_relative = 1e-12);
    }

    #[test]
    fn zero_power_errors() {
        let s = two_channel([0.0, 0.0]);
        assert_eq!(
            shaping_function(&s, 15.5).unwrap_err(),
            Error::ZeroTotalPower
        );
    }

    /// Continuum reference for Γ: trapezoid-free midpoint quadrature of the
    /// window-power imbalance on a grid ten times finer than the channels,
    /// integrated up to each channel's upper bin edge.
    fn gamma_quadrature(s: &PowerSpectrum, window: f64, refine: usize) -> Vec<f64> {
        let grid = s.grid();
        let bs = grid.spacing();
        let (lo, hi) = (grid.f_min(), grid.f_max());
        let p = s.powers();
        let density = |f: f64| -> f64 {
            if f < lo || f >= hi {
                0.0
            } else {
                let k = (((f - lo) / bs).floor() as usize).min(p.len() - 1);
                p[k] / bs
            }
        };
        // ∫_a^b density, by sub-bin summation.
        let integral = |a: f64, b: f64| -> f64 {
            let (a, b) = (a.max(lo), b.min(hi));
            if b <= a {
                return 0.0;
            }
            p.iter()
                .enumerate()
                .map(|(k, pk)| {
                    let (l, r) = (lo + k as f64 * bs, lo + (k + 1) as f64 * bs);
                    let overlap = (b.min(r) - a.max(l)).max(0.0);
                    pk * overlap / bs
                })
                .sum()
        };
        let h = bs / refine as f64;
        let total = s.total();
        let mut out = Vec::with_capacity(p.len());
        let mut acc = 0.0;
        for k in 0..p.len() {
            for sub in 0..refine {
                let f = lo + k as f64 * bs + (sub as f64 + 0.5) * h;
                let beta = integral(f - window, f + window)
                    - window * (density(f + window) + density(f - window));
                acc += beta * h;
            }
            out.push(acc / total);
        }
        out
    }

    #[test]
    fn flat_clu_gamma_matches_fine_quadrature() {
        let grid = Arc::new(ChannelGrid::standard("CLU", 0.05).unwrap());
        let s = PowerSpectrum::flat_dbm(grid, -1.0).unwrap();
        let gamma = shaping_function(&s, 15.5).unwrap();
        let reference = gamma_quadrature(&s, 15.5, 10);
        for (i, (g, r)) in gamma.iter().zip(&reference).enumerate() {
            assert!(
                ((g - r) / r).abs() < 0.01,
                "channel {i}: discrete {g} vs quadrature {r}"
            );
        }
    }

    #[test]
    fn gamma_ref_small_power_is_band_center() {
        let grid = Arc::new(ChannelGrid::standard("C", 0.05).unwrap());
        let s = PowerSpectrum::flat(grid.clone(), 1e-12).unwrap();
        let f = fiber(AttenuationProfile::Constant(0.046), 0.0286, 100.0);
        let gamma = shaping_function(&s, 15.5).unwrap();
        let gr = gamma_ref(&s, &gamma, 0.046, 3, &f, 0.0286).unwrap();
        let mean: f64 = gamma.iter().sum::<f64>() / gamma.len() as f64;
        assert_relative_eq!(gr, mean, max_relative = 1e-6);
        // Band center offset f̄ − f_min, up to the half-bin offset of Γ.
        let center = grid.frequencies().iter().sum::<f64>() / grid.len() as f64 - grid.f_min();
        assert!((gr - center).abs() <= 0.5 * grid.spacing() + 1e-9);
    }

    #[test]
    fn gamma_ref_closed_form_for_flat_narrow_band() {
        let grid = Arc::new(ChannelGrid::standard("C", 0.05).unwrap());
        let s = PowerSpectrum::flat_dbm(grid.clone(), -1.0).unwrap();
        let alpha = 0.046;
        let f = fiber(AttenuationProfile::Constant(alpha), 0.0286, 100.0);
        let gamma = shaping_function(&s, 15.5).unwrap();
        let gr = gamma_ref(&s, &gamma, alpha, 3, &f, 0.0286).unwrap();
        let pt = s.total();
        let leff = (1.0 - (-alpha * 100.0f64).exp()) / alpha;
        let k = 0.0286 * pt * leff;
        let n = gamma.len() as f64;
        let expected = -(gamma.iter().map(|g| (-k * g).exp()).sum::<f64>() / n).ln() / k;
        assert_relative_eq!(gr, expected, max_relative = 1e-12);
    }

    #[test]
    fn gamma_ref_series_limit_with_varying_loss() {
        // As ε = c_R·P_T·L_eff → 0:
        //   Γ_ref ≈ −ln(Σ w e^{a})/ε + Σ w e^{a} Γ / Σ w e^{a} + O(ε),
        // with a_i = (α₀ − α_i)L and w the moment weights.
        let grid = Arc::new(ChannelGrid::standard("CL", 0.05).unwrap());
        let s = PowerSpectrum::flat(grid.clone(), 1e-10).unwrap();
        let att = AttenuationProfile::standard_smf();
        let f = fiber(att.clone(), 0.0286, 80.0);
        let alpha = att.per_channel(&grid).unwrap();
        let a0 = total_attenuation_coefficient(&s, &att, 3).unwrap();
        let gamma = shaping_function(&s, 15.5).unwrap();
        let gr = gamma_ref(&s, &gamma, a0, 3, &f, 0.0286).unwrap();

        let pt = s.total();
        let eps = 0.0286 * pt * effective_length(a0, 80.0);
        let w: Vec<f64> = alpha
            .iter()
            .map(|a| a.powi(3) * (pt / grid.len() as f64) / (a0.powi(3) * pt))
            .collect();
        let ea: Vec<f64> = alpha.iter().map(|a| ((a0 - a) * 80.0).exp()).collect();
        let z: f64 = w.iter().zip(&ea).map(|(w, e)| w * e).sum();
        let mean_gamma: f64 = w
            .iter()
            .zip(&ea)
            .zip(&gamma)
            .map(|((w, e), g)| w * e * g)
            .sum::<f64>()
            / z;
        let series = -z.ln() / eps + mean_gamma;
        assert!(
            (gr - series).abs() < 1e-3 * series.abs(),
            "{gr} vs series {series}"
        );
    }

    #[test]
    fn gamma_ref_rejects_raman_free() {
        let s = two_channel([1e-3, 1e-3]);
        let f = fiber(AttenuationProfile::Constant(0.046), 0.0, 100.0);
        let gamma = shaping_function(&s, 15.5).unwrap();
        assert_eq!(
            gamma_ref(&s, &gamma, 0.046, 3, &f, 0.0).unwrap_err(),
            Error::RamanFree
        );
    }

    #[test]
    fn profile_identity_and_raman_free_path() {
        let grid = Arc::new(ChannelGrid::standard("CLU", 0.05).unwrap());
        let s = PowerSpectrum::flat_dbm(grid.clone(), -1.0).unwrap();
        let att = AttenuationProfile::standard_smf();
        let f = fiber(att.clone(), 0.0286, 100.0);
        let params = ClosedFormParams::from_launch(&s, &f, 3).unwrap();
        assert_eq!(
            power_profile(&s, &params, 0.0).unwrap().powers(),
            s.powers()
        );
        assert!(matches!(
            power_profile(&s, &params, 100.5),
            Err(Error::PositionOutOfRange { .. })
        ));

        let free = fiber(att.clone(), 0.0, 100.0);
        let params = ClosedFormParams::from_launch(&s, &free, 3).unwrap();
        let out = power_profile(&s, &params, 60.0).unwrap();
        let alpha = att.per_channel(&grid).unwrap();
        for ((p, p0), a) in out.powers().iter().zip(s.powers()).zip(&alpha) {
            assert_relative_eq!(*p, p0 * (-a * 60.0).exp(), max_relative = 1e-12);
        }
    }

    #[test]
    fn params_invariants_on_clu() {
        let grid = Arc::new(ChannelGrid::standard("CLU", 0.05).unwrap());
        let s = PowerSpectrum::flat_dbm(grid.clone(), -1.0).unwrap();
        let att = AttenuationProfile::standard_smf();
        let f = fiber(att.clone(), 0.0286, 100.0);
        let params = ClosedFormParams::from_launch(&s, &f, 3).unwrap();
        let alpha = att.per_channel(&grid).unwrap();
        let (lo, hi) = alpha
            .iter()
            .fold((f64::MAX, f64::MIN), |(l, h), a| (l.min(*a), h.max(*a)));
        assert!(params.alpha0 >= lo && params.alpha0 <= hi);
        assert!(params.effective_length > 0.0 && params.effective_length < 100.0);
        assert_relative_eq!(
            params.effective_length,
            (1.0 - (-params.alpha0 * 100.0).exp()) / params.alpha0,
            max_relative = 1e-12
        );
        // Γ_ref enforces the n-th moment balance at the span end.
        let out = power_profile(&s, &params, 100.0).unwrap();
        let moment: f64 = alpha
            .iter()
            .zip(out.powers())
            .map(|(a, p)| a.powi(3) * p)
            .sum();
        let expected = params.alpha0.powi(3) * s.total() * (-params.alpha0 * 100.0).exp();
        assert_relative_eq!(moment, expected, max_relative = 1e-10);
    }

    #[test]
    fn longitudinal_reference_matches_span_end_at_l() {
        let grid = Arc::new(ChannelGrid::standard("CL", 0.05).unwrap());
        let s = PowerSpectrum::flat_dbm(grid, -1.0).unwrap();
        let f = fiber(AttenuationProfile::standard_smf(), 0.0286, 100.0);
        let fixed = ClosedFormParams::from_launch(&s, &f, 3).unwrap();
        let moving = fixed.clone().with_reference(ReferenceMode::Longitudinal);
        let a = power_profile(&s, &fixed, 100.0).unwrap();
        let b = power_profile(&s, &moving, 100.0).unwrap();
        for (x, y) in a.powers().iter().zip(b.powers()) {
            assert_relative_eq!(*x, *y, max_relative = 1e-10);
        }
        let mid_fixed = power_profile(&s, &fixed, 30.0).unwrap();
        let mid_moving = power_profile(&s, &moving, 30.0).unwrap();
        assert_ne!(mid_fixed.powers(), mid_moving.powers());
    }

    proptest! {
        #[test]
        fn alpha0_non_decreasing_in_order(
            powers in proptest::collection::vec(1e-6f64..1e-2, 81),
            curvature in 0.0f64..1e-3,
        ) {
            let grid = Arc::new(ChannelGrid::standard("C", 0.05).unwrap());
            let s = PowerSpectrum::new(grid, powers, 0.0).unwrap();
            let att = AttenuationProfile::parabolic_db(0.18, 190.0, curvature);
            let mut last = 0.0;
            for n in 1..=6 {
                let a0 = total_attenuation_coefficient(&s, &att, n).unwrap();
                prop_assert!(a0 >= last * (1.0 - 1e-12));
                last = a0;
            }
        }

        #[test]
        fn gamma_increasing_for_bands_narrower_than_window(
            powers in proptest::collection::vec(1e-6f64..1e-2, 223),
        ) {
            let grid = Arc::new(ChannelGrid::standard("CL", 0.05).unwrap());
            let s = PowerSpectrum::new(grid, powers, 0.0).unwrap();
            let gamma = shaping_function(&s, 15.5).unwrap();
            prop_assert!(gamma.windows(2).all(|w| w[1] > w[0]));
        }

        #[test]
        fn gamma_differences_are_shift_invariant(
            powers in proptest::collection::vec(1e-5f64..1e-3, 120),
            shift in -20.0f64..20.0,
        ) {
            let a = build_channel_grid(&[Band::new("a", 185.0, 191.0)], 0.05).unwrap();
            let b = build_channel_grid(&[Band::new("a", 185.0 + shift, 191.0 + shift)], 0.05).unwrap();
            let sa = PowerSpectrum::new(Arc::new(a), powers.clone(), 0.0).unwrap();
            let sb = PowerSpectrum::new(Arc::new(b), powers, 0.0).unwrap();
            let ga = shaping_function(&sa, 15.5).unwrap();
            let gb = shaping_function(&sb, 15.5).unwrap();
            for i in 1..ga.len() {
                prop_assert!(((ga[i] - ga[0]) - (gb[i] - gb[0])).abs() < 1e-9);
            }
        }

        #[test]
        fn gamma_is_scale_free(scale in 1e-3f64..1e3) {
            let grid = Arc::new(ChannelGrid::standard("CLU", 0.05).unwrap());
            let powers: Vec<f64> = (0..grid.len()).map(|i| 1e-4 * (1.0 + (i % 11) as f64)).collect();
            let s = PowerSpectrum::new(grid.clone(), powers.clone(), 0.0).unwrap();
            let t = PowerSpectrum::new(grid, powers.iter().map(|p| p * scale).collect(), 0.0).unwrap();
            let ga = shaping_function(&s, 15.5).unwrap();
            let gb = shaping_function(&t, 15.5).unwrap();
            for (x, y) in ga.iter().zip(&gb) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn vanishing_power_converges_to_attenuation_shape() {
        // With frequency-dependent loss the moment balance leaves a common
        // scale factor as P_T → 0; the spectral shape converges to e^{−α_i L}.
        let grid = Arc::new(ChannelGrid::standard("CLU", 0.05).unwrap());
        let att = AttenuationProfile::standard_smf();
        let alpha = att.per_channel(&grid).unwrap();
        let f = fiber(att, 0.0286, 100.0);
        let mut previous = f64::INFINITY;
        for scale in [1e-3, 1e-5, 1e-7, 1e-9] {
            let s = PowerSpectrum::flat(grid.clone(), scale).unwrap();
            let params = ClosedFormParams::from_launch(&s, &f, 3).unwrap();
            let out = power_profile(&s, &params, 100.0).unwrap();
            let logs: Vec<f64> = out
                .powers()
                .iter()
                .zip(&alpha)
                .map(|(p, a)| (p / (scale * (-a * 100.0).exp())).ln())
                .collect();
            let spread = logs.iter().cloned().fold(f64::MIN, f64::max)
                - logs.iter().cloned().fold(f64::MAX, f64::min);
            // The shape error is first order in the launch power.
            assert!(spread < previous / 50.0);
            previous = spread;
        }
        assert!(previous < 1e-4);
    }

    #[test]
    fn constant_loss_vanishing_power_is_pure_attenuation() {
        let grid = Arc::new(ChannelGrid::standard("CLU", 0.05).unwrap());
        let f = fiber(AttenuationProfile::Constant(0.046), 0.0286, 100.0);
        let s = PowerSpectrum::flat(grid, 1e-9).unwrap();
        let params = ClosedFormParams::from_launch(&s, &f, 3).unwrap();
        let out = power_profile(&s, &params, 100.0).unwrap();
        for p in out.powers() {
            assert_relative_eq!(*p, 1e-9 * (-4.6f64).exp(), max_relative = 1e-5);
        }
    }
}
