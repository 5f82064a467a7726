//! Launch pre-emphasis: the launch spectrum that produces a requested
//! spectrum at the span (or link) output.
//!
//! The closed-form parameters are estimated from the output side:
//!
//! ```text
//! α₀     = (Σ α_iⁿ P_i(L) / P_T(L))^{1/n}
//! Γ_ref  = Σ Γ_i α_iⁿ P_i(L) / (α₀ⁿ P_T(L))
//! P_i(0) = P_i(L) · exp( α_i L − c_R (Γ_ref − Γ_i) P_T(L) (e^{α₀L} − 1)/α₀ )
//! ```

use std::sync::Arc;

use crate::closedform::{
    effective_length, power_mean, shaping_function, Anchor, ClosedFormParams, ReferenceMode,
};
use crate::error::{Error, Result};
use crate::multispan::{GainPolicy, LinkSpec};
use crate::profiles::{ChannelGrid, FiberSpec};
use crate::spectrum::PowerSpectrum;

/// Requested output spectrum: absolute powers (W) or a shape only.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpectrum {
    grid: Arc<ChannelGrid>,
    /// Absolute powers, or the shape scaled to mean one.
    values: Vec<f64>,
    normalized: bool,
}

impl TargetSpectrum {
    fn checked(grid: Arc<ChannelGrid>, values: Vec<f64>, normalized: bool) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!(
                "target value for channel {i} must be positive, got {}",
                values[i]
            )));
        }
        Ok(Self {
            grid,
            values,
            normalized,
        })
    }

    /// Absolute per-channel output powers in W.
    pub fn absolute(grid: Arc<ChannelGrid>, powers: Vec<f64>) -> Result<Self> {
        Self::checked(grid, powers, false)
    }

    /// A spectral shape; any overall scale is accepted and discarded.
    pub fn shape(grid: Arc<ChannelGrid>, values: Vec<f64>) -> Result<Self> {
        let mut target = Self::checked(grid, values, true)?;
        let mean = target.values.iter().sum::<f64>() / target.values.len() as f64;
        target.values.iter_mut().for_each(|v| *v /= mean);
        Ok(target)
    }

    /// Flat shape.
    pub fn flat(grid: Arc<ChannelGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![1.0; n],
            normalized: true,
        }
    }

    pub fn grid(&self) -> &Arc<ChannelGrid> {
        &self.grid
    }

    /// Stored values: W when absolute, mean-one shape when normalized.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// The target divided by its total (sums to one).
    pub fn unit_total(&self) -> PowerSpectrum {
        let total: f64 = self.values.iter().sum();
        PowerSpectrum::from_parts(
            self.grid.clone(),
            self.values.iter().map(|v| v / total).collect(),
            0.0,
        )
    }
}

/// Closed-form parameters estimated from the span output spectrum.
pub fn closedform_params_from_output(
    output: &PowerSpectrum,
    fiber: &FiberSpec,
    order: u32,
) -> Result<ClosedFormParams> {
    if order == 0 {
        return Err(Error::InvalidOrder);
    }
    let total = output.total();
    if !(total > 0.0) {
        return Err(Error::ZeroTotalPower);
    }
    let alpha = fiber
        .attenuation
        .per_channel_allow_lossless(output.grid())?;
    let alpha0 = power_mean(&alpha, output.powers(), total, order);
    let gamma = shaping_function(output, fiber.raman.window())?;
    let n = order as i32;
    let gamma_ref = if alpha0 > 0.0 {
        let scale = alpha0.powi(n) * total;
        alpha
            .iter()
            .zip(output.powers())
            .zip(&gamma)
            .map(|((a, p), g)| g * a.powi(n) * p)
            .sum::<f64>()
            / scale
    } else {
        output
            .powers()
            .iter()
            .zip(&gamma)
            .map(|(p, g)| g * p)
            .sum::<f64>()
            / total
    };
    Ok(ClosedFormParams {
        alpha0,
        order,
        gamma,
        gamma_ref,
        effective_length: effective_length(alpha0, fiber.length),
        total_power: total,
        length: fiber.length,
        slope: fiber.raman.slope(),
        attenuation: alpha,
        anchor: Anchor::Output,
        reference: ReferenceMode::SpanEnd,
    })
}

/// ln(P_i(0)/P_i(L)) for output-anchored parameters, excluding the
/// scale of the Raman exponent: returns (α_i L, c_R (Γ_ref − Γ_i) (e^{α₀L} − 1)/α₀).
fn inverse_terms(params: &ClosedFormParams) -> (Vec<f64>, Vec<f64>) {
    let length = params.length;
    // (e^{α₀L} − 1)/α₀ = e^{α₀L}·L_eff
    let k = (params.alpha0 * length).exp() * params.effective_length;
    let attenuation = params.attenuation.iter().map(|a| a * length).collect();
    let raman = params
        .gamma
        .iter()
        .map(|g| params.slope * (params.gamma_ref - g) * k)
        .collect();
    (attenuation, raman)
}

/// Launch spectrum reproducing `output` under output-anchored `params`.
fn invert(output: &PowerSpectrum, params: &ClosedFormParams) -> PowerSpectrum {
    let (att, raman) = inverse_terms(params);
    let total = output.total();
    let powers = output
        .powers()
        .iter()
        .zip(att.iter().zip(&raman))
        .map(|(p, (a, r))| p * (a - r * total).exp())
        .collect();
    PowerSpectrum::from_parts(output.grid_arc().clone(), powers, 0.0)
}

/// What fixes the absolute level of the pre-emphasis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    /// The target values are absolute output powers.
    OutputAbsolute,
    /// The launch total power (W) is fixed; only the target shape is used.
    InputTotalPower(f64),
}

/// A computed launch with the output-side parameters it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct PreEmphasis {
    pub launch: PowerSpectrum,
    /// Output spectrum the launch is designed to produce.
    pub output: PowerSpectrum,
    pub params: ClosedFormParams,
}

impl PreEmphasis {
    /// Solved total output power P_T(L).
    pub fn output_total(&self) -> f64 {
        self.params.total_power
    }
}

const EXPANSIONS: usize = 12;
const ROOT_TOL: f64 = 1e-12;

/// Solves P_T(L)·Σ S̄_i exp(α_i L − c_R D_i P_T(L) K) = P_T0 for P_T(L) by
/// bisection on ln P_T(L).
fn solve_output_total(
    shape: &PowerSpectrum,
    params: &ClosedFormParams,
    launch_total: f64,
) -> Result<f64> {
    let (att, raman) = inverse_terms(params);
    let unit = shape.powers();
    let residual = |log_pt: f64| -> f64 {
        let pt = log_pt.exp();
        // log of the implied launch total minus the requested one, computed
        // with max subtraction to survive large exponents
        let exps: Vec<f64> = unit
            .iter()
            .zip(att.iter().zip(&raman))
            .map(|(s, (a, r))| s.ln() + a - r * pt)
            .collect();
        let max = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = exps.iter().map(|x| (x - max).exp()).sum();
        log_pt + max + sum.ln() - launch_total.ln()
    };
    if params.slope == 0.0 {
        let gain: f64 = unit.iter().zip(&att).map(|(s, a)| s * a.exp()).sum();
        return Ok(launch_total / gain);
    }
    let max_loss = att.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_loss = att.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut lo = launch_total.ln() - max_loss;
    let mut hi = launch_total.ln() - min_loss;
    let (first_lo, first_hi) = (lo, hi);
    let mut f_lo = residual(lo);
    let mut f_hi = residual(hi);
    let mut expansions = 0;
    while f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        if expansions == EXPANSIONS {
            return Err(Error::NoBracket {
                low: first_lo.exp(),
                high: first_hi.exp(),
            });
        }
        let width = (hi - lo).max(1.0);
        lo -= width;
        hi += width;
        f_lo = residual(lo);
        f_hi = residual(hi);
        expansions += 1;
    }
    if f_lo == 0.0 {
        return Ok(lo.exp());
    }
    if f_hi == 0.0 {
        return Ok(hi.exp());
    }
    // A relative tolerance on P_T(L) is an absolute one on its logarithm.
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        let f_mid = residual(mid);
        if f_mid == 0.0 {
            return Ok(mid.exp());
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Single-span pre-emphasis of `target` over `fiber`.
pub fn preemphasis_single_span(
    target: &TargetSpectrum,
    fiber: &FiberSpec,
    order: u32,
    constraint: Constraint,
) -> Result<PreEmphasis> {
    let output = match constraint {
        Constraint::OutputAbsolute => {
            if target.is_normalized() {
                return Err(Error::Config(
                    "a normalized target needs an input total-power constraint".into(),
                ));
            }
            PowerSpectrum::from_parts(target.grid.clone(), target.values.clone(), 0.0)
        }
        Constraint::InputTotalPower(launch_total) => {
            if !(launch_total > 0.0 && launch_total.is_finite()) {
                return Err(Error::Config(format!(
                    "launch total power must be positive, got {launch_total}"
                )));
            }
            let shape = target.unit_total();
            // Γ, α₀ and Γ_ref are scale free, so the shape fixes them.
            let params = closedform_params_from_output(&shape, fiber, order)?;
            let output_total = solve_output_total(&shape, &params, launch_total)?;
            shape.scaled(output_total)
        }
    };
    let params = closedform_params_from_output(&output, fiber, order)?;
    let launch = invert(&output, &params);
    Ok(PreEmphasis {
        launch,
        output: output.with_z(fiber.length),
        params,
    })
}

/// Multi-span pre-emphasis result.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSpanPreEmphasis {
    pub launch: PowerSpectrum,
    /// Per-span single-span solutions, first span first.
    pub spans: Vec<PreEmphasis>,
}

/// Launch of a link with total-power-restoring amplifiers whose received
/// spectrum has the shape of `target`, with launch total power `launch_total`.
///
/// Works backwards from the last span: each span's launch is the
/// single-span pre-emphasis of the required output shape, and since the
/// preceding amplifier applies one scalar gain, the previous span's output
/// must have the same shape as that launch.
pub fn preemphasis_multispan(
    target: &TargetSpectrum,
    link: &LinkSpec,
    launch_total: f64,
    order: u32,
) -> Result<MultiSpanPreEmphasis> {
    if !target.is_normalized() {
        return Err(Error::Config(
            "multi-span pre-emphasis targets a shape; absolute output powers cannot be \
             targeted when every span launches the same total power"
                .into(),
        ));
    }
    link.validate(&target.grid)?;
    if link
        .amplifiers
        .iter()
        .any(|a| a.gain_policy != GainPolicy::RestoreTotal)
    {
        return Err(Error::Config(
            "multi-span pre-emphasis requires total-power-restoring amplifiers".into(),
        ));
    }
    let mut shape = target.clone();
    let mut spans = Vec::with_capacity(link.spans.len());
    for fiber in link.spans.iter().rev() {
        let span = preemphasis_single_span(
            &shape,
            fiber,
            order,
            Constraint::InputTotalPower(launch_total),
        )?;
        shape = TargetSpectrum::shape(target.grid.clone(), span.launch.powers().to_vec())?;
        spans.push(span);
    }
    spans.reverse();
    Ok(MultiSpanPreEmphasis {
        launch: spans[0].launch.clone(),
        spans,
    })
}
