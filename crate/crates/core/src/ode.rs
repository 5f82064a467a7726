//! Numerical reference: fixed-step RK4 integration of the coupled
//! per-channel ISRS power equations
//!
//! ```text
//! dP_i/dz = −α_i P_i + P_i Σ_{f_j>f_i} g_R(f_j − f_i) P_j
//!                    − P_i Σ_{f_j<f_i} (f_i/f_j)^c g_R(f_i − f_j) P_j
//! ```
//!
//! with `c = 1` when photon (frequency-conversion) loss is kept.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::multispan::{apply_gain_policy, LinkSpec, LinkTrace, ReceiverBoost, SpanEvolution};
use crate::profiles::{ChannelGrid, FiberSpec};
use crate::spectrum::PowerSpectrum;

/// Raman curve used by the numerical solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RamanChoice {
    #[default]
    Triangular,
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub steps_per_span: usize,
    /// Keep the f_i/f_j factor on the depleting term.
    pub photon_correction: bool,
    pub raman: RamanChoice,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            steps_per_span: 50,
            photon_correction: false,
            raman: RamanChoice::Triangular,
        }
    }
}

impl SolverOptions {
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps_per_span = steps;
        self
    }

    pub fn with_photon_correction(mut self, on: bool) -> Self {
        self.photon_correction = on;
        self
    }
}

/// Spectra sampled along the propagation axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub z_samples: Vec<f64>,
    pub spectra: Vec<PowerSpectrum>,
    pub total_power: Vec<f64>,
}

impl PropagationResult {
    fn with_capacity(n: usize) -> Self {
        Self {
            z_samples: Vec::with_capacity(n),
            spectra: Vec::with_capacity(n),
            total_power: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, spectrum: PowerSpectrum) {
        self.z_samples.push(spectrum.z());
        self.total_power.push(spectrum.total());
        self.spectra.push(spectrum);
    }

    pub fn last(&self) -> &PowerSpectrum {
        self.spectra
            .last()
            .expect("propagation result is never empty")
    }
}

/// Precomputed right-hand side: per-channel loss and the dense coupling
/// matrix `K` with `dP/dz = −α∘P + P∘(K·P)`.
#[derive(Debug, Clone)]
pub struct IsrsSystem {
    alpha: Vec<f64>,
    coupling: Vec<f64>,
    n: usize,
}

impl IsrsSystem {
    pub fn new(grid: &ChannelGrid, fiber: &FiberSpec, options: &SolverOptions) -> Result<Self> {
        let raman = match options.raman {
            RamanChoice::Triangular => fiber.raman.to_triangular(),
            RamanChoice::Tabulated if fiber.raman.is_tabulated() => fiber.raman.clone(),
            RamanChoice::Tabulated => {
                return Err(Error::Config(
                    "tabulated Raman model requested but the fiber has no gain table".into(),
                ))
            }
        };
        let alpha = fiber.attenuation.per_channel_allow_lossless(grid)?;
        let n = grid.len();
        let spacing = grid.spacing();
        let freqs = grid.frequencies();
        // Separations are integer multiples of the spacing; computing them that
        // way keeps g_R(|Δf|) identical for both members of a pair.
        let gains = (0..n)
            .map(|d| raman.raman_gain_at(d as f64 * spacing))
            .collect::<Result<Vec<_>>>()?;
        let mut coupling = vec![0.0; n * n];
        for i in 0..n {
            let row = &mut coupling[i * n..(i + 1) * n];
            for (j, k) in row.iter_mut().enumerate() {
                *k = match j.cmp(&i) {
                    std::cmp::Ordering::Greater => gains[j - i],
                    std::cmp::Ordering::Less if options.photon_correction => {
                        -gains[i - j] * freqs[i] / freqs[j]
                    }
                    std::cmp::Ordering::Less => -gains[i - j],
                    std::cmp::Ordering::Equal => 0.0,
                };
            }
        }
        Ok(Self { alpha, coupling, n })
    }

    pub fn derivative_into(&self, powers: &[f64], out: &mut [f64]) {
        for (i, d) in out.iter_mut().enumerate() {
            let row = &self.coupling[i * self.n..(i + 1) * self.n];
            let exchange: f64 = row.iter().zip(powers).map(|(k, p)| k * p).sum();
            *d = powers[i] * (exchange - self.alpha[i]);
        }
    }

    /// Classic RK4 over `length` km in `steps` equal steps, starting at `z0`.
    /// Every intermediate spectrum is pushed to `result`, including the start.
    fn integrate(
        &self,
        start: &PowerSpectrum,
        z0: f64,
        length: f64,
        steps: usize,
        result: &mut PropagationResult,
    ) -> Result<PowerSpectrum> {
        let n = self.n;
        let h = length / steps as f64;
        let grid = start.grid_arc().clone();
        let mut p = start.powers().to_vec();
        let (mut k1, mut k2, mut k3, mut k4) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        result.push(PowerSpectrum::from_parts(grid.clone(), p.clone(), z0));
        for step in 0..steps {
            self.derivative_into(&p, &mut k1);
            axpy(&p, 0.5 * h, &k1, &mut tmp);
            self.derivative_into(&tmp, &mut k2);
            axpy(&p, 0.5 * h, &k2, &mut tmp);
            self.derivative_into(&tmp, &mut k3);
            axpy(&p, h, &k3, &mut tmp);
            self.derivative_into(&tmp, &mut k4);
            let z = if step + 1 == steps {
                z0 + length
            } else {
                z0 + (step + 1) as f64 * h
            };
            for i in 0..n {
                let next = p[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                if next < -1e-15 || !next.is_finite() {
                    return Err(Error::NumericalInstability {
                        channel: i,
                        power: next,
                        z,
                    });
                }
                p[i] = next.max(0.0);
            }
            result.push(PowerSpectrum::from_parts(grid.clone(), p.clone(), z));
        }
        Ok(result.last().clone())
    }
}

fn axpy(x: &[f64], a: f64, y: &[f64], out: &mut [f64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

/// dP_i/dz (W/km) for every channel.
pub fn isrs_derivative(
    spectrum: &PowerSpectrum,
    fiber: &FiberSpec,
    options: &SolverOptions,
) -> Result<Vec<f64>> {
    let system = IsrsSystem::new(spectrum.grid(), fiber, options)?;
    let mut out = vec![0.0; spectrum.len()];
    system.derivative_into(spectrum.powers(), &mut out);
    Ok(out)
}

fn check_steps(options: &SolverOptions) -> Result<()> {
    if options.steps_per_span == 0 {
        Err(Error::Config("steps per span must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Integrates one span from z = 0 to z = L, returning every step.
pub fn integrate_span(
    launch: &PowerSpectrum,
    fiber: &FiberSpec,
    options: &SolverOptions,
) -> Result<PropagationResult> {
    check_steps(options)?;
    if launch.z() != 0.0 {
        return Err(Error::Config(format!(
            "span integration starts at z = 0, launch is at z = {}",
            launch.z()
        )));
    }
    let system = IsrsSystem::new(launch.grid(), fiber, options)?;
    let mut result = PropagationResult::with_capacity(options.steps_per_span + 1);
    system.integrate(
        launch,
        0.0,
        fiber.length,
        options.steps_per_span,
        &mut result,
    )?;
    Ok(result)
}

/// Numerical propagation over a multi-span link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPropagation {
    /// All samples along the link. Amplifier sites appear twice: once with
    /// the span output and once with the amplified input of the next span.
    pub profile: PropagationResult,
    pub trace: LinkTrace,
}

/// Concatenated span integrations with the link's amplifiers applied at
/// every span boundary (and at the receiver when a boost is configured).
pub fn propagate_link_numerical(
    launch: &PowerSpectrum,
    link: &LinkSpec,
    options: &SolverOptions,
) -> Result<LinkPropagation> {
    check_steps(options)?;
    link.validate(launch.grid())?;
    let mut profile =
        PropagationResult::with_capacity(link.spans.len() * (options.steps_per_span + 2));
    let mut spans = Vec::with_capacity(link.spans.len());
    let mut gains = Vec::with_capacity(link.spans.len().saturating_sub(1));
    let mut input = launch.clone().with_z(0.0);
    let mut z0 = 0.0;
    let mut systems: Vec<(usize, Arc<IsrsSystem>)> = Vec::new();
    for (k, fiber) in link.spans.iter().enumerate() {
        // Homogeneous links reuse one coupling matrix.
        let system = match systems.iter().find(|(idx, _)| link.spans[*idx] == *fiber) {
            Some((_, s)) => s.clone(),
            None => {
                let s = Arc::new(IsrsSystem::new(launch.grid(), fiber, options)?);
                systems.push((k, s.clone()));
                s
            }
        };
        let output = system.integrate(
            &input,
            z0,
            fiber.length,
            options.steps_per_span,
            &mut profile,
        )?;
        z0 += fiber.length;
        spans.push(SpanEvolution {
            input: input.clone(),
            output: output.clone(),
        });
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
    if receiver_gain.is_some() {
        profile.push(received.clone());
    }
    Ok(LinkPropagation {
        profile,
        trace: LinkTrace {
            spans,
            gains,
            receiver_gain,
            received,
        },
    })
}
