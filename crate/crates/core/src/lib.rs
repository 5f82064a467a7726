//! Per-channel power evolution in wideband WDM fiber links under
//! inter-channel stimulated Raman scattering (ISRS) and frequency-dependent
//! loss.
//!
//! Two forward models are provided: a fixed-step RK4 integration of the
//! coupled channel equations ([`ode`]) and an approximate closed form
//! ([`closedform`], [`multispan`]). The closed form can be inverted to
//! compute launch pre-emphasis for a target output spectrum ([`inverse`])
//! or a target OSNR profile ([`osnr`]). [`bench`] compares the two forward
//! models over parameter sweeps.
//!
//! Units are THz, km, W and Napierian 1/km throughout; dB quantities only
//! appear in [`profiles::units`] helpers and constructor shortcuts.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod closedform;
pub mod error;
pub mod inverse;
pub mod multispan;
pub mod ode;
pub mod osnr;
pub mod profiles;
pub mod spectrum;

pub use error::{Error, Result};
pub use spectrum::PowerSpectrum;
