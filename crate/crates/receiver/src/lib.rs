//! Four-level Lindblad model of a heterodyne Rydberg atomic receiver.
//!
//! A probe and a coupling laser hold a ladder EIT resonance while a strong
//! local microwave field dresses the Rydberg transition; a weak signal field
//! detuned by the beat frequency δ_s modulates the probe transmission. This
//! crate computes the steady state of the four-level density matrix, the
//! imaginary susceptibility decomposition (χ₀, χ₁), the transmitted-power
//! observables and conversion coefficients, and the detuning operating
//! points that maximize the weak-signal response.
//!
//! Organization:
//! - [`model`]: parameter types, unit conventions, transit-rate formula.
//! - [`liouvillian`]: numerical steady state and time evolution — the
//!   oracle every closed form is validated against.
//! - [`susceptibility`]: closed-form ρ₂₁ and (χ₀, χ₁) for each detuning
//!   scenario, plus numerical harmonic extraction.
//! - [`readout`]: transmitted power, peak-to-peak output, conversion
//!   coefficients, dB gains.
//! - [`optimize`]: closed-form and grid-refined optimal detunings (P1–P5).
//! - [`cli`]: config ingestion, sweeps, and machine-readable output.

pub mod cli;
pub mod liouvillian;
pub mod model;
pub mod optimize;
pub mod readout;
pub mod susceptibility;
pub mod validate;

pub use model::{AtomSystem, DriveConfig, PhysicalConstants, ReadoutConfig, CODATA};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its physical domain.
    #[error("domain error: {field} {message}")]
    Domain {
        field: &'static str,
        message: String,
    },

    /// An operation was called outside its stated assumption set.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A linear solve or function evaluation failed numerically.
    #[error("numerical failure: {what} ({value:.3e})")]
    Numerical { what: String, value: f64 },

    /// Two redundant computations of the same quantity disagree.
    #[error("consistency check failed: {what}: {a:.9e} vs {b:.9e}")]
    Consistency { what: String, a: f64, b: f64 },

    /// Adaptive integrator could not take a step.
    #[error("integration step size underflow at t = {t_last:.3e} s")]
    StepSizeUnderflow { t_last: f64 },

    /// A first-passage search ran out of horizon.
    #[error("settling not reached within horizon {horizon:.3e} s")]
    Timeout { horizon: f64 },

    /// Configuration parse or validation problem.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
