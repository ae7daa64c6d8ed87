//! Transmitted-power observables and conversion coefficients.
//!
//! The probe leaves the cell with power P(t) = P_i·e^{−kL·Im χ(t)}; with
//! Im χ = χ₀ + χ₁Ω_s·cos S(t) the output splits into a DC level
//! P̄₀ = P_i·e^{−kLχ₀} and a beat component whose amplitude per unit Ω_s is
//! the conversion coefficient. Three referencing choices are exposed:
//!
//! - input-power referenced:  κ  = −P_i·e^{−kLχ₀}·kLχ₁  (the beat amplitude),
//! - DC-level referenced:     κ′ = −P_i·kLχ₁ = κ·P_i/P̄₀ (thin-medium form;
//!   the relative modulation depth scaled by P_i),
//! - DC²-referenced:          κ″ = −P_i·e^{+kLχ₀}·kLχ₁ = κ·(P_i/P̄₀)²,
//!   i.e. P_pp/(2Ω_s·P̄₀²) rescaled by P_i² — removes the quadratic DC
//!   dependence of the beat.
//!
//! Sensitivity gains are quoted as 10·log₁₀ of a conversion-coefficient
//! magnitude ratio.

use serde::{Deserialize, Serialize};

use crate::model::{AtomSystem, ReadoutConfig};
use crate::susceptibility::SusceptibilityDecomposition;
use crate::{Error, Result};

/// Exponent magnitude beyond which e^{±x} is treated as nonphysical.
const EXP_LIMIT: f64 = 700.0;

/// How the beat amplitude is referenced against the operating power level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConversionMetric {
    /// κ: beat amplitude per unit Ω_s, input-power units (general case).
    InputPower,
    /// κ′: beat amplitude referenced to the DC level (high-transmittance
    /// form; equivalent to maximizing |χ₁|).
    DcPower,
    /// κ″: beat amplitude referenced to the squared DC level.
    #[default]
    DcPowerSquared,
}

/// Regime diagnostics for the weak-signal and thin-medium approximations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegimeWarning {
    /// |kLχ₁Ω_s| is not small; the linearized beat amplitude is suspect.
    WeakSignalViolated { kl_chi1_omega_s: f64 },
    /// |kLχ₀| is not small; the high-transmittance form is suspect.
    ThinMediumViolated { kl_chi0: f64 },
}

/// Assembled readout observables at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutResult {
    /// DC output power P̄₀ = P_i·e^{−kLχ₀}, W.
    pub p_dc: f64,
    /// κ·P_i, W·s.
    pub kappa: f64,
    /// κ′·P_i, W·s.
    pub kappa_prime: f64,
    /// Peak-to-peak beat power, W.
    pub p_pp: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<RegimeWarning>,
}

fn kl(atom: &AtomSystem) -> f64 {
    atom.wavevector() * atom.cell_length
}

fn checked_exp(exponent: f64) -> Result<f64> {
    if exponent.abs() > EXP_LIMIT {
        return Err(Error::Numerical {
            what: "optical depth exponent out of range".into(),
            value: exponent,
        });
    }
    Ok(exponent.exp())
}

/// Instantaneous transmitted power P_i·e^{−kL(χ₀ + χ₁Ω_s·cos phase)}.
pub fn transmitted_power(
    decomp: &SusceptibilityDecomposition,
    atom: &AtomSystem,
    readout: &ReadoutConfig,
    omega_s: f64,
    phase: f64,
) -> Result<f64> {
    readout.validate()?;
    let kl = kl(atom);
    let exponent = -kl * (decomp.chi0 + decomp.chi1 * omega_s * phase.cos());
    Ok(readout.input_power * checked_exp(exponent)?)
}

/// General-case conversion coefficient κ·P_i = −P_i·e^{−kLχ₀}·kLχ₁, W·s.
pub fn conversion_general(
    decomp: &SusceptibilityDecomposition,
    atom: &AtomSystem,
    readout: &ReadoutConfig,
) -> Result<f64> {
    readout.validate()?;
    let kl = kl(atom);
    Ok(-readout.input_power * checked_exp(-kl * decomp.chi0)? * kl * decomp.chi1)
}

/// High-transmittance conversion coefficient κ′·P_i = −P_i·kLχ₁, W·s.
pub fn conversion_high_transmittance(
    decomp: &SusceptibilityDecomposition,
    atom: &AtomSystem,
    readout: &ReadoutConfig,
) -> Result<f64> {
    readout.validate()?;
    Ok(-readout.input_power * kl(atom) * decomp.chi1)
}

/// Conversion coefficient for the selected referencing, W·s.
pub fn conversion_coefficient(
    decomp: &SusceptibilityDecomposition,
    atom: &AtomSystem,
    readout: &ReadoutConfig,
    metric: ConversionMetric,
) -> Result<f64> {
    match metric {
        ConversionMetric::InputPower => conversion_general(decomp, atom, readout),
        ConversionMetric::DcPower => conversion_high_transmittance(decomp, atom, readout),
        ConversionMetric::DcPowerSquared => {
            readout.validate()?;
            let kl = kl(atom);
            Ok(-readout.input_power * checked_exp(kl * decomp.chi0)? * kl * decomp.chi1)
        }
    }
}

/// Exact peak-to-peak output power over one beat period,
/// e^{−kLχ₀}·P_i·(e^{kLχ₁Ω_s} − e^{−kLχ₁Ω_s}) — no small-signal expansion.
pub fn peak_to_peak(
    decomp: &SusceptibilityDecomposition,
    atom: &AtomSystem,
    readout: &ReadoutConfig,
    omega_s: f64,
) -> Result<f64> {
    readout.validate()?;
    let kl = kl(atom);
    let dc = checked_exp(-kl * decomp.chi0)?;
    let swing = kl * decomp.chi1 * omega_s;
    Ok(dc * readout.input_power * (checked_exp(swing)? - checked_exp(-swing)?).abs())
}

/// Sensitivity gain in dB: 10·log₁₀(|κ_at| / |κ_ref|).
pub fn gain_db(kappa_at: f64, kappa_ref: f64) -> Result<f64> {
    if kappa_ref == 0.0 {
        return Err(Error::Domain {
            field: "kappa_ref",
            message: "gain reference must be nonzero".into(),
        });
    }
    if !kappa_at.is_finite() || !kappa_ref.is_finite() {
        return Err(Error::Domain {
            field: "kappa",
            message: "gain inputs must be finite".into(),
        });
    }
    Ok(10.0 * (kappa_at / kappa_ref).abs().log10())
}

/// Assembles all readout observables and the regime diagnostics at one
/// operating point.
pub fn readout_result(
    decomp: &SusceptibilityDecomposition,
    atom: &AtomSystem,
    readout: &ReadoutConfig,
    omega_s: f64,
) -> Result<ReadoutResult> {
    readout.validate()?;
    let klv = kl(atom);
    let mut warnings = Vec::new();
    let swing = (klv * decomp.chi1 * omega_s).abs();
    if swing > 0.1 {
        warnings.push(RegimeWarning::WeakSignalViolated {
            kl_chi1_omega_s: swing,
        });
    }
    let depth = (klv * decomp.chi0).abs();
    if depth > 0.1 {
        warnings.push(RegimeWarning::ThinMediumViolated { kl_chi0: depth });
    }
    Ok(ReadoutResult {
        p_dc: readout.input_power * checked_exp(-klv * decomp.chi0)?,
        kappa: conversion_general(decomp, atom, readout)?,
        kappa_prime: conversion_high_transmittance(decomp, atom, readout)?,
        p_pp: peak_to_peak(decomp, atom, readout, omega_s)?,
        warnings,
    })
}
