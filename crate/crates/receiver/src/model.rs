//! Physical constants, atom/drive parameter types, and unit conventions.
//!
//! Everything downstream consumes these types. All frequencies (Rabi
//! frequencies, detunings, decay rates) are stored as *angular* frequencies
//! in rad/s. Configuration files quote ordinary frequencies in MHz; the
//! conversion to rad/s happens exactly once, in [`crate::cli`] ingestion,
//! never inside math code.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fundamental constants (CODATA 2018), fixed at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Vacuum permittivity, F/m.
    pub epsilon0: f64,
    /// Boltzmann constant, J/K.
    pub kb: f64,
}

/// CODATA 2018 values.
pub const CODATA: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    epsilon0: 8.854_187_812_8e-12,
    kb: 1.380_649e-23,
};

impl Default for PhysicalConstants {
    fn default() -> Self {
        CODATA
    }
}

fn check_finite(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            field,
            message: format!("must be finite, got {v}"),
        })
    }
}

fn check_nonnegative(field: &'static str, v: f64) -> Result<()> {
    check_finite(field, v)?;
    if v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            field,
            message: format!("must be >= 0, got {v}"),
        })
    }
}

fn check_positive(field: &'static str, v: f64) -> Result<()> {
    check_finite(field, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            field,
            message: format!("must be > 0, got {v}"),
        })
    }
}

/// The four-level atom: decay and relaxation rates, optical properties of
/// the vapor, and the thermal parameters that set the transit rate.
///
/// Level scheme: |1⟩ ground, |2⟩ intermediate (probe transition),
/// |3⟩ Rydberg (coupling transition), |4⟩ adjacent Rydberg (microwave
/// transition). Decay paths modeled: 2→1, 3→2, 4→1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSystem {
    /// Decay rate of |2⟩, rad/s.
    pub gamma2: f64,
    /// Decay rate of |3⟩, rad/s.
    pub gamma3: f64,
    /// Decay rate of |4⟩, rad/s.
    pub gamma4: f64,
    /// Collision relaxation rate of |3⟩, rad/s. Population lost to this
    /// channel is not repopulated, so a unit-trace steady state exists
    /// only for `gamma_c = 0` (the regime used throughout).
    pub gamma_c: f64,
    /// Transit relaxation rate γ, rad/s: atoms leave the beam at this rate
    /// from every level and are replaced by ground-state atoms.
    pub gamma_t: f64,
    /// Dipole moment of the |1⟩→|2⟩ transition, C·m.
    pub mu12: f64,
    /// Effective atom density participating in the interaction, m⁻³.
    pub n_eff: f64,
    /// Probe wavelength, m.
    pub lambda_p: f64,
    /// Vapor-cell length along the probe, m.
    pub cell_length: f64,
    /// Atom mass, kg.
    pub mass: f64,
    /// Ensemble temperature, K.
    pub temperature: f64,
}

impl AtomSystem {
    /// Validates field ranges: rates nonnegative, the rest strictly positive,
    /// nothing NaN or infinite.
    pub fn validate(&self) -> Result<()> {
        check_nonnegative("gamma2", self.gamma2)?;
        check_nonnegative("gamma3", self.gamma3)?;
        check_nonnegative("gamma4", self.gamma4)?;
        check_nonnegative("gamma_c", self.gamma_c)?;
        check_nonnegative("gamma_t", self.gamma_t)?;
        check_positive("mu12", self.mu12)?;
        check_positive("n_eff", self.n_eff)?;
        check_positive("lambda_p", self.lambda_p)?;
        check_positive("cell_length", self.cell_length)?;
        check_positive("mass", self.mass)?;
        check_positive("temperature", self.temperature)?;
        Ok(())
    }

    /// Validating constructor.
    pub fn try_new(atom: AtomSystem) -> Result<AtomSystem> {
        atom.validate()?;
        Ok(atom)
    }

    /// Probe wavevector k = 2π/λ_p, m⁻¹ (derived, never stored).
    pub fn wavevector(&self) -> f64 {
        std::f64::consts::TAU / self.lambda_p
    }
}

/// Detection regime for the power readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    /// Weak-signal regime: |kLχ₁Ω_s| ≪ 1 but the DC attenuation
    /// e^{−kLχ₀} is kept.
    GeneralCase,
    /// Thin-medium regime: |kLχ₀| ≪ 1, attenuation treated as unity.
    HighTransmittance,
}

/// Rabi frequencies, detunings, and the signal beat parameters.
///
/// The |3⟩↔|4⟩ transition is driven by a strong local microwave field
/// (Ω_L) plus the weak signal (Ω_s) offset by the beat frequency δ_s; the
/// instantaneous coupling amplitude is Ω_L + Ω_s·e^{−iS(t)} with phase
/// S(t) = 2πδ_s·t + φ_s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    /// Probe Rabi frequency (|1⟩→|2⟩), rad/s.
    pub omega_p: f64,
    /// Coupling Rabi frequency (|2⟩→|3⟩), rad/s.
    pub omega_c: f64,
    /// Local microwave Rabi frequency (|3⟩→|4⟩), rad/s.
    pub omega_l: f64,
    /// Signal microwave Rabi frequency, rad/s.
    pub omega_s: f64,
    /// Probe detuning, rad/s (signed).
    pub delta_p: f64,
    /// Coupling detuning, rad/s (signed).
    pub delta_c: f64,
    /// Local microwave detuning, rad/s (signed).
    pub delta_l: f64,
    /// Signal-local beat frequency δ_s, Hz (ordinary frequency).
    pub delta_beat: f64,
    /// Signal phase offset φ_s, rad.
    pub phi_s: f64,
}

impl DriveConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("omega_p", self.omega_p)?;
        check_positive("omega_c", self.omega_c)?;
        check_positive("omega_l", self.omega_l)?;
        check_nonnegative("omega_s", self.omega_s)?;
        check_finite("delta_p", self.delta_p)?;
        check_finite("delta_c", self.delta_c)?;
        check_finite("delta_l", self.delta_l)?;
        check_finite("delta_beat", self.delta_beat)?;
        check_finite("phi_s", self.phi_s)?;
        Ok(())
    }

    pub fn try_new(drive: DriveConfig) -> Result<DriveConfig> {
        drive.validate()?;
        Ok(drive)
    }

    /// Whether the signal is weak enough for the first-order treatment.
    /// Operational cutoff: Ω_s < Ω_L/10.
    pub fn is_perturbative(&self) -> bool {
        self.omega_s < self.omega_l / 10.0
    }

    /// Instantaneous |3⟩↔|4⟩ coupling magnitude Ω = |Ω_L + Ω_s·e^{−iφ}|.
    pub fn effective_coupling(&self, phase: f64) -> f64 {
        let re = self.omega_l + self.omega_s * phase.cos();
        let im = -self.omega_s * phase.sin();
        re.hypot(im)
    }

    /// Beat phase S(t) = 2πδ_s·t + φ_s.
    pub fn beat_phase(&self, t: f64) -> f64 {
        std::f64::consts::TAU * self.delta_beat * t + self.phi_s
    }
}

/// Input power and detection regime of the probe readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutConfig {
    /// Probe input power P_i, W.
    pub input_power: f64,
    pub detection_mode: DetectionMode,
}

impl ReadoutConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("input_power", self.input_power)?;
        Ok(())
    }
}

/// Transit relaxation rate from thermal motion through the beam,
///
///   γ = sqrt(8·k_B·T/(π·m)) / (w·sqrt(2·ln 2)),
///
/// where `beam_waist` is the 1/e² beam waist in m. Returned in s⁻¹.
/// Strictly decreasing in the waist (∝ 1/w) and increasing in temperature.
pub fn transit_rate(beam_waist: f64, mass: f64, temperature: f64) -> Result<f64> {
    check_positive("beam_waist", beam_waist)?;
    check_positive("mass", mass)?;
    check_positive("temperature", temperature)?;
    let mean_speed = (8.0 * CODATA.kb * temperature / (std::f64::consts::PI * mass)).sqrt();
    Ok(mean_speed / (beam_waist * (2.0 * std::f64::consts::LN_2).sqrt()))
}

/// Local microwave Rabi frequency that maximizes the resonant conversion
/// coefficient at fixed probe and coupling powers:
///
///   Ω_L = Ω_p·sqrt( 2(Ω_c² + Ω_p²) / (3(2Ω_p² + γ₂²)) ).
///
/// Homogeneous of degree one in (Ω_p, Ω_c, γ₂).
pub fn optimal_local_rabi(omega_p: f64, omega_c: f64, gamma2: f64) -> Result<f64> {
    check_positive("omega_p", omega_p)?;
    check_positive("omega_c", omega_c)?;
    check_positive("gamma2", gamma2)?;
    let num = 2.0 * (omega_c * omega_c + omega_p * omega_p);
    let den = 3.0 * (2.0 * omega_p * omega_p + gamma2 * gamma2);
    Ok(omega_p * (num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const TAU: f64 = std::f64::consts::TAU;

    // Cs parameters used across the test suite.
    pub(crate) fn cs_atom() -> AtomSystem {
        AtomSystem {
            gamma2: TAU * 5.2e6,
            gamma3: TAU * 3.9e3,
            gamma4: TAU * 1.7e3,
            gamma_c: 0.0,
            gamma_t: 0.0,
            mu12: 2.6849e-29,
            n_eff: 1e14,
            lambda_p: 852.35e-9,
            cell_length: 0.01,
            mass: 2.2069e-25,
            temperature: 300.0,
        }
    }

    #[test]
    fn transit_rate_cs_room_temperature() {
        // Direct evaluation of the formula with CODATA k_B:
        // sqrt(8·1.380649e-23·300/(pi·2.2069e-25)) / (1e-3·sqrt(2 ln 2))
        let g = transit_rate(1e-3, 2.2069e-25, 300.0).unwrap();
        assert_relative_eq!(g, 1.8567e5, max_relative = 1e-3);
    }

    #[test]
    fn transit_rate_scales_inversely_with_waist() {
        let g1 = transit_rate(1e-3, 2.2069e-25, 300.0).unwrap();
        let g2 = transit_rate(2e-3, 2.2069e-25, 300.0).unwrap();
        let g10 = transit_rate(1e-4, 2.2069e-25, 300.0).unwrap();
        assert_relative_eq!(g2, g1 / 2.0, max_relative = 1e-14);
        assert_relative_eq!(g10, 10.0 * g1, max_relative = 1e-14);
    }

    #[test]
    fn transit_rate_rejects_nonpositive_inputs() {
        for (w, m, t) in [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, f64::NAN)] {
            assert!(transit_rate(w, m, t).is_err());
        }
        let err = transit_rate(-1e-3, 2.2e-25, 300.0).unwrap_err();
        assert!(err.to_string().contains("beam_waist"));
    }

    #[test]
    fn optimal_local_rabi_cs_values() {
        // Omega_p = 2pi*5.7 MHz, Omega_c = 2pi*0.97 MHz, gamma2 = 2pi*5.2 MHz.
        let ol = optimal_local_rabi(TAU * 5.7e6, TAU * 0.97e6, TAU * 5.2e6).unwrap();
        assert_relative_eq!(ol, TAU * 2.8052e6, max_relative = 1e-4);
    }

    #[test]
    fn optimal_local_rabi_symmetric_substitution() {
        // All three inputs equal g: result is g*sqrt(4/9) = (2/3) g.
        let g = TAU * 3.3e6;
        let ol = optimal_local_rabi(g, g, g).unwrap();
        assert_relative_eq!(ol, 2.0 / 3.0 * g, max_relative = 1e-14);
    }

    #[test]
    fn constructors_reject_nan_and_infinity() {
        let mut atom = cs_atom();
        atom.mu12 = f64::NAN;
        assert!(AtomSystem::try_new(atom).is_err());
        let mut atom = cs_atom();
        atom.gamma3 = f64::INFINITY;
        assert!(AtomSystem::try_new(atom).is_err());

        let drive = DriveConfig {
            omega_p: TAU * 5.7e6,
            omega_c: TAU * 0.97e6,
            omega_l: TAU * 4.0e6,
            omega_s: TAU * 1e3,
            delta_p: 0.0,
            delta_c: 0.0,
            delta_l: f64::NAN,
            delta_beat: 0.0,
            phi_s: 0.0,
        };
        assert!(DriveConfig::try_new(drive).is_err());
        let ok = DriveConfig {
            delta_l: 0.0,
            ..drive
        };
        assert!(DriveConfig::try_new(ok).is_ok());
    }

    #[test]
    fn perturbative_flag_cutoff() {
        let mut drive = DriveConfig {
            omega_p: TAU * 5.7e6,
            omega_c: TAU * 0.97e6,
            omega_l: TAU * 4.0e6,
            omega_s: TAU * 0.39e6,
            delta_p: 0.0,
            delta_c: 0.0,
            delta_l: 0.0,
            delta_beat: 0.0,
            phi_s: 0.0,
        };
        assert!(drive.is_perturbative());
        drive.omega_s = TAU * 0.41e6;
        assert!(!drive.is_perturbative());
    }

    #[test]
    fn effective_coupling_endpoints() {
        let drive = DriveConfig {
            omega_p: TAU * 5.7e6,
            omega_c: TAU * 0.97e6,
            omega_l: TAU * 4.0e6,
            omega_s: TAU * 1.0e6,
            delta_p: 0.0,
            delta_c: 0.0,
            delta_l: 0.0,
            delta_beat: 0.0,
            phi_s: 0.0,
        };
        assert_relative_eq!(
            drive.effective_coupling(0.0),
            drive.omega_l + drive.omega_s,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            drive.effective_coupling(std::f64::consts::PI),
            drive.omega_l - drive.omega_s,
            max_relative = 1e-12
        );
    }

    proptest! {
        #[test]
        fn transit_rate_homogeneity(w in 1e-5..1e-2f64, alpha in 0.1..10.0f64) {
            let g1 = transit_rate(w, 2.2069e-25, 300.0).unwrap();
            let g2 = transit_rate(alpha * w, 2.2069e-25, 300.0).unwrap();
            prop_assert!((g2 - g1 / alpha).abs() <= 1e-12 * g1.abs());
        }

        #[test]
        fn optimal_local_rabi_degree_one(
            op in 1e5..1e8f64, oc in 1e5..1e8f64, g2 in 1e5..1e8f64, alpha in 0.1..10.0f64
        ) {
            let a = optimal_local_rabi(op, oc, g2).unwrap();
            let b = optimal_local_rabi(alpha * op, alpha * oc, alpha * g2).unwrap();
            prop_assert!((b - alpha * a).abs() <= 1e-12 * (alpha * a));
        }
    }
}
