//! Closed-form steady-state coherences and the harmonic decomposition of
//! the imaginary susceptibility, Im χ(t) = χ₀ + χ₁·Ω_s·cos S(t).
//!
//! The linear susceptibility at the probe transition is
//!
//!   χ(t) = −(2·n_eff·μ₁₂² / (ħ·ε₀·Ω_p)) · ρ₂₁(t),
//!
//! so a negative-imaginary ρ₂₁ gives absorptive Im χ > 0. Each detuning
//! scenario (local microwave Δ_L, probe Δ_p, coupling Δ_c) has its own
//! assumption set under which the steady state reduces to a rational
//! function of the drive parameters; every closed form here is validated
//! against the trace-constrained numerical solve in [`crate::liouvillian`]
//! to 1e-9 relative, and the first-order (χ₀, χ₁) splits are validated
//! against finite differences of the numerical solver.
//!
//! Sign conventions follow the numerical steady state throughout: χ₀ ≥ 0
//! (absorption) in all scenarios, and χ₁ is tracked with its sign.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::liouvillian::steady_state;
use crate::model::{AtomSystem, DriveConfig, CODATA};
use crate::{Error, Result};

type C64 = Complex64;

/// Number of equispaced beat phases sampled by the numerical harmonic
/// extraction. Exact for band-limited content up to harmonic 31.
pub const N_PHASE: usize = 64;

/// Ratio of second to first harmonic beyond which the decomposition is
/// flagged as non-perturbative.
pub const SECOND_HARMONIC_LIMIT: f64 = 0.1;

/// Diagnostics attached to a decomposition without invalidating it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecompositionWarning {
    /// Ω_s is not small against Ω_L (cutoff Ω_s ≥ Ω_L/10).
    NonPerturbative,
    /// Extracted second harmonic exceeds 10% of the first.
    SecondHarmonic { ratio: f64 },
}

/// DC part χ₀ (dimensionless) and first-harmonic coefficient χ₁
/// (multiplies Ω_s·cos S(t), so it carries 1/(rad/s)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilityDecomposition {
    pub chi0: f64,
    pub chi1: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<DecompositionWarning>,
}

impl SusceptibilityDecomposition {
    fn checked(chi0: f64, chi1: f64, warnings: Vec<DecompositionWarning>) -> Result<Self> {
        if !chi0.is_finite() || !chi1.is_finite() {
            return Err(Error::Numerical {
                what: "susceptibility decomposition not finite".into(),
                value: if chi0.is_finite() { chi1 } else { chi0 },
            });
        }
        if chi0 < 0.0 {
            return Err(Error::Numerical {
                what: "negative DC absorption chi0".into(),
                value: chi0,
            });
        }
        Ok(SusceptibilityDecomposition {
            chi0,
            chi1,
            warnings,
        })
    }
}

/// Which single parameter a scenario detunes; every other detuning and all
/// small relaxation rates (γ₃, γ₄, γ_c, and γ except for `TransitRate`)
/// are implied zero by the scenario's assumption set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningAxis {
    LocalMicrowave,
    ProbeLaser,
    CouplingLaser,
    TransitRate,
}

/// One active axis and its value (rad/s for detunings, s⁻¹ for γ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningScenario {
    pub axis: DetuningAxis,
    pub value: f64,
}

impl DetuningScenario {
    /// Projects (atom, drive) onto the scenario's assumption set: zeroes
    /// every detuning and small relaxation rate, then applies the active
    /// axis value.
    pub fn apply(&self, atom: &AtomSystem, drive: &DriveConfig) -> (AtomSystem, DriveConfig) {
        let mut atom = *atom;
        let mut drive = *drive;
        atom.gamma3 = 0.0;
        atom.gamma4 = 0.0;
        atom.gamma_c = 0.0;
        atom.gamma_t = 0.0;
        drive.delta_p = 0.0;
        drive.delta_c = 0.0;
        drive.delta_l = 0.0;
        match self.axis {
            DetuningAxis::LocalMicrowave => drive.delta_l = self.value,
            DetuningAxis::ProbeLaser => drive.delta_p = self.value,
            DetuningAxis::CouplingLaser => drive.delta_c = self.value,
            DetuningAxis::TransitRate => atom.gamma_t = self.value,
        }
        (atom, drive)
    }
}

/// Susceptibility prefactor 2·n_eff·μ₁₂²/(ħ·ε₀), rad/s.
pub fn chi_prefactor(atom: &AtomSystem) -> f64 {
    2.0 * atom.n_eff * atom.mu12 * atom.mu12 / (CODATA.hbar * CODATA.epsilon0)
}

/// Im χ from a steady-state coherence.
pub fn im_chi_from_rho21(atom: &AtomSystem, omega_p: f64, rho21: C64) -> f64 {
    -chi_prefactor(atom) / omega_p * rho21.im
}

fn require_zero(what: &str, v: f64) -> Result<()> {
    if v != 0.0 {
        Err(Error::Contract(format!(
            "{what} must be zero in this scenario, got {v:.3e}"
        )))
    } else {
        Ok(())
    }
}

fn perturbative_warnings(drive: &DriveConfig) -> Vec<DecompositionWarning> {
    if drive.is_perturbative() {
        Vec::new()
    } else {
        vec![DecompositionWarning::NonPerturbative]
    }
}

/// Fully resonant steady-state coherence (all detunings zero, no transit or
/// collision relaxation, no population decay out of |3⟩/|4⟩):
///
///   ρ₂₁ = −i·γ₂·Ω_p·Ω² / (γ₂²Ω² + 2Ω_c²Ω_p² + 2Ω_p⁴ + 2Ω_p²Ω²),
///
/// with Ω = |Ω_L + Ω_s·e^{−iφ_s}| the instantaneous coupling magnitude.
pub fn rho21_resonant(atom: &AtomSystem, drive: &DriveConfig) -> Result<C64> {
    atom.validate()?;
    drive.validate()?;
    require_zero("delta_p", drive.delta_p)?;
    require_zero("delta_c", drive.delta_c)?;
    require_zero("delta_l", drive.delta_l)?;
    require_zero("gamma_t", atom.gamma_t)?;
    require_zero("gamma_c", atom.gamma_c)?;
    require_zero("gamma3", atom.gamma3)?;
    require_zero("gamma4", atom.gamma4)?;
    let om = drive.effective_coupling(drive.phi_s);
    Ok(rho21_resonant_raw(
        drive.omega_p,
        drive.omega_c,
        om,
        atom.gamma2,
    ))
}

fn rho21_resonant_raw(op: f64, oc: f64, om: f64, g2: f64) -> C64 {
    let om2 = om * om;
    let op2 = op * op;
    let den = g2 * g2 * om2 + 2.0 * oc * oc * op2 + 2.0 * op2 * op2 + 2.0 * op2 * om2;
    C64::new(0.0, -g2 * op * om2 / den)
}

fn d_local(op2: f64, oc2: f64, om2: f64, g2: f64, dl: f64) -> f64 {
    let q = oc2 + op2;
    g2 * g2 * om2 * om2 + 4.0 * dl * dl * q * q + 2.0 * om2 * op2 * (q + om2)
}

/// Steady-state coherence under local microwave detuning
/// (Δ_c = Δ_p = 0, γ₃ = γ₄ = γ_c = γ = 0):
///
///   ρ₂₁(Δ_L) = −(2Δ_L·Ω_p·Ω²·Ω_c² + i·γ₂·Ω_p·Ω⁴) / D_L,
///   D_L = γ₂²Ω⁴ + 4Δ_L²(Ω_c²+Ω_p²)² + 2Ω²Ω_p²(Ω_c²+Ω_p²+Ω²).
///
/// Reduces to the resonant form at Δ_L = 0; the real part is odd and the
/// imaginary part even in Δ_L.
pub fn rho21_local_detuned(atom: &AtomSystem, drive: &DriveConfig, delta_l: f64) -> Result<C64> {
    atom.validate()?;
    drive.validate()?;
    require_zero("delta_p", drive.delta_p)?;
    require_zero("delta_c", drive.delta_c)?;
    require_zero("gamma_t", atom.gamma_t)?;
    require_zero("gamma_c", atom.gamma_c)?;
    require_zero("gamma3", atom.gamma3)?;
    require_zero("gamma4", atom.gamma4)?;
    let om = drive.effective_coupling(drive.phi_s);
    let (op, oc, g2) = (drive.omega_p, drive.omega_c, atom.gamma2);
    let (op2, oc2, om2) = (op * op, oc * oc, om * om);
    let den = d_local(op2, oc2, om2, g2, delta_l);
    Ok(C64::new(
        -2.0 * delta_l * op * om2 * oc2 / den,
        -g2 * op * om2 * om2 / den,
    ))
}

fn d_probe(op2: f64, oc2: f64, om2: f64, g2: f64, dp: f64) -> f64 {
    let d2 = dp * dp;
    let q = op2 + oc2;
    64.0 * d2 * d2 * d2
        + g2 * g2 * (om2 - 4.0 * d2) * (om2 - 4.0 * d2)
        + 4.0 * d2 * ((om2 + oc2) * (om2 + oc2) + 2.0 * op2 * (q - 2.0 * om2))
        - 32.0 * d2 * d2 * (om2 + oc2 - op2)
        + 2.0 * op2 * om2 * (q + om2)
}

/// Steady-state coherence under probe detuning
/// (Δ_c = Δ_L = 0, γ₃ = γ₄ = γ_c = γ = 0):
///
///   ρ₂₁(Δ_p) = −Ω_p(4Δ_p²−Ω²)·[iγ₂(4Δ_p²−Ω²) + 2Δ_p(4Δ_p²−Ω_c²−Ω²)] / D_p(Ω),
///
/// with the sextic denominator D_p. The numerator carries the factor
/// (4Δ_p² − Ω²), so the coherence vanishes at Δ_p = ±Ω/2 (Autler–Townes
/// condition on the dressed Rydberg pair).
pub fn rho21_probe_detuned(atom: &AtomSystem, drive: &DriveConfig, delta_p: f64) -> Result<C64> {
    atom.validate()?;
    drive.validate()?;
    require_zero("delta_c", drive.delta_c)?;
    require_zero("delta_l", drive.delta_l)?;
    require_zero("gamma_t", atom.gamma_t)?;
    require_zero("gamma_c", atom.gamma_c)?;
    require_zero("gamma3", atom.gamma3)?;
    require_zero("gamma4", atom.gamma4)?;
    let om = drive.effective_coupling(drive.phi_s);
    let (op, oc, g2) = (drive.omega_p, drive.omega_c, atom.gamma2);
    let (op2, oc2, om2) = (op * op, oc * oc, om * om);
    let den = d_probe(op2, oc2, om2, g2, delta_p);
    let at = 4.0 * delta_p * delta_p - om2;
    let inner = C64::new(2.0 * delta_p * (at - oc2), g2 * at);
    Ok(inner * (-op * at / den))
}

fn d_coupling(op2: f64, oc2: f64, om2: f64, g2: f64, dc: f64) -> f64 {
    let d2 = dc * dc;
    let q = op2 + oc2;
    32.0 * d2 * d2 * op2
        + g2 * g2 * (om2 - 4.0 * d2) * (om2 - 4.0 * d2)
        + 2.0 * op2 * om2 * (q + om2)
        + 4.0 * d2 * (q * q + op2 * (op2 - 4.0 * om2))
}

/// Steady-state coherence under coupling detuning
/// (Δ_p = Δ_L = 0, γ₃ = γ₄ = γ_c = γ = 0):
///
///   ρ₂₁(Δ_c) = [2Ω_p·Ω_c²·Δ_c(4Δ_c²−Ω²) − i·γ₂·Ω_p(4Δ_c²−Ω²)²] / D_c(Ω).
pub fn rho21_coupling_detuned(atom: &AtomSystem, drive: &DriveConfig, delta_c: f64) -> Result<C64> {
    atom.validate()?;
    drive.validate()?;
    require_zero("delta_p", drive.delta_p)?;
    require_zero("delta_l", drive.delta_l)?;
    require_zero("gamma_t", atom.gamma_t)?;
    require_zero("gamma_c", atom.gamma_c)?;
    require_zero("gamma3", atom.gamma3)?;
    require_zero("gamma4", atom.gamma4)?;
    let om = drive.effective_coupling(drive.phi_s);
    let (op, oc, g2) = (drive.omega_p, drive.omega_c, atom.gamma2);
    let (op2, oc2, om2) = (op * op, oc * oc, om * om);
    let den = d_coupling(op2, oc2, om2, g2, delta_c);
    let at = 4.0 * delta_c * delta_c - om2;
    Ok(C64::new(
        2.0 * op * oc2 * delta_c * at / den,
        -g2 * op * at * at / den,
    ))
}

/// First-order decomposition under local microwave detuning:
///
///   χ₀(Δ_L) = c·γ₂Ω_L⁴ / D_L,
///   χ₁(Δ_L) = c·4γ₂Ω_L³(Ω_p²+Ω_c²)·(Ω_L²Ω_p² + 4Δ_L²(Ω_p²+Ω_c²)) / D_L²,
///
/// with c = 2n_eff·μ₁₂²/(ħε₀) and D_L evaluated at Ω = Ω_L. Valid for
/// Ω_s ≪ Ω_L; a non-perturbative drive attaches a warning but still
/// returns the decomposition.
pub fn chi_decompose_local(
    atom: &AtomSystem,
    drive: &DriveConfig,
    delta_l: f64,
) -> Result<SusceptibilityDecomposition> {
    atom.validate()?;
    drive.validate()?;
    let c = chi_prefactor(atom);
    let (op, oc, ol, g2) = (drive.omega_p, drive.omega_c, drive.omega_l, atom.gamma2);
    let (op2, oc2, ol2) = (op * op, oc * oc, ol * ol);
    let q = op2 + oc2;
    let den = d_local(op2, oc2, ol2, g2, delta_l);
    let chi0 = c * g2 * ol2 * ol2 / den;
    let chi1 =
        c * 4.0 * g2 * ol * ol2 * q * (ol2 * op2 + 4.0 * delta_l * delta_l * q) / (den * den);
    SusceptibilityDecomposition::checked(chi0, chi1, perturbative_warnings(drive))
}

/// First-order decomposition under probe detuning:
///
///   χ₀(Δ_p) = c·γ₂(4Δ_p²−Ω_L²)² / D_p,
///   χ₁(Δ_p) = −c·4γ₂Ω_L·A_p / D_p²,
///   A_p = (4Δ_p²−Ω_L²)·[Ω_L²Ω_p²(Ω_c²+Ω_p²) − 16Δ_p⁴Ω_c²
///         + 4Δ_p²Ω_c²(Ω_c²+Ω_L²) + 12Δ_p²Ω_p²(Ω_p²+Ω_c²)].
///
/// Both χ₀ and A_p share the root 4Δ_p² = Ω_L².
pub fn chi_decompose_probe(
    atom: &AtomSystem,
    drive: &DriveConfig,
    delta_p: f64,
) -> Result<SusceptibilityDecomposition> {
    atom.validate()?;
    drive.validate()?;
    let c = chi_prefactor(atom);
    let (op, oc, ol, g2) = (drive.omega_p, drive.omega_c, drive.omega_l, atom.gamma2);
    let (op2, oc2, ol2) = (op * op, oc * oc, ol * ol);
    let d2 = delta_p * delta_p;
    let q = op2 + oc2;
    let den = d_probe(op2, oc2, ol2, g2, delta_p);
    let at = 4.0 * d2 - ol2;
    let chi0 = c * g2 * at * at / den;
    let a_p = at
        * (ol2 * op2 * q - 16.0 * d2 * d2 * oc2
            + 4.0 * d2 * oc2 * (oc2 + ol2)
            + 12.0 * d2 * op2 * q);
    let chi1 = -c * 4.0 * g2 * ol * a_p / (den * den);
    SusceptibilityDecomposition::checked(chi0, chi1, perturbative_warnings(drive))
}

/// First-order decomposition under coupling detuning:
///
///   χ₀(Δ_c) = c·γ₂(4Δ_c²−Ω_L²)² / D_c,
///   χ₁(Δ_c) = −c·4γ₂Ω_L·A_c / D_c²,
///   A_c = (4Δ_c²−Ω_L²)·[Ω_L²Ω_p²(Ω_p²+Ω_c²) + 4Δ_c²(Ω_c⁴+3Ω_c²Ω_p²+3Ω_p⁴)].
///
/// χ₀ and A_c vanish together at 4Δ_c² = Ω_L².
pub fn chi_decompose_coupling(
    atom: &AtomSystem,
    drive: &DriveConfig,
    delta_c: f64,
) -> Result<SusceptibilityDecomposition> {
    atom.validate()?;
    drive.validate()?;
    let c = chi_prefactor(atom);
    let (op, oc, ol, g2) = (drive.omega_p, drive.omega_c, drive.omega_l, atom.gamma2);
    let (op2, oc2, ol2) = (op * op, oc * oc, ol * ol);
    let d2 = delta_c * delta_c;
    let q = op2 + oc2;
    let den = d_coupling(op2, oc2, ol2, g2, delta_c);
    let at = 4.0 * d2 - ol2;
    let chi0 = c * g2 * at * at / den;
    let a_c = at * (ol2 * op2 * q + 4.0 * d2 * (oc2 * oc2 + 3.0 * oc2 * op2 + 3.0 * op2 * op2));
    let chi1 = -c * 4.0 * g2 * ol * a_c / (den * den);
    SusceptibilityDecomposition::checked(chi0, chi1, perturbative_warnings(drive))
}

/// Numerical harmonic extraction, valid in every scenario including γ > 0
/// where no closed form exists.
///
/// Samples the steady state at [`N_PHASE`] equispaced beat phases, converts
/// ρ₂₁ to Im χ, and returns the DC Fourier coefficient as χ₀ and the first
/// cosine harmonic divided by Ω_s as χ₁ (χ₁ = 0 exactly when Ω_s = 0).
/// Second-harmonic content above 10% of the first attaches a warning.
pub fn chi_decompose_numeric(
    atom: &AtomSystem,
    drive: &DriveConfig,
    scenario: &DetuningScenario,
) -> Result<SusceptibilityDecomposition> {
    let (atom, drive) = scenario.apply(atom, drive);
    atom.validate()?;
    drive.validate()?;
    let mut warnings = perturbative_warnings(&drive);

    let mut dc = 0.0;
    let mut first = 0.0;
    let mut second = 0.0;
    for k in 0..N_PHASE {
        let phase = std::f64::consts::TAU * k as f64 / N_PHASE as f64;
        let rho = steady_state(&atom, &drive, phase)?;
        let im_chi = im_chi_from_rho21(&atom, drive.omega_p, rho.rho21());
        dc += im_chi;
        first += im_chi * phase.cos();
        second += im_chi * (2.0 * phase).cos();
    }
    let n = N_PHASE as f64;
    let chi0 = dc / n;
    let a1 = 2.0 * first / n;
    let a2 = 2.0 * second / n;
    if a1 != 0.0 && (a2 / a1).abs() > SECOND_HARMONIC_LIMIT {
        warnings.push(DecompositionWarning::SecondHarmonic {
            ratio: (a2 / a1).abs(),
        });
    }
    let chi1 = if drive.omega_s == 0.0 {
        0.0
    } else {
        a1 / drive.omega_s
    };
    SusceptibilityDecomposition::checked(chi0, chi1, warnings)
}
