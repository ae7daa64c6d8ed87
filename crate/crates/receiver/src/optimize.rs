//! Sensitivity-maximizing operating points.
//!
//! Problems P1–P5 pick one scan axis each: local microwave detuning with
//! (P1) and without (P2) the DC attenuation weight, probe detuning (P3),
//! coupling detuning (P4), and the transit relaxation rate (P5). P1 and P2
//! have closed-form optima that are cross-checked against a grid-refined
//! argmax of the same objective; P3–P5 are solved numerically. Objectives
//! are even in the detuning, so optima come in ± pairs; the positive root
//! is reported and the mirror lobe recorded in the grid metadata.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{AtomSystem, DriveConfig, ReadoutConfig};
use crate::readout::{conversion_coefficient, gain_db, ConversionMetric};
use crate::susceptibility::{
    chi_decompose_coupling, chi_decompose_local, chi_decompose_numeric, chi_decompose_probe,
    chi_prefactor, DetuningAxis, DetuningScenario,
};
use crate::{Error, Result};

const TAU: f64 = std::f64::consts::TAU;

/// Absolute tolerance for closed-form vs grid argmax agreement, rad/s.
pub const CROSS_CHECK_TOL: f64 = TAU * 10e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    /// Local microwave detuning, input-power-weighted conversion.
    P1,
    /// Local microwave detuning, thin-medium conversion (pure χ₁).
    P2,
    /// Probe detuning.
    P3,
    /// Coupling detuning.
    P4,
    /// Transit relaxation sweep (degradation curve, boundary optimum).
    P5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    GridRefine,
}

/// Constant absorption weight C = 2kL·n_eff·μ₁₂²/(ħε₀γ₂) entering the
/// closed-form detuning optimum. Dimensionless.
pub fn absorption_weight(atom: &AtomSystem) -> f64 {
    atom.wavevector() * atom.cell_length * chi_prefactor(atom) / atom.gamma2
}

/// Closed-form stationary local-microwave detuning of the weighted
/// objective e^{−w_C·kLχ₀(Δ_L)}·χ₁(Δ_L), parameterized by a signed
/// dimensionless weight (`weight_c` = +C for the input-power-referenced
/// coefficient, −C for the DC²-referenced one, 0 for unweighted χ₁):
///
///   Δ_L* = (Ω_p²Ω_L / 2U)·sqrt[(Wγ₂²Ω_L² − 2U + sqrt(4(U+V)² + (Wγ₂²Ω_L²)²)) / 2],
///
/// with U = Ω_p²(Ω_p²+Ω_c²), V = Ω_L²(2Ω_p²+γ₂²), W the signed weight.
/// Returns the positive root; −Δ_L* is the mirror optimum.
pub fn delta_l_star_weighted(
    omega_p: f64,
    omega_c: f64,
    omega_l: f64,
    gamma2: f64,
    weight_c: f64,
) -> Result<f64> {
    for (field, v) in [
        ("omega_p", omega_p),
        ("omega_c", omega_c),
        ("omega_l", omega_l),
        ("gamma2", gamma2),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain {
                field,
                message: format!("must be positive and finite, got {v}"),
            });
        }
    }
    let op2 = omega_p * omega_p;
    let oc2 = omega_c * omega_c;
    let ol2 = omega_l * omega_l;
    let u = op2 * (op2 + oc2);
    let v = ol2 * (2.0 * op2 + gamma2 * gamma2);
    let cc = weight_c * gamma2 * gamma2 * ol2;
    let root = (4.0 * (u + v) * (u + v) + cc * cc).sqrt();
    let inner = (cc - 2.0 * u + root) / 2.0;
    if inner < 0.0 {
        return Err(Error::Numerical {
            what: "detuning optimum radicand negative (weight too negative)".into(),
            value: inner,
        });
    }
    Ok(op2 * omega_l / (2.0 * u) * inner.sqrt())
}

/// General-case optimal local microwave detuning (absorption weight +C
/// from the atomic medium). Positive root.
pub fn delta_l_star(atom: &AtomSystem, drive: &DriveConfig) -> Result<f64> {
    atom.validate()?;
    drive.validate()?;
    delta_l_star_weighted(
        drive.omega_p,
        drive.omega_c,
        drive.omega_l,
        atom.gamma2,
        absorption_weight(atom),
    )
}

/// High-transmittance optimal local microwave detuning,
///
///   Δ_L** = Ω_L²·sqrt(2Ω_p² + γ₂²) / (2(Ω_p² + Ω_c²)),
///
/// the C → 0 limit of [`delta_l_star`].
pub fn delta_l_star_star(drive: &DriveConfig, gamma2: f64) -> Result<f64> {
    drive.validate()?;
    if !(gamma2 > 0.0 && gamma2.is_finite()) {
        return Err(Error::Domain {
            field: "gamma2",
            message: format!("must be positive and finite, got {gamma2}"),
        });
    }
    let op2 = drive.omega_p * drive.omega_p;
    let oc2 = drive.omega_c * drive.omega_c;
    let ol2 = drive.omega_l * drive.omega_l;
    Ok(ol2 * (2.0 * op2 + gamma2 * gamma2).sqrt() / (2.0 * (op2 + oc2)))
}

/// Result of a coarse-scan + golden-section maximization of |objective|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridArgmax {
    /// Argmax location.
    pub x: f64,
    /// Signed objective value at the argmax.
    pub value: f64,
    /// Width of the final refinement bracket.
    pub bracket_width: f64,
    /// Best extremum whose objective sign is opposite to the primary one
    /// (the "minimum" lobe of a sign-changing response), if any.
    pub secondary: Option<(f64, f64)>,
}

/// Golden-section maximization of `direction * objective` on [a, b].
fn golden_refine(
    objective: &(impl Fn(f64) -> Result<f64> + Sync),
    direction: f64,
    mut a: f64,
    mut b: f64,
    iters: usize,
) -> Result<(f64, f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let eval = |x: f64| -> Result<f64> {
        let v = objective(x)?;
        if v.is_nan() {
            return Err(Error::Numerical {
                what: format!("objective returned NaN at {x:.6e}"),
                value: x,
            });
        }
        Ok(direction * v)
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
        if b - a <= f64::EPSILON * (a.abs().max(b.abs()).max(1.0)) {
            break;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, objective(x)?, b - a))
}

struct Candidate {
    x: f64,
    value: f64,
    bracket_width: f64,
    interior: bool,
}

/// Coarse scan (`coarse_n` points over `window`) followed by golden-section
/// refinement around the best bracket.
///
/// Both signed extrema — the maximum and the minimum of the objective —
/// are located; among candidates that are interior local extrema the one
/// with the larger magnitude is returned (a sign-changing response has two
/// lobes, and the deeper one wins), falling back to the signed maximum
/// when neither extremum is interior. The losing opposite-sign lobe, when
/// interior, is reported as `secondary`. NaN anywhere is propagated as an
/// error naming the offending abscissa.
pub fn grid_refine_argmax(
    objective: impl Fn(f64) -> Result<f64> + Sync,
    window: (f64, f64),
    coarse_n: usize,
    refine_iters: usize,
) -> Result<GridArgmax> {
    let (lo, hi) = window;
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return Err(Error::Domain {
            field: "window",
            message: format!("invalid window [{lo:.3e}, {hi:.3e}]"),
        });
    }
    if coarse_n < 3 {
        return Err(Error::Domain {
            field: "coarse_n",
            message: "need at least 3 coarse points".into(),
        });
    }
    let xs: Vec<f64> = (0..coarse_n)
        .map(|i| lo + (hi - lo) * i as f64 / (coarse_n - 1) as f64)
        .collect();
    let values: Vec<f64> = xs
        .par_iter()
        .map(|&x| objective(x))
        .collect::<Result<Vec<_>>>()?;
    for (&x, &v) in xs.iter().zip(&values) {
        if v.is_nan() {
            return Err(Error::Numerical {
                what: format!("objective returned NaN at {x:.6e}"),
                value: x,
            });
        }
    }

    let refine_at = |i: usize, direction: f64| -> Result<Candidate> {
        let a = xs[i.saturating_sub(1)];
        let b = xs[(i + 1).min(coarse_n - 1)];
        let (x, value, bracket_width) = golden_refine(&objective, direction, a, b, refine_iters)?;
        Ok(Candidate {
            x,
            value,
            bracket_width,
            interior: i > 0 && i < coarse_n - 1,
        })
    };

    let imax = (0..coarse_n)
        .max_by(|&i, &j| values[i].total_cmp(&values[j]))
        .expect("nonempty grid");
    let imin = (0..coarse_n)
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .expect("nonempty grid");
    let cand_max = refine_at(imax, 1.0)?;
    let cand_min = refine_at(imin, -1.0)?;

    let min_is_distinct = imin != imax;
    let pick_min = min_is_distinct
        && match (cand_max.interior, cand_min.interior) {
            (true, true) => cand_min.value.abs() > cand_max.value.abs(),
            (false, true) => true,
            (true, false) => false,
            (false, false) => cand_min.value.abs() > cand_max.value.abs(),
        };
    let (primary, other) = if pick_min {
        (cand_min, Some(cand_max))
    } else if min_is_distinct {
        (cand_max, Some(cand_min))
    } else {
        (cand_max, None)
    };

    let secondary = other
        .filter(|o| o.interior && o.value != 0.0 && o.value.signum() != primary.value.signum())
        .map(|o| (o.x, o.value));

    Ok(GridArgmax {
        x: primary.x,
        value: primary.value,
        bracket_width: primary.bracket_width,
        secondary,
    })
}

/// Grid/refinement metadata attached to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    /// Scan window, rad/s (or s⁻¹ for P5).
    pub window: (f64, f64),
    pub coarse_n: usize,
    pub refine_iters: usize,
    /// Final refinement bracket width, rad/s.
    pub bracket_width: f64,
    /// Grid argmax used to cross-check a closed form, when one exists.
    pub grid_argmax: Option<f64>,
    /// Mirror/opposite-sign extremum (objectives are even in detuning).
    pub secondary_optimum: Option<f64>,
    /// Degradation curve for P5: (γ, conversion coefficient) pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<Vec<(f64, f64)>>,
    /// Whether the P5 curve is strictly decreasing in |κ|.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strictly_decreasing: Option<bool>,
}

/// Outcome of one optimization problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub problem: Problem,
    pub axis: DetuningAxis,
    pub metric: ConversionMetric,
    /// Optimal detuning (rad/s) or transit rate (s⁻¹); positive root for
    /// the symmetric detuning objectives.
    pub optimum: f64,
    /// Conversion coefficient at the optimum, W·s.
    pub kappa_at_optimum: f64,
    /// Conversion coefficient at the resonant reference (Δ = 0 or γ = 0),
    /// W·s.
    pub kappa_at_zero: f64,
    /// 10·log₁₀(|κ_opt|/|κ_0|).
    pub gain_db: f64,
    pub method: Method,
    pub grid: GridMeta,
}

/// Scan and refinement controls; `metric: None` selects each problem's
/// default referencing (P1/P3/P4: DC²-referenced, P2: DC-referenced,
/// P5: input-power).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Detuning window, rad/s.
    pub window: (f64, f64),
    pub coarse_n: usize,
    pub refine_iters: usize,
    pub metric: Option<ConversionMetric>,
    /// Largest transit rate for the P5 sweep, s⁻¹.
    pub gamma_max: f64,
    /// Number of P5 sweep points.
    pub gamma_n: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            window: (-TAU * 50e6, TAU * 50e6),
            coarse_n: 2001,
            refine_iters: 60,
            metric: None,
            gamma_max: TAU * 200e3,
            gamma_n: 21,
        }
    }
}

fn default_metric(problem: Problem) -> ConversionMetric {
    match problem {
        Problem::P1 | Problem::P3 | Problem::P4 => ConversionMetric::DcPowerSquared,
        Problem::P2 => ConversionMetric::DcPower,
        Problem::P5 => ConversionMetric::InputPower,
    }
}

fn signed_weight(atom: &AtomSystem, metric: ConversionMetric) -> f64 {
    match metric {
        ConversionMetric::InputPower => absorption_weight(atom),
        ConversionMetric::DcPower => 0.0,
        ConversionMetric::DcPowerSquared => -absorption_weight(atom),
    }
}

/// Solves one of P1–P5 and assembles the report.
///
/// P1/P2 evaluate the closed-form optimum and cross-check it against the
/// grid-refined argmax of the same objective; disagreement beyond
/// [`CROSS_CHECK_TOL`] (or the final bracket width, if larger) is a
/// consistency error. P3/P4 are grid-only. P5 sweeps γ over
/// [0, `gamma_max`] via the numerical harmonic extraction and reports the
/// degradation curve with its boundary argmax.
pub fn solve(
    problem: Problem,
    atom: &AtomSystem,
    drive: &DriveConfig,
    readout: &ReadoutConfig,
    options: &SolveOptions,
) -> Result<OptimizationReport> {
    atom.validate()?;
    drive.validate()?;
    readout.validate()?;
    let metric = options.metric.unwrap_or_else(|| default_metric(problem));

    let axis = match problem {
        Problem::P1 | Problem::P2 => DetuningAxis::LocalMicrowave,
        Problem::P3 => DetuningAxis::ProbeLaser,
        Problem::P4 => DetuningAxis::CouplingLaser,
        Problem::P5 => DetuningAxis::TransitRate,
    };
    // Project onto the scenario assumption set once; the axis value is
    // supplied per evaluation below.
    let (atom0, drive0) = DetuningScenario { axis, value: 0.0 }.apply(atom, drive);

    if problem == Problem::P5 {
        return solve_transit(atom, drive, &atom0, &drive0, readout, metric, options);
    }

    let decompose = move |delta: f64| match axis {
        DetuningAxis::LocalMicrowave => chi_decompose_local(&atom0, &drive0, delta),
        DetuningAxis::ProbeLaser => chi_decompose_probe(&atom0, &drive0, delta),
        DetuningAxis::CouplingLaser => chi_decompose_coupling(&atom0, &drive0, delta),
        DetuningAxis::TransitRate => unreachable!(),
    };
    let objective = move |delta: f64| -> Result<f64> {
        conversion_coefficient(&decompose(delta)?, atom, readout, metric)
    };

    let grid = grid_refine_argmax(
        objective,
        options.window,
        options.coarse_n,
        options.refine_iters,
    )?;

    let (optimum, method) = match problem {
        Problem::P1 => {
            let closed = delta_l_star_weighted(
                drive.omega_p,
                drive.omega_c,
                drive.omega_l,
                atom.gamma2,
                signed_weight(atom, metric),
            )?;
            cross_check(closed, &grid)?;
            (closed, Method::ClosedForm)
        }
        Problem::P2 => {
            let closed = delta_l_star_star(drive, atom.gamma2)?;
            cross_check(closed, &grid)?;
            (closed, Method::ClosedForm)
        }
        _ => (grid.x.abs(), Method::GridRefine),
    };

    let kappa_at_optimum = objective(optimum)?;
    let kappa_at_zero = objective(0.0)?;
    let gain = gain_db(kappa_at_optimum, kappa_at_zero)?;
    check_gain_invariant(gain)?;

    Ok(OptimizationReport {
        problem,
        axis,
        metric,
        optimum,
        kappa_at_optimum,
        kappa_at_zero,
        gain_db: gain,
        method,
        grid: GridMeta {
            window: options.window,
            coarse_n: options.coarse_n,
            refine_iters: options.refine_iters,
            bracket_width: grid.bracket_width,
            grid_argmax: Some(grid.x),
            secondary_optimum: grid.secondary.map(|(x, _)| x),
            curve: None,
            strictly_decreasing: None,
        },
    })
}

fn cross_check(closed: f64, grid: &GridArgmax) -> Result<()> {
    // The detuning objectives are even, so the grid may land on the mirror
    // lobe; compare magnitudes.
    let tol = CROSS_CHECK_TOL.max(grid.bracket_width);
    if (closed.abs() - grid.x.abs()).abs() > tol {
        return Err(Error::Consistency {
            what: "closed-form optimum vs grid argmax".into(),
            a: closed,
            b: grid.x,
        });
    }
    Ok(())
}

fn check_gain_invariant(gain: f64) -> Result<()> {
    // The resonant point is feasible, so the optimum can never lose to it.
    if gain < -1e-9 {
        return Err(Error::Consistency {
            what: "optimum worse than resonant reference".into(),
            a: gain,
            b: 0.0,
        });
    }
    Ok(())
}

fn solve_transit(
    atom: &AtomSystem,
    drive: &DriveConfig,
    atom0: &AtomSystem,
    drive0: &DriveConfig,
    readout: &ReadoutConfig,
    metric: ConversionMetric,
    options: &SolveOptions,
) -> Result<OptimizationReport> {
    if options.gamma_n < 2 || options.gamma_max.is_nan() || options.gamma_max <= 0.0 {
        return Err(Error::Domain {
            field: "gamma_n/gamma_max",
            message: "transit sweep needs gamma_max > 0 and at least 2 points".into(),
        });
    }
    let gammas: Vec<f64> = (0..options.gamma_n)
        .map(|i| options.gamma_max * i as f64 / (options.gamma_n - 1) as f64)
        .collect();
    let curve: Vec<(f64, f64)> = gammas
        .par_iter()
        .map(|&g| {
            let scenario = DetuningScenario {
                axis: DetuningAxis::TransitRate,
                value: g,
            };
            let decomp = chi_decompose_numeric(atom0, drive0, &scenario)?;
            let kappa = conversion_coefficient(&decomp, atom, readout, metric)?;
            Ok((g, kappa))
        })
        .collect::<Result<Vec<_>>>()?;

    let strictly_decreasing = curve
        .windows(2)
        .all(|pair| pair[1].1.abs() < pair[0].1.abs());
    let best = curve
        .iter()
        .copied()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("nonempty curve");
    let kappa_at_zero = curve[0].1;
    let gain = gain_db(best.1, kappa_at_zero)?;
    check_gain_invariant(gain)?;

    let _ = drive;
    Ok(OptimizationReport {
        problem: Problem::P5,
        axis: DetuningAxis::TransitRate,
        metric,
        optimum: best.0,
        kappa_at_optimum: best.1,
        kappa_at_zero,
        gain_db: gain,
        method: Method::GridRefine,
        grid: GridMeta {
            window: (0.0, options.gamma_max),
            coarse_n: options.gamma_n,
            refine_iters: 0,
            bracket_width: options.gamma_max / (options.gamma_n - 1) as f64,
            grid_argmax: Some(best.0),
            secondary_optimum: None,
            curve: Some(curve),
            strictly_decreasing: Some(strictly_decreasing),
        },
    })
}
