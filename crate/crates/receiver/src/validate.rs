//! Built-in oracle suite: checks every closed form against the numerical
//! Liouvillian solve at the default cesium parameters and reports one
//! pass/fail line per check. Used by the `validate` CLI subcommand.

use num_complex::Complex64;

use crate::cli::RunConfig;
use crate::liouvillian::steady_state;
use crate::model::{AtomSystem, DriveConfig};
use crate::optimize::{
    absorption_weight, delta_l_star_star, delta_l_star_weighted, grid_refine_argmax,
    CROSS_CHECK_TOL,
};
use crate::readout::{conversion_coefficient, ConversionMetric};
use crate::susceptibility::{
    chi_decompose_local, chi_decompose_numeric, rho21_coupling_detuned, rho21_local_detuned,
    rho21_probe_detuned, rho21_resonant, DetuningAxis, DetuningScenario,
};
use crate::Result;

const TAU: f64 = std::f64::consts::TAU;

/// Outcome of one oracle equivalence check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn from_deviation(name: &str, max_deviation: f64, tolerance: f64, detail: String) -> Self {
        CheckOutcome {
            name: name.into(),
            passed: max_deviation <= tolerance,
            max_deviation,
            tolerance,
            detail,
        }
    }
}

/// Grid points per scenario check.
pub const GRID_POINTS: usize = 101;
/// Closed-form vs numerical-solve tolerance (relative).
pub const ORACLE_REL_TOL: f64 = 1e-9;
/// Coherence magnitude below which a grid point counts as a structural
/// zero (4Δ² = Ω² roots) and is held to this absolute bound instead of the
/// relative one.
pub const ZERO_SCALE: f64 = 1e-10;

type ClosedForm = dyn Fn(&AtomSystem, &DriveConfig, f64) -> Result<Complex64> + Sync;

/// Compares one scenario's closed-form coherence against the numerical
/// steady state over a grid on ±`half_window`. The closed form is a
/// parameter so a corrupted implementation is caught by the same machinery
/// that certifies the real one.
pub fn check_scenario_closed_form(
    name: &str,
    axis: DetuningAxis,
    closed_form: &ClosedForm,
    atom: &AtomSystem,
    drive: &DriveConfig,
    half_window: f64,
) -> CheckOutcome {
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for i in 0..GRID_POINTS {
        let delta = -half_window + 2.0 * half_window * i as f64 / (GRID_POINTS - 1) as f64;
        let scenario = DetuningScenario { axis, value: delta };
        let (atom_s, drive_s) = scenario.apply(atom, drive);
        let result = steady_state(&atom_s, &drive_s, drive_s.phi_s).and_then(|numeric| {
            let closed = closed_form(&atom_s, &drive_s, delta)?;
            Ok((numeric.rho21(), closed))
        });
        match result {
            Ok((numeric, closed)) => {
                let dev = (numeric - closed).norm();
                let rel = if numeric.norm() >= ZERO_SCALE {
                    dev / numeric.norm()
                } else if dev <= ZERO_SCALE {
                    // Structural zero of the coherence: absolute check.
                    0.0
                } else {
                    f64::INFINITY
                };
                if rel > worst {
                    worst = rel;
                    detail = format!(
                        "worst at {:.3} MHz: closed {:.9e}{:+.9e}i vs numeric {:.9e}{:+.9e}i",
                        delta / (TAU * 1e6),
                        closed.re,
                        closed.im,
                        numeric.re,
                        numeric.im
                    );
                }
            }
            Err(e) => {
                return CheckOutcome {
                    name: name.into(),
                    passed: false,
                    max_deviation: f64::INFINITY,
                    tolerance: ORACLE_REL_TOL,
                    detail: format!("error at {:.3} MHz: {e}", delta / (TAU * 1e6)),
                }
            }
        }
    }
    CheckOutcome::from_deviation(name, worst, ORACLE_REL_TOL, detail)
}

/// Resonant check: no detuning axis, so the grid scans the local Rabi
/// frequency instead.
fn check_resonant(atom: &AtomSystem, drive: &DriveConfig) -> CheckOutcome {
    let scenario = DetuningScenario {
        axis: DetuningAxis::LocalMicrowave,
        value: 0.0,
    };
    let (atom_s, base) = scenario.apply(atom, drive);
    let mut worst = 0.0f64;
    for i in 0..GRID_POINTS {
        let omega_l = TAU * 50e6 * (i + 1) as f64 / GRID_POINTS as f64;
        let drive_s = DriveConfig { omega_l, ..base };
        let numeric = match steady_state(&atom_s, &drive_s, drive_s.phi_s) {
            Ok(r) => r.rho21(),
            Err(e) => {
                return CheckOutcome {
                    name: "rho21_resonant vs steady_state".into(),
                    passed: false,
                    max_deviation: f64::INFINITY,
                    tolerance: ORACLE_REL_TOL,
                    detail: e.to_string(),
                }
            }
        };
        let closed = match rho21_resonant(&atom_s, &drive_s) {
            Ok(c) => c,
            Err(e) => {
                return CheckOutcome {
                    name: "rho21_resonant vs steady_state".into(),
                    passed: false,
                    max_deviation: f64::INFINITY,
                    tolerance: ORACLE_REL_TOL,
                    detail: e.to_string(),
                }
            }
        };
        worst = worst.max((numeric - closed).norm() / numeric.norm());
    }
    CheckOutcome::from_deviation(
        "rho21_resonant vs steady_state",
        worst,
        ORACLE_REL_TOL,
        format!("{GRID_POINTS} local Rabi points in (0, 50] MHz"),
    )
}

fn check_reduction_chain(atom: &AtomSystem, drive: &DriveConfig) -> CheckOutcome {
    let scenario = DetuningScenario {
        axis: DetuningAxis::LocalMicrowave,
        value: 0.0,
    };
    let (atom_s, drive_s) = scenario.apply(atom, drive);
    let run = || -> Result<f64> {
        let base = rho21_resonant(&atom_s, &drive_s)?;
        let mut worst = 0.0f64;
        for r in [
            rho21_local_detuned(&atom_s, &drive_s, 0.0)?,
            rho21_probe_detuned(&atom_s, &drive_s, 0.0)?,
            rho21_coupling_detuned(&atom_s, &drive_s, 0.0)?,
        ] {
            worst = worst.max((r - base).norm() / base.norm());
        }
        Ok(worst)
    };
    match run() {
        Ok(worst) => CheckOutcome::from_deviation(
            "zero-detuning reduction chain",
            worst,
            1e-12,
            "all detuned forms at zero vs resonant form".into(),
        ),
        Err(e) => CheckOutcome {
            name: "zero-detuning reduction chain".into(),
            passed: false,
            max_deviation: f64::INFINITY,
            tolerance: 1e-12,
            detail: e.to_string(),
        },
    }
}

fn check_local_optimum_closed_forms(atom: &AtomSystem, drive: &DriveConfig) -> Vec<CheckOutcome> {
    let scenario = DetuningScenario {
        axis: DetuningAxis::LocalMicrowave,
        value: 0.0,
    };
    let (atom_s, drive_s) = scenario.apply(atom, drive);
    let window = (-TAU * 50e6, TAU * 50e6);
    let mut out = Vec::new();

    for (name, metric, weight) in [
        (
            "delta_l_star (input-power weight) vs grid argmax",
            ConversionMetric::InputPower,
            absorption_weight(atom),
        ),
        (
            "delta_l_star (dc^2 weight) vs grid argmax",
            ConversionMetric::DcPowerSquared,
            -absorption_weight(atom),
        ),
    ] {
        let readout = crate::model::ReadoutConfig {
            input_power: 1.0,
            detection_mode: crate::model::DetectionMode::GeneralCase,
        };
        let objective = |delta: f64| -> Result<f64> {
            conversion_coefficient(
                &chi_decompose_local(&atom_s, &drive_s, delta)?,
                atom,
                &readout,
                metric,
            )
        };
        let outcome = (|| -> Result<CheckOutcome> {
            let grid = grid_refine_argmax(objective, window, 2001, 60)?;
            let closed = delta_l_star_weighted(
                drive_s.omega_p,
                drive_s.omega_c,
                drive_s.omega_l,
                atom_s.gamma2,
                weight,
            )?;
            let dev = (closed.abs() - grid.x.abs()).abs();
            Ok(CheckOutcome::from_deviation(
                name,
                dev,
                CROSS_CHECK_TOL.max(grid.bracket_width),
                format!(
                    "closed {:.6} MHz vs grid {:.6} MHz",
                    closed / (TAU * 1e6),
                    grid.x / (TAU * 1e6)
                ),
            ))
        })();
        out.push(outcome.unwrap_or_else(|e| CheckOutcome {
            name: name.into(),
            passed: false,
            max_deviation: f64::INFINITY,
            tolerance: CROSS_CHECK_TOL,
            detail: e.to_string(),
        }));
    }

    let outcome = (|| -> Result<CheckOutcome> {
        let objective =
            |delta: f64| -> Result<f64> { Ok(chi_decompose_local(&atom_s, &drive_s, delta)?.chi1) };
        let grid = grid_refine_argmax(objective, window, 2001, 60)?;
        let closed = delta_l_star_star(&drive_s, atom_s.gamma2)?;
        let dev = (closed.abs() - grid.x.abs()).abs();
        Ok(CheckOutcome::from_deviation(
            "delta_l_star_star vs chi1 grid argmax",
            dev,
            TAU * 5e3,
            format!(
                "closed {:.6} MHz vs grid {:.6} MHz",
                closed / (TAU * 1e6),
                grid.x / (TAU * 1e6)
            ),
        ))
    })();
    out.push(outcome.unwrap_or_else(|e| CheckOutcome {
        name: "delta_l_star_star vs chi1 grid argmax".into(),
        passed: false,
        max_deviation: f64::INFINITY,
        tolerance: TAU * 5e3,
        detail: e.to_string(),
    }));
    out
}

fn check_harmonic_extraction(atom: &AtomSystem, drive: &DriveConfig) -> CheckOutcome {
    let outcome = (|| -> Result<CheckOutcome> {
        let mut probe = *drive;
        probe.omega_s = TAU * 100.0;
        let delta = TAU * 2.3e6;
        let scenario = DetuningScenario {
            axis: DetuningAxis::LocalMicrowave,
            value: delta,
        };
        let numeric = chi_decompose_numeric(atom, &probe, &scenario)?;
        let closed = chi_decompose_local(atom, &probe, delta)?;
        let dev = ((numeric.chi0 - closed.chi0) / closed.chi0)
            .abs()
            .max(((numeric.chi1 - closed.chi1) / closed.chi1).abs());
        Ok(CheckOutcome::from_deviation(
            "numeric harmonic extraction vs closed form",
            dev,
            5e-3,
            format!(
                "chi0 {:.6e} vs {:.6e}, chi1 {:.6e} vs {:.6e}",
                numeric.chi0, closed.chi0, numeric.chi1, closed.chi1
            ),
        ))
    })();
    outcome.unwrap_or_else(|e| CheckOutcome {
        name: "numeric harmonic extraction vs closed form".into(),
        passed: false,
        max_deviation: f64::INFINITY,
        tolerance: 5e-3,
        detail: e.to_string(),
    })
}

/// Runs the full oracle suite at the resolved config's parameters.
pub fn run_all(config: &RunConfig) -> Result<Vec<CheckOutcome>> {
    let atom = config.atom_system()?;
    let drive = config.drive_config()?;
    let half_window = TAU * 50e6;

    let mut outcomes = vec![check_resonant(&atom, &drive)];
    outcomes.push(check_scenario_closed_form(
        "rho21_local_detuned vs steady_state",
        DetuningAxis::LocalMicrowave,
        &|a, d, x| rho21_local_detuned(a, d, x),
        &atom,
        &drive,
        half_window,
    ));
    outcomes.push(check_scenario_closed_form(
        "rho21_probe_detuned vs steady_state",
        DetuningAxis::ProbeLaser,
        &|a, d, x| rho21_probe_detuned(a, d, x),
        &atom,
        &drive,
        half_window,
    ));
    outcomes.push(check_scenario_closed_form(
        "rho21_coupling_detuned vs steady_state",
        DetuningAxis::CouplingLaser,
        &|a, d, x| rho21_coupling_detuned(a, d, x),
        &atom,
        &drive,
        half_window,
    ));
    outcomes.push(check_reduction_chain(&atom, &drive));
    outcomes.extend(check_local_optimum_closed_forms(&atom, &drive));
    outcomes.push(check_harmonic_extraction(&atom, &drive));
    Ok(outcomes)
}
