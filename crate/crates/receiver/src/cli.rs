//! Configuration ingestion, scenario sweeps, and machine-readable output.
//!
//! Config files are single JSON documents. Every frequency-like field is
//! denominated in ordinary MHz and carries an `_mhz` suffix (the beat
//! frequency is in Hz, `_hz`); parsing converts to internal angular rad/s
//! exactly once, here. Densities are quoted per cm³, lengths in the units
//! their suffix names. Missing sections take the cesium defaults below, and
//! every emitted file embeds the fully resolved config plus its SHA-256 so
//! outputs are reproducible byte for byte.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{AtomSystem, DetectionMode, DriveConfig, ReadoutConfig};
use crate::optimize::{solve, OptimizationReport, Problem, SolveOptions};
use crate::readout::{
    conversion_general, conversion_high_transmittance, gain_db, readout_result, ConversionMetric,
};
use crate::susceptibility::{
    chi_decompose_coupling, chi_decompose_local, chi_decompose_numeric, chi_decompose_probe,
    DetuningAxis, DetuningScenario, SusceptibilityDecomposition,
};
use crate::{Error, Result};

const TAU: f64 = std::f64::consts::TAU;
const MHZ: f64 = TAU * 1e6;

fn mhz(v: f64) -> f64 {
    v * MHZ
}

/// Atom parameters in config units (MHz, nm, cm, cm⁻³).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomSection {
    pub gamma2_mhz: f64,
    pub gamma3_mhz: f64,
    pub gamma4_mhz: f64,
    pub gamma_c_mhz: f64,
    pub gamma_t_mhz: f64,
    /// Probe-transition dipole moment, C·m.
    pub mu12_cm: f64,
    pub n_eff_per_cm3: f64,
    pub lambda_p_nm: f64,
    pub cell_length_cm: f64,
    pub mass_kg: f64,
    pub temperature_k: f64,
}

impl Default for AtomSection {
    /// Cs vapor defaults: D2 probe transition with the cycling-transition
    /// dipole moment, effective density 1e8 cm⁻³, 1 cm cell at 300 K.
    fn default() -> Self {
        AtomSection {
            gamma2_mhz: 5.2,
            gamma3_mhz: 3.9e-3,
            gamma4_mhz: 1.7e-3,
            gamma_c_mhz: 0.0,
            gamma_t_mhz: 0.0,
            mu12_cm: 2.6849e-29,
            n_eff_per_cm3: 1e8,
            lambda_p_nm: 852.35,
            cell_length_cm: 1.0,
            mass_kg: 2.2069e-25,
            temperature_k: 300.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSection {
    pub omega_p_mhz: f64,
    pub omega_c_mhz: f64,
    pub omega_l_mhz: f64,
    pub omega_s_mhz: f64,
    pub delta_p_mhz: f64,
    pub delta_c_mhz: f64,
    pub delta_l_mhz: f64,
    /// Signal-local beat frequency, Hz.
    pub delta_beat_hz: f64,
    pub phi_s_rad: f64,
}

impl Default for DriveSection {
    fn default() -> Self {
        DriveSection {
            omega_p_mhz: 5.7,
            omega_c_mhz: 0.97,
            omega_l_mhz: 4.0,
            omega_s_mhz: 1e-3,
            delta_p_mhz: 0.0,
            delta_c_mhz: 0.0,
            delta_l_mhz: 0.0,
            delta_beat_hz: 1e3,
            phi_s_rad: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutSection {
    pub input_power_w: f64,
    pub detection_mode: DetectionMode,
}

impl Default for ReadoutSection {
    fn default() -> Self {
        ReadoutSection {
            input_power_w: 1.0,
            detection_mode: DetectionMode::GeneralCase,
        }
    }
}

/// Which parameter a sweep scans. Detuning axes use closed forms; the
/// transit axis uses the numerical harmonic extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    DeltaL,
    DeltaP,
    DeltaC,
    GammaT,
}

impl SweepAxis {
    fn detuning_axis(self) -> DetuningAxis {
        match self {
            SweepAxis::DeltaL => DetuningAxis::LocalMicrowave,
            SweepAxis::DeltaP => DetuningAxis::ProbeLaser,
            SweepAxis::DeltaC => DetuningAxis::CouplingLaser,
            SweepAxis::GammaT => DetuningAxis::TransitRate,
        }
    }

    fn label(self) -> &'static str {
        match self {
            SweepAxis::DeltaL => "delta_l",
            SweepAxis::DeltaP => "delta_p",
            SweepAxis::DeltaC => "delta_c",
            SweepAxis::GammaT => "gamma_t",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub lo_mhz: f64,
    pub hi_mhz: f64,
    pub n: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            axis: SweepAxis::DeltaL,
            lo_mhz: -50.0,
            hi_mhz: 50.0,
            n: 1001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub format: OutputFormat,
    pub path: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            format: OutputFormat::Csv,
            path: "sweep.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    /// Conversion referencing; defaults per problem when omitted.
    pub metric: Option<ConversionMetric>,
    pub window_lo_mhz: f64,
    pub window_hi_mhz: f64,
    pub coarse_n: usize,
    pub refine_iters: usize,
    /// P5 sweep extent, kHz.
    pub gamma_max_khz: f64,
    pub gamma_n: usize,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        OptimizeSection {
            metric: None,
            window_lo_mhz: -50.0,
            window_hi_mhz: 50.0,
            coarse_n: 2001,
            refine_iters: 60,
            gamma_max_khz: 200.0,
            gamma_n: 21,
        }
    }
}

/// One fully resolved run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub atom: AtomSection,
    pub drive: DriveSection,
    pub readout: ReadoutSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
    pub optimize: OptimizeSection,
}

impl RunConfig {
    /// The single MHz → rad/s unit boundary.
    pub fn atom_system(&self) -> Result<AtomSystem> {
        let a = &self.atom;
        let atom = AtomSystem {
            gamma2: mhz(a.gamma2_mhz),
            gamma3: mhz(a.gamma3_mhz),
            gamma4: mhz(a.gamma4_mhz),
            gamma_c: mhz(a.gamma_c_mhz),
            gamma_t: mhz(a.gamma_t_mhz),
            mu12: a.mu12_cm,
            n_eff: a.n_eff_per_cm3 * 1e6,
            lambda_p: a.lambda_p_nm * 1e-9,
            cell_length: a.cell_length_cm * 1e-2,
            mass: a.mass_kg,
            temperature: a.temperature_k,
        };
        atom.validate().map_err(config_err)?;
        Ok(atom)
    }

    pub fn drive_config(&self) -> Result<DriveConfig> {
        let d = &self.drive;
        let drive = DriveConfig {
            omega_p: mhz(d.omega_p_mhz),
            omega_c: mhz(d.omega_c_mhz),
            omega_l: mhz(d.omega_l_mhz),
            omega_s: mhz(d.omega_s_mhz),
            delta_p: mhz(d.delta_p_mhz),
            delta_c: mhz(d.delta_c_mhz),
            delta_l: mhz(d.delta_l_mhz),
            delta_beat: d.delta_beat_hz,
            phi_s: d.phi_s_rad,
        };
        drive.validate().map_err(config_err)?;
        Ok(drive)
    }

    pub fn readout_config(&self) -> Result<ReadoutConfig> {
        let readout = ReadoutConfig {
            input_power: self.readout.input_power_w,
            detection_mode: self.readout.detection_mode,
        };
        readout.validate().map_err(config_err)?;
        Ok(readout)
    }

    pub fn solve_options(&self) -> SolveOptions {
        let o = &self.optimize;
        SolveOptions {
            window: (mhz(o.window_lo_mhz), mhz(o.window_hi_mhz)),
            coarse_n: o.coarse_n,
            refine_iters: o.refine_iters,
            metric: o.metric,
            gamma_max: TAU * o.gamma_max_khz * 1e3,
            gamma_n: o.gamma_n,
        }
    }

    /// SHA-256 of the canonical JSON of the resolved config.
    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn config_err(e: Error) -> Error {
    Error::Config(e.to_string())
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let config: RunConfig = serde_json::from_str(&text)?;
    Ok(config)
}

/// One sweep row. `x_mhz` is the scanned value in ordinary MHz (γ/2π for
/// the transit axis); κ columns are in W·s, powers in W.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepRow {
    pub x_mhz: f64,
    pub chi0: f64,
    pub chi1: f64,
    pub kappa: f64,
    pub kappa_prime: f64,
    pub p_dc: f64,
    pub gain_db: f64,
}

const COLUMNS: [&str; 7] = [
    "x_mhz",
    "chi0",
    "chi1",
    "kappa",
    "kappa_prime",
    "p_dc",
    "gain_db",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepMeta {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub x_unit: String,
    pub config_sha256: String,
    pub nan_rows: usize,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub meta: SweepMeta,
    pub rows: Vec<SweepRow>,
}

fn decompose_at(
    axis: SweepAxis,
    atom0: &AtomSystem,
    drive0: &DriveConfig,
    value: f64,
) -> Result<SusceptibilityDecomposition> {
    match axis {
        SweepAxis::DeltaL => chi_decompose_local(atom0, drive0, value),
        SweepAxis::DeltaP => chi_decompose_probe(atom0, drive0, value),
        SweepAxis::DeltaC => chi_decompose_coupling(atom0, drive0, value),
        SweepAxis::GammaT => chi_decompose_numeric(
            atom0,
            drive0,
            &DetuningScenario {
                axis: DetuningAxis::TransitRate,
                value,
            },
        ),
    }
}

/// Computes the sweep table for a resolved config. Rows are evaluated in
/// parallel and emitted in ascending x; the gain column references the
/// detection mode's conversion coefficient at x = 0.
pub fn run_sweep(config: &RunConfig) -> Result<SweepResult> {
    let atom = config.atom_system()?;
    let drive = config.drive_config()?;
    let readout = config.readout_config()?;
    let sweep = &config.sweep;
    if sweep.n == 0 {
        return Err(Error::Config("sweep.n must be at least 1".into()));
    }
    if sweep.n > 1
        && (!sweep.hi_mhz.is_finite() || !sweep.lo_mhz.is_finite() || sweep.hi_mhz <= sweep.lo_mhz)
    {
        return Err(Error::Config(format!(
            "sweep window [{}, {}] MHz is empty",
            sweep.lo_mhz, sweep.hi_mhz
        )));
    }
    if sweep.axis == SweepAxis::GammaT && sweep.lo_mhz < 0.0 {
        return Err(Error::Config("gamma_t sweep requires lo_mhz >= 0".into()));
    }

    let axis = sweep.axis;
    let (atom0, drive0) = DetuningScenario {
        axis: axis.detuning_axis(),
        value: 0.0,
    }
    .apply(&atom, &drive);

    let reference = {
        let decomp = decompose_at(axis, &atom0, &drive0, 0.0)?;
        match readout.detection_mode {
            DetectionMode::GeneralCase => conversion_general(&decomp, &atom, &readout)?,
            DetectionMode::HighTransmittance => {
                conversion_high_transmittance(&decomp, &atom, &readout)?
            }
        }
    };

    let xs: Vec<f64> = if sweep.n == 1 {
        vec![sweep.lo_mhz]
    } else {
        (0..sweep.n)
            .map(|i| sweep.lo_mhz + (sweep.hi_mhz - sweep.lo_mhz) * i as f64 / (sweep.n - 1) as f64)
            .collect()
    };

    let mut rows: Vec<SweepRow> = xs
        .par_iter()
        .map(|&x_mhz| -> Result<SweepRow> {
            let value = mhz(x_mhz);
            let decomp = decompose_at(axis, &atom0, &drive0, value)?;
            let result = readout_result(&decomp, &atom, &readout, drive.omega_s)?;
            let at = match readout.detection_mode {
                DetectionMode::GeneralCase => result.kappa,
                DetectionMode::HighTransmittance => result.kappa_prime,
            };
            let gain = if at == 0.0 {
                f64::NEG_INFINITY
            } else {
                gain_db(at, reference)?
            };
            Ok(SweepRow {
                x_mhz,
                chi0: decomp.chi0,
                chi1: decomp.chi1,
                kappa: result.kappa,
                kappa_prime: result.kappa_prime,
                p_dc: result.p_dc,
                gain_db: gain,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // Parallel map preserves order, but the ascending-x contract must not
    // depend on that.
    rows.sort_by(|a, b| a.x_mhz.total_cmp(&b.x_mhz));

    let nan_rows = rows
        .iter()
        .filter(|r| {
            [r.chi0, r.chi1, r.kappa, r.kappa_prime, r.p_dc]
                .iter()
                .any(|v| v.is_nan())
        })
        .count();

    Ok(SweepResult {
        meta: SweepMeta {
            tool: "rydberg-receiver".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            scenario: axis.label().into(),
            x_unit: "MHz".into(),
            config_sha256: config.sha256(),
            nan_rows,
            config: config.clone(),
        },
        rows,
    })
}

fn write_csv(result: &SweepResult, w: &mut impl Write) -> Result<()> {
    let meta = &result.meta;
    writeln!(w, "# tool: {} {}", meta.tool, meta.version)?;
    writeln!(w, "# scenario: {}", meta.scenario)?;
    writeln!(w, "# x_unit: {}", meta.x_unit)?;
    writeln!(w, "# config_sha256: {}", meta.config_sha256)?;
    writeln!(
        w,
        "# config: {}",
        serde_json::to_string(&meta.config).map_err(Error::from)?
    )?;
    writeln!(w, "{}", COLUMNS.join(","))?;
    for r in &result.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.x_mhz, r.chi0, r.chi1, r.kappa, r.kappa_prime, r.p_dc, r.gain_db
        )?;
    }
    if meta.nan_rows > 0 {
        writeln!(w, "# nan_rows: {}", meta.nan_rows)?;
    }
    Ok(())
}

/// Writes the sweep result in the configured format; `out` overrides the
/// config's output path.
pub fn write_sweep(
    result: &SweepResult,
    config: &RunConfig,
    out: Option<&Path>,
) -> Result<PathBuf> {
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&config.output.path));
    let mut buffer = Vec::new();
    match config.output.format {
        OutputFormat::Csv => write_csv(result, &mut buffer)?,
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut buffer, result).map_err(Error::from)?;
            buffer.push(b'\n');
        }
    }
    fs::write(&path, &buffer)?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeOutput {
    pub meta: SweepMeta,
    pub report: OptimizationReport,
    /// Optimum in ordinary MHz for convenience (report fields are rad/s).
    pub optimum_mhz: f64,
}

/// Runs one optimization problem and serializes the report as JSON.
pub fn run_optimize(config: &RunConfig, problem: Problem) -> Result<OptimizeOutput> {
    let atom = config.atom_system()?;
    let drive = config.drive_config()?;
    let readout = config.readout_config()?;
    let report = solve(problem, &atom, &drive, &readout, &config.solve_options())?;
    Ok(OptimizeOutput {
        meta: SweepMeta {
            tool: "rydberg-receiver".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            scenario: format!("{:?}", report.axis),
            x_unit: "rad/s".into(),
            config_sha256: config.sha256(),
            nan_rows: 0,
            config: config.clone(),
        },
        optimum_mhz: report.optimum / MHZ,
        report,
    })
}

pub fn write_optimize(
    output: &OptimizeOutput,
    config: &RunConfig,
    out: Option<&Path>,
) -> Result<PathBuf> {
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&config.output.path));
    let mut buffer = Vec::new();
    serde_json::to_writer_pretty(&mut buffer, output).map_err(Error::from)?;
    buffer.push(b'\n');
    fs::write(&path, &buffer)?;
    Ok(path)
}

/// Exit-code contract: 0 ok, 1 config, 2 i/o, 3 numerical.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain { .. } | Error::Contract(_) => 1,
        Error::Io(_) => 2,
        Error::Numerical { .. }
        | Error::Consistency { .. }
        | Error::StepSizeUnderflow { .. }
        | Error::Timeout { .. } => 3,
    }
}
