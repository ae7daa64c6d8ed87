//! End-to-end checks of the binary: exit-code contract, output formats,
//! determinism through the executable, and the shipped figure recipes.

use std::fs;
use std::path::Path;
use std::process::Command;

use rydberg_receiver::cli::{run_sweep, RunConfig};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rydberg-receiver"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn sweep_writes_csv_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"sweep": {"axis": "delta_l", "lo_mhz": -10, "hi_mhz": 10, "n": 21}}"#,
    );
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let status = binary()
            .args(["sweep", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = fs::read(&out_a).unwrap();
    let b = fs::read(&out_b).unwrap();
    assert_eq!(a, b, "binary runs must be byte-identical");
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# tool: rydberg-receiver"));
    assert!(text.contains("x_mhz,chi0,chi1,kappa,kappa_prime,p_dc,gain_db"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 22); // header + 21 rows
}

#[test]
fn invalid_config_exits_1_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        r#"{"drive": {"omega_p_mhz": -5.7}}"#,
    );
    let output = binary()
        .args(["sweep", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("omega_p"), "stderr: {stderr}");

    let config = write_config(
        dir.path(),
        "unknown.json",
        r#"{"sweep": {"axsi": "delta_l"}}"#,
    );
    let output = binary()
        .args(["sweep", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("axsi"), "stderr: {stderr}");
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.json",
        r#"{"sweep": {"axis": "delta_l", "lo_mhz": -1, "hi_mhz": 1, "n": 3}}"#,
    );
    let output = binary()
        .args(["sweep", "--config"])
        .arg(&config)
        .args(["--out", "/nonexistent-dir/out.csv"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn missing_config_exits_2() {
    let output = binary()
        .args(["sweep", "--config", "/nonexistent-dir/none.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn optimize_p2_reports_expected_optimum_and_gain() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.json", "{}");
    let out = dir.path().join("p2.json");
    let status = binary()
        .args(["optimize", "--problem", "p2", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let optimum_mhz = parsed["optimum_mhz"].as_f64().unwrap();
    assert!(
        (optimum_mhz - 2.2955).abs() < 1e-3,
        "P2 optimum {optimum_mhz} MHz"
    );
    let gain = parsed["report"]["gain_db"].as_f64().unwrap();
    assert!((gain - 0.77).abs() <= 0.05, "P2 gain {gain} dB");
    assert_eq!(parsed["report"]["method"], "closed_form");
    // Resolved config and its hash are embedded for reproducibility.
    assert!(parsed["meta"]["config_sha256"].as_str().unwrap().len() == 64);
    assert!(
        parsed["meta"]["config"]["drive"]["omega_l_mhz"]
            .as_f64()
            .unwrap()
            == 4.0
    );
}

#[test]
fn validate_subcommand_passes() {
    let output = binary().arg("validate").output().unwrap();
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert_eq!(output.status.code(), Some(0), "stdout: {stdout}");
    assert!(stdout.contains("PASS: rho21_probe_detuned vs steady_state"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn shipped_figure_recipes_parse_and_run() {
    let figs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../figs");
    let mut seen = 0;
    for entry in fs::read_dir(&figs).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        seen += 1;
        let mut config: RunConfig =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        // Thin the grids so the whole set stays fast; the recipes
        // themselves ship with full resolution.
        config.sweep.n = config.sweep.n.min(11);
        let result = run_sweep(&config).unwrap();
        assert_eq!(result.rows.len(), config.sweep.n, "{}", path.display());
        assert_eq!(result.meta.nan_rows, 0, "{}", path.display());
    }
    assert_eq!(seen, 6, "expected six figure recipes in {}", figs.display());
}
