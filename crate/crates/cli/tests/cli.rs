use std::path::Path;
use std::process::{Command, Output};

use kwe_cli::RunConfig;
use serde_json::Value;

fn kwe(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kwe"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn summary(out: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(out.join(format!("{command}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn spectra_at_beta_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = kwe(&["spectra", "--beta", "0"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "spectra");
    assert_eq!(s["exponents"]["nu"].as_f64(), Some(-3.0));
    let stdout: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stdout, s);
    let csv = std::fs::read_to_string(dir.path().join("spectra.csv")).unwrap();
    assert!(csv.starts_with("beta,nu,energy_spectrum_exp,inverse_flux_exp,direct_capacity,inverse_threshold_beta\n"));
}

#[test]
fn outputs_are_deterministic() {
    // Same out dir for both runs, since the config echo records it.
    let dir = tempfile::tempdir().unwrap();
    let args = ["averaging", "--battery", "quick", "--seed", "7"];
    let read = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap();
    assert!(kwe(&args, dir.path()).status.success());
    let first = [read("averaging.csv"), read("averaging.json")];
    assert!(kwe(&args, dir.path()).status.success());
    let second = [read("averaging.csv"), read("averaging.json")];
    assert!(first == second, "outputs differ between runs");
}

#[test]
fn averaging_battery_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = kwe(&["averaging", "--battery", "quick"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "averaging");
    assert!(s["max_rel_dev"].as_f64().unwrap() < 1e-9);
    assert!(s["weighted_log_slope"].as_f64().unwrap().abs() < 0.05);
}

#[test]
fn config_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let toml_path = dir.path().join("run.toml");
    std::fs::write(
        &toml_path,
        "[kernel]\nbeta = 0.5\nM = 8.0\n\n[quad]\nrel_tol = 1e-7\n\n[profile]\nkind = \"rayleigh_jeans\"\na = 1.0\nb = 2.0\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = kwe(
        &["spectra", "--config", toml_path.to_str().unwrap(), "--beta", "0.3"],
        &out,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out, "spectra");
    let echoed: RunConfig = serde_json::from_value(s["config"].clone()).unwrap();
    assert_eq!(echoed.kernel.beta, 0.3);
    assert_eq!(echoed.quad.rel_tol, 1e-7);
    assert_eq!(serde_json::to_value(&echoed).unwrap(), s["config"]);
    let as_toml = toml::to_string(&echoed).unwrap();
    assert_eq!(RunConfig::from_toml(&as_toml).unwrap(), echoed);
}

#[test]
fn invalid_kernel_reports_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = kwe(&["spectra", "--M", "4"], dir.path());
    assert!(!o.status.success());
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "invalid_kernel");
    assert!(e["error"]["message"].as_str().unwrap().contains("M must exceed 6"));
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let toml_path = dir.path().join("bad.toml");
    std::fs::write(&toml_path, "betta = 0.1\n").unwrap();
    let o = kwe(&["spectra", "--config", toml_path.to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "config");
}

#[test]
fn gain_threshold_at_m8() {
    let dir = tempfile::tempdir().unwrap();
    let o = kwe(&["thresholds", "--kind", "gain", "--M", "8"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "thresholds");
    let beta_star = s["beta_star"].as_f64().unwrap();
    assert!((beta_star - 0.25).abs() < 0.01, "beta* = {beta_star}");
    let csv = std::fs::read_to_string(dir.path().join("thresholds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 22);
}

#[test]
fn collision_rows_for_rayleigh_jeans() {
    let dir = tempfile::tempdir().unwrap();
    let toml_path = dir.path().join("rj.toml");
    std::fs::write(
        &toml_path,
        "n_samples = 8\nfit_window = [1.0, 100.0]\n[kernel]\nbeta = 0.5\nM = 8.0\n[quad]\nrel_tol = 1e-8\nomega_max = 1e4\n[profile]\nkind = \"rayleigh_jeans\"\na = 1.0\nb = 1.0\n",
    )
    .unwrap();
    let o = kwe(&["collision", "--config", toml_path.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("collision.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let full = header.iter().position(|h| *h == "full_combined").unwrap();
    let gain = header.iter().position(|h| *h == "gain").unwrap();
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 8);
    for r in rows {
        let f: f64 = r[full].parse().unwrap();
        let g: f64 = r[gain].parse().unwrap();
        assert!(f.abs() <= 1e-6 * g, "stationary spectrum gave {f} against gain {g}");
    }
}

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::from_toml(&std::fs::read_to_string(&path).unwrap()).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
