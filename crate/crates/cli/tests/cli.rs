use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_xcube");

fn xcube(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/threshold")
}

/// Planted RACAT-like ensembles: `xi/L` lines crossing at `T = 1.2` for
/// `p <= 0.074` and ordered by size (no crossing) above, so the threshold
/// lies at 0.075 with the grid step 0.002 as its uncertainty.
fn fixture_files() -> Vec<(String, String)> {
    let mut files = Vec::new();
    for p in [0.070, 0.072, 0.074, 0.076, 0.078] {
        for l in [6usize, 8, 10] {
            let mut csv = String::from("model,L,p,T,Cv,Cv_err,xi_over_L,xi_over_L_err\n");
            for i in 0..17 {
                let t = 0.8 + 0.05 * i as f64;
                let x = if p <= 0.074 {
                    0.5 - 0.04 * l as f64 * (t - 1.2)
                } else {
                    1.5 / l as f64 - 0.2 * t
                };
                let cv = 4.0 - 30.0 * (t - 1.3) * (t - 1.3);
                csv += &format!("racat,{l},{p},{t:.2},{cv:.6},0.01,{x:.6},0.001\n");
            }
            files.push((format!("racat-p{p:.3}-L{l}/averages.csv"), csv));
        }
    }
    files
}

#[test]
fn bundled_fixture_matches_its_generator() {
    let root = fixture_root();
    let regenerate = std::env::var_os("XCUBE_REGENERATE_FIXTURES").is_some();
    for (rel, content) in fixture_files() {
        let path = root.join(&rel);
        if regenerate {
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(&path, &content).unwrap();
        }
        assert_eq!(fs::read_to_string(&path).unwrap(), content, "{rel} is stale");
    }
}

#[test]
fn analyze_recovers_the_fixture_threshold() {
    let out = tempfile::tempdir().unwrap();
    let o = xcube(&[
        "analyze",
        "--input",
        fixture_root().to_str().unwrap(),
        "--output",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&o);
    let est = &report[0]["estimate"];
    assert_eq!(report[0]["model"], "racat");
    assert!((est["p_c"].as_f64().unwrap() - 0.075).abs() < 1e-12, "{report}");
    assert!((est["uncertainty"].as_f64().unwrap() - 0.002).abs() < 1e-12);
    let on_disk: serde_json::Value =
        serde_json::from_slice(&fs::read(out.path().join("threshold.json")).unwrap()).unwrap();
    assert_eq!(on_disk[0]["estimate"], *est);
    let diagram = fs::read_to_string(out.path().join("phase_diagram.csv")).unwrap();
    assert_eq!(diagram.lines().count(), 6);
}

#[test]
fn preset_run_records_overrides() {
    let out = tempfile::tempdir().unwrap();
    let dir = out.path().join("run");
    let o = xcube(&[
        "simulate",
        "--preset",
        "rpi-p0.000-L4",
        "--tau-max",
        "12",
        "--nd",
        "2",
        "--max-flagged-fraction",
        "0.5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["preset"], "rpi-p0.000-L4");
    assert_eq!(cfg["config"]["tau_max"], 12);
    assert_eq!(cfg["config"]["n_temps"], 56);
    assert_eq!(cfg["config"]["t_max"], 6.23);
    let overrides: Vec<&str> = cfg["overrides"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(overrides.contains(&"tau_max") && overrides.contains(&"nd"));
    assert!(!overrides.contains(&"n_temps"));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["point"]["temperatures"].as_array().unwrap().len(), 56);
    let averages = fs::read_to_string(dir.join("averages.csv")).unwrap();
    assert_eq!(averages.lines().count(), 57);
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("run.json");
    fs::write(&file, r#"{"model": "rpi", "L": 4, "temperature": 1.0}"#).unwrap();
    let o = xcube(&["simulate", "--config", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("temperature"));

    let o = xcube(&["simulate", "--preset", "racat-p0.075-L12", "--t-min", "3.0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`t_min`"), "{}", stderr(&o));

    let o = xcube(&["simulate", "--preset", "rpi-p0.999-L4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`preset`"));
}

fn small_run(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "simulate", "--model", "racat", "--L", "2", "--p", "0.1", "--n-temps", "5", "--t-min", "0.6", "--t-max",
        "2.0", "--tau-max", "10", "--nd", "3", "--seed", "17", "--workers", "2", "--out",
    ];
    args.push(dir.to_str().unwrap());
    args.extend_from_slice(extra);
    xcube(&args)
}

#[test]
fn budget_stop_and_resume_is_bit_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let whole = tmp.path().join("whole");
    let o = small_run(&whole, &[]);
    assert!(o.status.success(), "{}", stderr(&o));

    let pieces = tmp.path().join("pieces");
    let o = small_run(&pieces, &["--budget", "300", "--checkpoint-interval", "64"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(!pieces.join("averages.csv").exists());
    let o = small_run(&pieces, &["--checkpoint-interval", "64"]);
    assert!(o.status.success(), "{}", stderr(&o));

    assert_eq!(
        fs::read(whole.join("averages.csv")).unwrap(),
        fs::read(pieces.join("averages.csv")).unwrap()
    );
}

#[test]
fn reusing_a_directory_for_other_parameters_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    assert!(small_run(&dir, &[]).status.success());
    let o = xcube(&[
        "simulate", "--model", "racat", "--L", "2", "--p", "0.2", "--n-temps", "5", "--t-min", "0.6", "--t-max", "2.0",
        "--tau-max", "10", "--nd", "3", "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let cfg: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["config"]["p"], 0.1);
}

#[test]
fn nishimori_oracle_passes_on_the_line_and_fails_off_it() {
    let o = xcube(&["oracle", "nishimori", "--p", "0.1", "--samples", "1000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&o);
    assert_eq!(report["pass"], true);
    assert_eq!(report["reports"].as_array().unwrap().len(), 2);

    let o = xcube(&["oracle", "nishimori", "--model", "racat", "--p", "0.1", "--samples", "1000", "--beta-factor", "2"]);
    assert_eq!(o.status.code(), Some(5));
    assert_eq!(json(&o)["pass"], false);
}

#[test]
fn code_info_reports_six_l_minus_three() {
    let o = xcube(&["code-info", "--L", "2", "3", "4"]);
    assert!(o.status.success());
    let infos = json(&o);
    for (i, l) in [2u64, 3, 4].into_iter().enumerate() {
        assert_eq!(infos[i]["logical_qubits"], 6 * l - 3);
    }
}

#[test]
fn exact_and_duality_oracles_print_reports() {
    let o = xcube(&["oracle", "exact", "--model", "rpi", "--p", "0.1", "--temps", "1.0", "2.0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json(&o).as_array().unwrap().len(), 2);

    let o = xcube(&["oracle", "duality"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&o);
    assert_eq!(r["pass"], true);
    assert_eq!(r["entropy"]["near_saturation"], true);
}
