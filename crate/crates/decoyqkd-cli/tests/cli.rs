//! End-to-end tests of the `decoyqkd` binary: exit codes, JSON and CSV
//! shapes, golden values on the bundled fixtures, and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_decoyqkd"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output {
        status,
        stdout,
        stderr,
    } = cmd.output().expect("binary runs");
    (
        status.code().expect("exit code"),
        String::from_utf8(stdout).expect("stdout is UTF-8"),
        String::from_utf8(stderr).expect("stderr is UTF-8"),
    )
}

fn parse_json(stdout: &str) -> serde_json::Value {
    serde_json::from_str(stdout).expect("stdout is valid JSON")
}

fn assert_rel(value: f64, expected: f64, tol: f64) {
    let scale = expected.abs().max(1e-300);
    assert!(
        (value - expected).abs() <= tol * scale,
        "value {value:e} differs from {expected:e} beyond rel {tol:e}"
    );
}

#[test]
fn analyze_demo_fixture_matches_goldens() {
    let (code, out, _) = run(bin()
        .arg("analyze")
        .arg(fixture("demo_15km.csv"))
        .args(["--session-seconds", "228"]));
    assert_eq!(code, 0);
    let v = parse_json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["bounds"]["secure"], true);
    assert_rel(
        v["bounds"]["q_nu_lower"].as_f64().unwrap(),
        1.2461914724e-3,
        1e-9,
    );
    assert_rel(
        v["bounds"]["q1_lower"].as_f64().unwrap(),
        2.1259724287e-3,
        1e-9,
    );
    assert_rel(
        v["bounds"]["e1_upper"].as_f64().unwrap(),
        3.9277388726e-2,
        1e-9,
    );
    assert_rel(
        v["bounds"]["rate_lower"].as_f64().unwrap(),
        3.5279490331e-4,
        1e-9,
    );
    assert_rel(
        v["yield"]["key_length_bits"].as_f64().unwrap(),
        3.7043464847e4,
        1e-9,
    );
    assert_rel(
        v["yield"]["rate_per_second"].as_f64().unwrap(),
        1.6247133705e2,
        1e-9,
    );
    assert_rel(
        v["confidence_complement"].as_f64().unwrap(),
        1.5239706048e-23,
        1e-8,
    );
}

#[test]
fn analyze_output_is_byte_identical_across_runs() {
    let mut outs = (0..2).map(|_| {
        let (code, out, _) = run(bin().arg("analyze").arg(fixture("demo_15km.csv")));
        assert_eq!(code, 0);
        out
    });
    let first = outs.next().unwrap();
    assert_eq!(first, outs.next().unwrap());
}

#[test]
fn json_floats_carry_full_precision() {
    let (_, out, _) = run(bin().arg("analyze").arg(fixture("demo_15km.csv")));
    // 17 significant digits per float, so parse -> print round-trips.
    assert!(out.contains("\"q1_lower\": 2.1259724286926637e-3"), "{out}");
}

#[test]
fn analyze_high_error_data_is_insecure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("high_error.csv");
    std::fs::write(
        &path,
        "label,mean_photons,n_sent,n_detected,n_error\n\
         signal,0.80,94500000,827537,165507\n\
         decoy,0.12,10500000,14280,384\n",
    )
    .unwrap();
    let (code, out, _) = run(bin().arg("analyze").arg(&path));
    assert_eq!(code, 2);
    let v = parse_json(&out);
    assert_eq!(v["bounds"]["secure"], false);
    assert_eq!(v["bounds"]["rate_lower"].as_f64().unwrap(), 0.0);
    assert!(!v["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn analyze_reports_line_numbers_for_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(
        &path,
        "label,mean_photons,n_sent,n_detected,n_error\n\
         signal,0.80,1000,banana,3\n",
    )
    .unwrap();
    let (code, _, err) = run(bin().arg("analyze").arg(&path));
    assert_eq!(code, 1);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn analyze_rejects_wrong_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad_header.csv");
    std::fs::write(
        &path,
        "label,mu,n_sent,n_detected,n_error\nsignal,0.8,10,1,0\n",
    )
    .unwrap();
    let (code, _, err) = run(bin().arg("analyze").arg(&path));
    assert_eq!(code, 1);
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn simulate_honest_config_is_clean_and_secure() {
    let (code, out, _) = run(bin()
        .arg("simulate")
        .arg("--config")
        .arg(fixture("sim_honest_short.json")));
    assert_eq!(code, 0);
    let v = parse_json(&out);
    assert_eq!(v["verdict"]["status"], "clean");
    assert_eq!(v["analysis"]["bounds"]["secure"], true);
    assert_eq!(v["seed"], 7);
}

#[test]
fn simulate_stealth_attack_exits_three() {
    let (code, out, _) = run(bin()
        .arg("simulate")
        .arg("--config")
        .arg(fixture("sim_stealth_attack.json")));
    assert_eq!(code, 3);
    let v = parse_json(&out);
    assert_eq!(v["verdict"]["status"], "anomalous");
    let scores = v["verdict"]["z_scores"].as_array().unwrap();
    let z = |label: &str| {
        scores.iter().find(|s| s["label"] == label).unwrap()["gain_z"]
            .as_f64()
            .unwrap()
    };
    // Attack calibrated to preserve the signal gain; decoy gain collapses.
    assert!(z("signal").abs() < 5.0);
    assert!(z("decoy") < -10.0);
}

#[test]
fn simulate_falls_back_to_env_config() {
    let (code, _, _) = run(bin()
        .arg("simulate")
        .env("DECOYQKD_CONFIG", fixture("sim_honest_short.json")));
    assert_eq!(code, 0);
    let (code, _, err) = run(bin().arg("simulate").env_remove("DECOYQKD_CONFIG"));
    assert_eq!(code, 1);
    assert!(err.contains("DECOYQKD_CONFIG"), "{err}");
}

#[test]
fn simulate_rejects_zero_pulse_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero.json");
    let config = std::fs::read_to_string(fixture("sim_honest_short.json"))
        .unwrap()
        .replace("\"n_pulses\": 200000", "\"n_pulses\": 0");
    std::fs::write(&path, config).unwrap();
    let (code, _, err) = run(bin().arg("simulate").arg("--config").arg(&path));
    assert_eq!(code, 1);
    assert!(err.contains("n_pulses"), "{err}");
}

#[test]
fn simulate_seed_override_changes_the_draw() {
    let base = |seed: &str| {
        let (code, out, _) = run(bin()
            .arg("simulate")
            .arg("--config")
            .arg(fixture("sim_honest_short.json"))
            .args(["--seed", seed]));
        assert_eq!(code, 0);
        out
    };
    let a = base("123");
    let b = base("123");
    let c = base("124");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(parse_json(&a)["seed"], 123);
}

#[test]
fn simulate_writes_tally_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tally.csv");
    let (code, _, _) = run(bin()
        .arg("simulate")
        .arg("--config")
        .arg(fixture("sim_honest_short.json"))
        .arg("--out")
        .arg(&path));
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "label,mean_photons,send_fraction,n_sent,n_detected,n_error,gain,qber,n_sifted"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn optimize_single_point_grid_is_direct_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("optimum.csv");
    let (code, out, _) = run(bin()
        .arg("optimize")
        .arg("--channel")
        .arg(fixture("fitted_channel_15km.json"))
        .args(["--grid", "1x1x1"])
        .args(["--mu-range", "0.8:0.8"])
        .args(["--nu-range", "0.12:0.12"])
        .args(["--fraction-range", "0.10:0.10"])
        .arg("--out")
        .arg(&csv_path));
    assert_eq!(code, 0);
    let v = parse_json(&out);
    assert_eq!(v["secure"], true);
    assert_eq!(v["optimum"]["mu"].as_f64().unwrap(), 0.8);
    assert_eq!(v["optimum"]["nu"].as_f64().unwrap(), 0.12);
    assert_rel(
        v["optimum"]["rate"].as_f64().unwrap(),
        3.527949033053038e-4,
        1e-9,
    );
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "mu,nu,fraction,rate");
    assert_eq!(lines.count(), 1);
}

#[test]
fn sweep_fixed_asymptotic_rows_match_goldens() {
    let (code, out, _) = run(bin()
        .arg("sweep")
        .arg("--channel")
        .arg(fixture("fitted_channel_15km.json"))
        .args(["--u-alpha", "0"])
        .args(["--d-min", "0", "--d-max", "40", "--step", "10"]));
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "distance_km,rate_per_pulse");
    let expected = [
        (0.0, 1.3785618558441227e-3),
        (10.0, 7.571334774924604e-4),
        (20.0, 3.790924567496415e-4),
        (30.0, 1.5015476069819747e-4),
        (40.0, 1.3752294650178625e-5),
    ];
    for (line, (d, r)) in lines.zip(expected) {
        let (ds, rs) = line.split_once(',').unwrap();
        assert_eq!(ds.parse::<f64>().unwrap(), d);
        assert_rel(rs.parse::<f64>().unwrap(), r, 1e-9);
    }
}

#[test]
fn sweep_nondecoy_reoptimized_finds_nothing_on_fitted_channel() {
    let (code, out, _) = run(bin()
        .arg("sweep")
        .arg("--channel")
        .arg(fixture("fitted_channel_15km.json"))
        .args(["--protocol", "non-decoy", "--mode", "reoptimized"])
        .args(["--d-min", "0", "--d-max", "20", "--step", "5"]));
    assert_eq!(code, 0);
    for line in out.lines().skip(1) {
        let (_, rate) = line.split_once(',').unwrap();
        assert_eq!(rate.parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn fit_recovers_channel_from_demo_fixture() {
    let (code, out, _) = run(bin()
        .arg("fit")
        .arg(fixture("demo_15km.csv"))
        .args(["--distance-km", "15"]));
    assert_eq!(code, 0);
    let v = parse_json(&out);
    let ch = &v["channel"];
    assert_rel(
        ch["eta_receiver"].as_f64().unwrap(),
        2.258143163117986e-2,
        1e-12,
    );
    assert_rel(ch["y0"].as_f64().unwrap(), 4.892781638010657e-5, 1e-12);
    assert_rel(ch["e_det"].as_f64().unwrap(), 6.779767116751929e-3, 1e-12);
    assert_rel(
        v["fit_residual_decoy_qber"].as_f64().unwrap(),
        2.36673257586913e-3,
        1e-12,
    );
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let (code, _, _) = run(bin().arg("--badflag"));
    assert_eq!(code, 1);
    let (code, _, _) = run(bin().arg("--help"));
    assert_eq!(code, 0);
    let (code, _, _) = run(bin().args(["analyze", "--help"]));
    assert_eq!(code, 0);
    let (code, _, _) = run(&mut bin());
    assert_eq!(code, 1);
}
