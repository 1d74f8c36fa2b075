use std::path::PathBuf;
use std::process::{Command, Output};

fn dilation(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dilation"))
        .args(args)
        .env_remove("DILATION_QUAD_TOL")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dilation-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn gain_sweep_reaches_a_microsecond_at_200_db() {
    let out = dilation(&["interferometer", "--sweep", "gain_db", "0..220", "steps", "23"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "gain_dB,visibility,tau_s");
    assert_eq!(lines.len(), 24);
    let row: Vec<f64> = lines[21].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], 200.0);
    assert!(row[2] > 1e-6 && row[2] < 3e-6, "tau at 200 dB = {}", row[2]);
    let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[1], 1.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    for args in [
        &["interferometer", "--sweep", "gain_db", "0..220", "steps", "23"][..],
        &["instability", "--sweep", "probe_x", "2e-6..1e-4", "steps", "9"][..],
        &["lightclock"][..],
        &["catalog", "--output", "csv"][..],
    ] {
        let a = dilation(args);
        let b = dilation(args);
        assert!(a.status.success(), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn monte_carlo_output_depends_only_on_the_seed() {
    let config = scratch("mc.toml", "gain_db = 20\nmonte_carlo_samples = 200000\n");
    let config = config.to_str().unwrap();
    let run = |seed: &str| stdout(&dilation(&["interferometer", "--config", config, "--seed", seed, "--output", "json"]));
    assert_eq!(run("7"), run("7"));
    assert_ne!(run("7"), run("8"));
}

#[test]
fn empty_range_is_a_usage_error() {
    let out = dilation(&["interferometer", "--sweep", "gain_db", "10..10", "steps", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
}

#[test]
fn unknown_sweep_parameter_is_a_usage_error() {
    let out = dilation(&["instability", "--sweep", "wavelength", "0..1", "steps", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("probe_mass"));
    let out = dilation(&["catalog", "--sweep", "gain_db", "0..1", "steps", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_outputs_carry_unit_headers() {
    let cases: [(&[&str], &str); 5] = [
        (&["constants", "--output", "csv"], "name,value,unit"),
        (&["lightclock"], "time_s,re,im,modulus"),
        (
            &["lightclock", "--sweep", "mass", "1e-12..1e-10", "steps", "3"],
            "mass_kg,dtbar_s,traversal_excess_s,superposition_delay_s,horizon_s",
        ),
        (
            &["instability", "--output", "csv"],
            "formula,tau_s,denominator_J,quadrature_error,inputs_digest",
        ),
        (
            &["catalog", "--output", "csv"],
            "rank,name,tau_s,table_tau_s,ratio,flight_time_s,verdict,quadrature_error",
        ),
    ];
    for (args, header) in cases {
        let out = dilation(args);
        assert!(out.status.success(), "{args:?}");
        assert_eq!(stdout(&out).lines().next(), Some(header), "{args:?}");
    }
}

#[test]
fn worked_probe_example() {
    let out = dilation(&["instability", "--output", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let tau = v[0]["tau_s"].as_f64().unwrap();
    assert!(tau > 1e3 && tau < 1e4, "tau = {tau}");
    assert_eq!(v[0]["formula"], "two_branch");
}

#[test]
fn malformed_config_names_the_line() {
    let bad = scratch("bad.toml", "gain_db = 20\nphoton_bandwith = 1.0\n");
    let out = dilation(&["interferometer", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains("photon_bandwith"), "{err}");
}

#[test]
fn instability_config_from_file() {
    let config = scratch(
        "ball.toml",
        r#"
[probe]
shape = "ball"
density = 1000.0
radius = 1e-6
center = [1e-5, 0.0, 0.0]

[[superposition.branches]]
weight = 0.5
bodies = [{ shape = "point", mass = 1e-15, center = [0.0, 0.0, 0.0] }]

[[superposition.branches]]
weight = 0.5
bodies = [{ shape = "point", mass = 1e-15, center = [-1e-6, 0.0, 0.0] }]
"#,
    );
    let out = dilation(&["instability", "--config", config.to_str().unwrap(), "--output", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["formula"], "density");
}

#[test]
fn catalog_reports_ordering() {
    let out = dilation(&["catalog"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("ordering of entries within a factor 10 of their reference: matches"));
}

#[test]
fn bad_tolerance_variable_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_dilation"))
        .args(["catalog"])
        .env("DILATION_QUAD_TOL", "-1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes_with_a_small_budget() {
    let config = scratch("verify.toml", "mc_samples = 200000\n");
    let out = dilation(&["verify", "--config", config.to_str().unwrap(), "--output", "csv"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.starts_with("check,status,metric,measured,reference,discrepancy,tolerance,note"));
    assert!(!text.contains(",FAIL,"));
}
