use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qclone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qclone"))
        .args(args)
        .env_remove("QCLONE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Runs with `--json`, checks exit 0 and validates against the schema.
fn json(args: &[&str], schema_name: &str) -> Value {
    let mut full = args.to_vec();
    full.push("--json");
    let o = qclone(&full);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let validator = jsonschema::validator_for(&schema(schema_name)).unwrap();
    let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_name}: {errors:?}");
    v
}

fn num(v: &Value, key: &str) -> f64 {
    v[key]
        .as_f64()
        .unwrap_or_else(|| panic!("{key} missing in {v}"))
}

fn assert_usage_error(o: &Output) {
    assert_eq!(o.status.code(), Some(1), "{}", stderr(o));
    assert!(stderr(o).starts_with("error[usage]: "), "{}", stderr(o));
    assert!(o.stdout.is_empty());
}

#[test]
fn formulas_text_and_json() {
    let o = qclone(&["formulas", "--n", "1", "--m", "2", "--d", "4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("f_est(N=1, d=4) = 0.4\n"), "{text}");
    assert!(text.contains("f_clon(N=1, M=2, d=4) = 0.7\n"), "{text}");
    assert!(text.contains("gap = 0.3\n"), "{text}");

    let v = json(
        &["formulas", "--n", "1", "--m", "2", "--d", "4"],
        "formulas.schema.json",
    );
    assert_eq!(num(&v, "fClon"), 0.7);
    assert_eq!(num(&v, "fEst"), 0.4);

    let v = json(
        &["formulas", "--n", "1", "--m", "2", "--d", "2"],
        "formulas.schema.json",
    );
    assert!((num(&v, "fClon") - 5.0 / 6.0).abs() < 1e-15);
    let text = stdout(&qclone(&["formulas", "--n", "1", "--m", "2", "--d", "2"]));
    assert!(text.contains("= 0.833333\n"), "{text}");
}

#[test]
fn formulas_reject_invalid_orders() {
    assert_usage_error(&qclone(&["formulas", "--n", "2", "--m", "1", "--d", "4"]));
    assert_usage_error(&qclone(&["formulas", "--n", "1", "--m", "2", "--d", "1"]));
    assert_usage_error(&qclone(&["formulas", "--n", "1"]));
}

#[test]
fn clone_named_and_raw_inputs() {
    let v = json(
        &["clone", "--input", "I:1", "--d", "4", "--mode", "oracle"],
        "clone.schema.json",
    );
    assert!((num(&v, "fidelity") - 0.7).abs() < 1e-12);
    assert_eq!(v["mode"], "oracle");

    let v = json(
        &["clone", "--input", "IV:1", "--d", "4"],
        "clone.schema.json",
    );
    assert!((num(&v, "fidelity") - 0.7).abs() < 1e-12);

    let v = json(
        &["clone", "--input", "1,0", "--d", "2"],
        "clone.schema.json",
    );
    assert!((num(&v, "fidelity") - 5.0 / 6.0).abs() < 1e-12);

    let v = json(
        &[
            "clone",
            "--input",
            "0.5,0.5j,-0.5,0.5",
            "--mode",
            "analytic",
        ],
        "clone.schema.json",
    );
    assert!((num(&v, "fidelity") - 0.7).abs() < 1e-12);
    assert!((num(&v, "successProb") - 0.625).abs() < 1e-12);
}

#[test]
fn clone_text_output() {
    let o = qclone(&["clone", "--input", "I:1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("fidelity = 0.7\n"), "{text}");
    assert!(text.contains("success probability = 0.625\n"), "{text}");
    assert!(text.contains("eigenvalues: 0.7, 0.1, 0.1, 0.1\n"), "{text}");
}

#[test]
fn clone_warns_when_normalizing() {
    let o = qclone(&["clone", "--input", "1,1"]);
    assert!(o.status.success());
    assert!(stderr(&o).starts_with("warning: "), "{}", stderr(&o));
    assert!(stdout(&o).contains("fidelity = 0.833333"));
    // within the tolerance: silent
    let o = qclone(&["clone", "--input", "1.0000000001,0"]);
    assert!(stderr(&o).is_empty());
}

#[test]
fn clone_rejects_bad_inputs() {
    for input in ["abc", "IV:9", "V:1", "0,0", "1,,0"] {
        assert_usage_error(&qclone(&["clone", "--input", input]));
    }
    assert_usage_error(&qclone(&["clone", "--input", "1,0", "--d", "3"]));
    assert_usage_error(&qclone(&["clone", "--mode", "guess"]));
}

fn hom_at(input: &str, tau: &str) -> f64 {
    let v = json(
        &[
            "hom",
            "--input",
            input,
            "--tau-min",
            tau,
            "--tau-max",
            tau,
            "--tau-step",
            "1",
        ],
        "hom.schema.json",
    );
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 1);
    points[0]["R"].as_f64().unwrap()
}

#[test]
fn hom_peak_and_wings() {
    assert!((hom_at("I:4", "0") - 2.0).abs() < 1e-12);
    assert!((hom_at("IV:1", "0") - 2.0).abs() < 1e-12);
    assert!((hom_at("I:4", "5000") - 1.0).abs() < 1e-12);
    assert!((hom_at("I:4", "-5000") - 1.0).abs() < 1e-12);
}

#[test]
fn hom_csv_layout() {
    let o = qclone(&[
        "hom",
        "--tau-min",
        "-100",
        "--tau-max",
        "100",
        "--tau-step",
        "50",
        "--v",
        "0.9165",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "tau_fs,R");
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[3], "0,1.83997");
    // symmetric in the delay
    assert_eq!(lines[1].split(',').nth(1), lines[5].split(',').nth(1));

    let o = qclone(&[
        "hom",
        "--input",
        "I:1",
        "--ancilla",
        "I:2",
        "--tau-min",
        "0",
        "--tau-max",
        "0",
    ]);
    assert_eq!(stdout(&o), "tau_fs,R\n0,1\n");
}

#[test]
fn hom_rejects_bad_ranges() {
    assert_usage_error(&qclone(&["hom", "--tau-min", "10", "--tau-max", "-10"]));
    assert_usage_error(&qclone(&["hom", "--tau-step", "0"]));
    assert_usage_error(&qclone(&["hom", "--v", "1.5"]));
    assert_usage_error(&qclone(&["hom", "--bandwidth-nm", "-1"]));
}

#[test]
fn experiment_ideal_basis_one() {
    let v = json(
        &[
            "experiment",
            "--basis",
            "I",
            "--shots",
            "100000",
            "--seed",
            "7",
        ],
        "experiment.schema.json",
    );
    for row in v["rows"].as_array().unwrap() {
        let (f, s) = (num(row, "fidelity"), num(row, "stderr"));
        assert!((f - 0.7).abs() < 3.0 * s, "{row}");
        let total: u64 = row["counts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c.as_u64().unwrap())
            .sum();
        assert_eq!(total, 100_000);
    }
    assert_eq!(v["probabilities"].as_array().unwrap().len(), 4);
}

#[test]
fn experiment_degraded_basis_four() {
    let v = json(
        &[
            "experiment",
            "--basis",
            "IV",
            "--v",
            "0.9165",
            "--prep-fid",
            "0.9",
            "--analysis-fid",
            "0.9",
            "--ancilla-weights",
            "0.3,0.3,0.2,0.2",
            "--shots",
            "50000",
        ],
        "experiment.schema.json",
    );
    let avg = num(&v, "averageFidelity");
    assert!(avg < 0.7 && avg > 0.4, "{avg}");
    assert_eq!(
        v["config"]["ancillaWeights"],
        serde_json::json!([0.3, 0.3, 0.2, 0.2])
    );
}

#[test]
fn experiment_text_output() {
    let o = qclone(&["experiment", "--shots", "2000", "--seed", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(
        text.starts_with("basis I: 2000 coincidences per input, seed 1"),
        "{text}"
    );
    assert!(text.contains("p(i|phi)"));
    assert!(text.contains("average: "));
}

#[test]
fn experiment_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = |out: &Path| {
        vec![
            "experiment".to_string(),
            "--basis".into(),
            "IV".into(),
            "--shots".into(),
            "5000".into(),
            "--seed".into(),
            "3".into(),
            "--prep-fid".into(),
            "0.8".into(),
            "--out-dir".into(),
            out.display().to_string(),
        ]
    };
    for out in [&a, &b] {
        let args = args(out);
        let o = qclone(&args.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let csv_a = std::fs::read(a.join("counts.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("counts.csv")).unwrap());
    assert_eq!(
        std::fs::read(a.join("summary.json")).unwrap(),
        std::fs::read(b.join("summary.json")).unwrap()
    );

    let text = String::from_utf8(csv_a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "input,outcome,count");
    assert_eq!(lines.len(), 17);
    // labels with commas are quoted
    assert!(
        lines[1].starts_with("\"(R,+2 + L,-2)/√2\",\"(R,+2 + L,-2)/√2\","),
        "{}",
        lines[1]
    );

    let summary: Value =
        serde_json::from_slice(&std::fs::read(a.join("summary.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema("experiment.schema.json")).unwrap();
    assert!(validator.is_valid(&summary));
}

#[test]
fn experiment_out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qclone"))
        .args(["experiment", "--shots", "1000"])
        .env("QCLONE_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("counts.csv").exists());
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn experiment_config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(
        &path,
        r#"{"shots": 3000, "v": 0.5, "seed": 9, "prepFidelity": 0.95}"#,
    )
    .unwrap();
    let p = path.display().to_string();
    let v = json(
        &["experiment", "--config", &p, "--seed", "10"],
        "experiment.schema.json",
    );
    assert_eq!(v["config"]["shots"], 3000);
    assert_eq!(v["config"]["seed"], 10);
    assert_eq!(v["config"]["v"], 0.5);
    assert_eq!(v["config"]["prepFidelity"], 0.95);

    std::fs::write(&path, r#"{"shots": 3000, "speed": 1}"#).unwrap();
    assert_usage_error(&qclone(&["experiment", "--config", &p]));
    assert_usage_error(&qclone(&[
        "experiment",
        "--config",
        "/nonexistent/cfg.json",
    ]));
}

#[test]
fn experiment_rejects_invalid_configs() {
    assert_usage_error(&qclone(&["experiment", "--basis", "II"]));
    assert_usage_error(&qclone(&["experiment", "--ancilla-weights", "0.5,0.5"]));
    assert_usage_error(&qclone(&[
        "experiment",
        "--ancilla-weights",
        "0.5,0.5,0.5,0.5",
    ]));
    assert_usage_error(&qclone(&["experiment", "--ancilla-weights", "a,b,c,d"]));
    assert_usage_error(&qclone(&["experiment", "--v", "-0.1"]));
    assert_usage_error(&qclone(&["experiment", "--shots", "0"]));
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub").display().to_string();
    let o = qclone(&["experiment", "--shots", "100", "--out-dir", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o)
            .lines()
            .any(|l| l.starts_with("error[runtime]: ")),
        "{}",
        stderr(&o)
    );
}

#[test]
fn cascade_examples() {
    let v = json(
        &[
            "cascade", "--n", "1", "--m", "3", "--d", "4", "--input", "I:1",
        ],
        "cascade.schema.json",
    );
    assert!((num(&v, "fidelity") - 0.6).abs() < 1e-9);
    assert!((num(&v, "formulaFidelity") - 0.6).abs() < 1e-15);
    assert!(num(&v, "difference").abs() < 1e-9);

    let v = json(
        &["cascade", "--n", "1", "--m", "2", "--d", "4"],
        "cascade.schema.json",
    );
    assert!((num(&v, "fidelity") - 0.7).abs() < 1e-9);

    let v = json(
        &["cascade", "--n", "2", "--m", "3", "--d", "2"],
        "cascade.schema.json",
    );
    assert!((num(&v, "fidelity") - 11.0 / 12.0).abs() < 1e-9);

    let text = stdout(&qclone(&["cascade", "--m", "3", "--d", "2"]));
    assert!(text.contains("cascade fidelity = 0.777778\n"), "{text}");
    assert!(text.contains("formula fidelity = 0.777778\n"), "{text}");
}

#[test]
fn cascade_cap_is_enforced() {
    let o = qclone(&["cascade", "--n", "1", "--m", "7", "--d", "2"]);
    assert_usage_error(&o);
    assert!(stderr(&o).contains("--cap 7"), "{}", stderr(&o));
    let v = json(
        &["cascade", "--n", "1", "--m", "7", "--d", "2", "--cap", "7"],
        "cascade.schema.json",
    );
    assert!(num(&v, "difference").abs() < 1e-9);
}

#[test]
fn help_version_and_unknown_flags() {
    let o = qclone(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("experiment"));
    assert_eq!(qclone(&["--version"]).status.code(), Some(0));
    assert_eq!(qclone(&["hom", "--help"]).status.code(), Some(0));
    assert_usage_error(&qclone(&["formulas", "--n", "1", "--m", "2", "--bogus"]));
    assert_usage_error(&qclone(&["teleport"]));
    assert_usage_error(&qclone(&[]));
}

#[test]
fn commands_are_deterministic() {
    for args in [
        vec!["formulas", "--n", "3", "--m", "5", "--d", "3", "--json"],
        vec!["clone", "--input", "IV:2", "--json"],
        vec!["hom", "--input", "IV:3", "--json"],
        vec!["experiment", "--shots", "3000", "--seed", "5", "--json"],
        vec![
            "cascade",
            "--m",
            "3",
            "--d",
            "3",
            "--input",
            "0.6,0.8j,0",
            "--json",
        ],
    ] {
        assert_eq!(qclone(&args).stdout, qclone(&args).stdout, "{args:?}");
    }
}
