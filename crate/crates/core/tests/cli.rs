use std::path::Path;
use std::process::{Command, Output};

use dyadic_hardy::grid::GridFunction;
use dyadic_hardy::io::function_from_csv;
use dyadic_hardy::verify::{lemma_b_fixture, LemmaBFixture};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dyadic-hardy"));
    c.current_dir(env!("CARGO_MANIFEST_DIR"));
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

const GRID_4X4: &str = r#"{"factor_dims":[1,1],"depths":[2,2]}"#;

#[test]
fn lemma_b_fixture_passes() {
    let o = run(&["verify", "lemma-b", "--fixture", "fixtures/lemma_b_d2.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(v["lhs"].as_f64().unwrap() < v["rhs"].as_f64().unwrap());
}

#[test]
fn shipped_fixture_matches_builder() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/lemma_b_d2.json");
    let stored: LemmaBFixture = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(stored, lemma_b_fixture().unwrap());
}

#[test]
fn malformed_grid_is_a_usage_error() {
    let o = run(&["decompose", "--grid", r#"{"factor_dims":[1],"depths":[]}"#, "--input", r#"{"kind":"full"}"#]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("grid schema"), "{err}");
    let o = run(&["decompose", "--grid", r#"{"factor_dims":[1],"depths":[2],"extra":1}"#, "--input", r#"{"kind":"full"}"#]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exact_bmo_above_cap_is_a_resource_error() {
    let o = run(&[
        "norms",
        "bmo-dyadic",
        "--exact",
        "--grid",
        r#"{"factor_dims":[1,1],"depths":[3,2]}"#,
        "--input",
        r#"{"kind":"random-uniform"}"#,
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cap of 22"));
}

#[test]
fn cap_cells_flag_and_env_override() {
    let args = [
        "norms",
        "bmo-dyadic",
        "--exact",
        "--grid",
        r#"{"factor_dims":[1,1],"depths":[2,2]}"#,
        "--input",
        r#"{"kind":"random-uniform"}"#,
    ];
    let o = bin().args(args).env("DH_CAP_CELLS", "8").output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let mut with_flag: Vec<&str> = args.to_vec();
    with_flag.extend(["--cap-cells", "16"]);
    let o = bin().args(&with_flag).env("DH_CAP_CELLS", "8").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn exact_and_search_agree_from_the_command_line() {
    let common = ["norms", "bmo-dyadic", "--grid", GRID_4X4, "--input", r#"{"kind":"random-uniform"}"#, "--seed", "9"];
    let e = stdout_json(&run(&[&common[..], &["--exact"]].concat()));
    let s = stdout_json(&run(&[&common[..], &["--search", "--restarts", "4"]].concat()));
    assert_eq!(e["mode"], "exact");
    assert_eq!(s["mode"], "heuristic");
    let (a, b) = (e["value"].as_f64().unwrap(), s["value"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-10 * a);
}

#[test]
fn norms_subcommands_run() {
    for extra in [
        vec!["sf"],
        vec!["h1"],
        vec!["h1", "--grand-average"],
        vec!["bmo-little", "--p", "1", "--class", "dyadic"],
        vec!["bmo-dyadic", "--search", "--shift", "1,-2"],
        vec!["bmo-dyadic", "--search", "--cap", "0.25"],
    ] {
        let mut args = vec!["norms"];
        args.extend(extra.iter().copied());
        args.extend(["--grid", GRID_4X4, "--input", r#"{"kind":"random-uniform"}"#]);
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{extra:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn reports_are_deterministic() {
    let args = ["verify", "lemma-a", "--trials", "5", "--seed", "3"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let lines: Vec<&str> = std::str::from_utf8(&a.stdout).unwrap().lines().collect();
    assert_eq!(lines.len(), 6);
    let summary: Value = serde_json::from_str(lines[5]).unwrap();
    assert_eq!(summary["failed"], 0);
}

#[test]
fn verify_trials_for_each_check() {
    for check in ["split", "lemma-b", "abs-bmo"] {
        let o = run(&["verify", check, "--trials", "4"]);
        assert_eq!(o.status.code(), Some(0), "{check}");
    }
}

#[test]
fn generated_functions_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for (fmt, name) in [("json", "f.json"), ("csv", "f.csv")] {
        let path = dir.path().join(name);
        let o = run(&[
            "generate",
            "--spec",
            r#"{"kind":"random-uniform","lo":-3,"hi":7}"#,
            "--grid",
            GRID_4X4,
            "--seed",
            "5",
            "--format",
            fmt,
            "--output",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        let text = std::fs::read_to_string(&path).unwrap();
        let f: GridFunction = if fmt == "csv" { function_from_csv(&text).unwrap() } else { serde_json::from_str(&text).unwrap() };
        let again = dir.path().join(format!("again.{fmt}"));
        let o = run(&[
            "maximal",
            "--iter",
            "0",
            "--input",
            path.to_str().unwrap(),
            "--format",
            fmt,
            "--output",
            again.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        let back = std::fs::read_to_string(&again).unwrap();
        let g: GridFunction = if fmt == "csv" { function_from_csv(&back).unwrap() } else { serde_json::from_str(&back).unwrap() };
        // M⁰ f = |f|
        assert_eq!(g, f.abs());
    }
}

#[test]
fn spike_generator_has_unit_mass() {
    let o = run(&["generate", "--spec", r#"{"kind":"spike-sequence","member":3}"#, "--grid", GRID_4X4]);
    let f: GridFunction = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(f.integral(), 1.0);
    assert_eq!(f.support().measure(), 0.125);
}

#[test]
fn unknown_generator_is_rejected() {
    let o = run(&["generate", "--spec", r#"{"kind":"wavelet"}"#, "--grid", GRID_4X4]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tau_command_reports_cutoff() {
    let o = run(&[
        "tau",
        "--set",
        r#"{"kind":"cell-mask","cells":[5,6,9,10]}"#,
        "--grid",
        GRID_4X4,
        "--delta",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    for c in [5, 6, 9, 10] {
        assert_eq!(v["tau"]["values"][c], 1.0);
    }
}

#[test]
fn experiment_specs_run() {
    for spec in ["specs/decompose.json", "specs/bmo-exact.json", "specs/tau.json", "specs/lemma-b-fixture.json"] {
        let o = run(&["run", "--spec", spec]);
        assert_eq!(o.status.code(), Some(0), "{spec}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn experiment_spec_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"version":1,"task":{"command":"decompose","input":"x.json","typo":1}}"#).unwrap();
    let o = run(&["run", "--spec", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::write(&path, r#"{"version":2,"task":{"command":"demo"}}"#).unwrap();
    let o = run(&["run", "--spec", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn demo_writes_tidy_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("plot.csv");
    let o = run(&["demo", "--no-packing", "--plot", plot.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&plot).unwrap();
    assert!(text.starts_with("n,quantity,value\n"));
    assert!(text.lines().any(|l| l.starts_with("8,gap,")));
    let spike = run(&["verify", "theorem", "--config", "specs/theorem-spike.json"]);
    assert_eq!(spike.status.code(), Some(0), "{}", String::from_utf8_lossy(&spike.stderr));
}

#[test]
fn decompose_csv_lists_rectangle_energies() {
    let o = run(&["decompose", "--grid", GRID_4X4, "--input", r#"{"kind":"haar-atom","normalize":false}"#, "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("rectangle,energy\n"));
    assert!(text.contains("\"0:0:(0)|1:0:(0)\",1.0"));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(run(&["nope"]).status.code(), Some(1));
    assert_eq!(run(&["decompose"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
