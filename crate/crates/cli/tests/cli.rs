use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn sgm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgm")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("valid JSON")
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing").expect("timing present");
    v
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

const EXAMPLE7: &str = "1 2 0 0.1\n0 1 1 0.3\n1 1 1 0.2\n";

#[test]
fn sample_output_round_trips_into_fit() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("u.csv");
    let o = sgm(&["sample", "--dim", "2", "--n", "60", "--seed", "4", "--output", s(&data)]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&data).unwrap();
    assert!(text.starts_with("x1,x2\n"));
    assert_eq!(text.lines().count(), 61);
    for v in text.lines().skip(1).flat_map(|l| l.split(',')) {
        assert!((0.0..=1.0).contains(&v.parse::<f64>().unwrap()));
    }
    let fit = json(&sgm(&["fit", "--input", s(&data), "--no-preprocess"]));
    assert_eq!(fit["schema"], 1);
    assert_eq!(fit["command"], "fit");
    assert_eq!(floats(&fit["result"]["theta"]).len(), 7);
    assert_eq!(fit["result"]["freqs"]["dim"], 2);
    assert!(fit["result"]["report"]["converged"].as_bool().unwrap());
    assert_eq!(fit["config"]["input"], s(&data));

    let params = dir.path().join("fit.json");
    std::fs::write(&params, serde_json::to_string(&fit).unwrap()).unwrap();
    let o = sgm(&["sample", "--params", s(&params), "--n", "10", "--no-header"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 10);
}

#[test]
fn reruns_are_identical_apart_from_timing() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("b.csv");
    assert_eq!(code(&sgm(&["sample", "--benchmark", "--n", "30", "--seed", "2", "--output", s(&data)])), 0);
    for args in [
        vec!["fit", "--input", s(&data), "--tau", "0.5"],
        vec!["fit", "--input", s(&data), "--model", "gauss", "--tau", "0.5"],
        vec!["cv", "--input", s(&data), "--model", "mixm", "--taus", "0.2,0.6", "--folds", "3", "--seed", "9"],
    ] {
        let a = sgm(&args);
        let b = sgm(&args);
        assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
        let (ja, jb) = (json(&a), json(&b));
        assert!(ja["timing"]["wall_seconds"].as_f64().unwrap() >= 0.0);
        assert_eq!(
            serde_json::to_string(&without_timing(ja.clone())).unwrap(),
            serde_json::to_string(&without_timing(jb)).unwrap()
        );
        let mut par = args.clone();
        par.extend(["--jobs", "3"]);
        assert_eq!(json(&sgm(&par))["result"], ja["result"], "{args:?}");
    }
    let x = sgm(&["sample", "--benchmark", "--n", "30", "--seed", "2"]);
    assert_eq!(x.stdout, std::fs::read(&data).unwrap());
}

#[test]
fn numbers_carry_seventeen_digits() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.txt", EXAMPLE7);
    let o = sgm(&["feasible", "--params", s(&p)]);
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    assert!(text.contains("\"tau\": 1.0000000000000000e0"), "{text}");
    assert!(text.contains("1.0000000000000001e-1"));
}

#[test]
fn exit_codes_by_failure_class() {
    let dir = TempDir::new().unwrap();
    let good = write(&dir, "g.csv", "0.1,0.2\n0.3,0.4\n0.5,0.9\n0.7,0.1\n");
    let blank = write(&dir, "blank.csv", "a,b\n0.1,\n0.3,0.4\n");
    let text = write(&dir, "text.csv", "0.1,0.2\n0.3,abc\n");
    let ragged = write(&dir, "ragged.csv", "0.1,0.2\n0.3\n");
    let outside = write(&dir, "out.csv", "0.1,1.2\n0.3,0.4\n");
    let bad_params = write(&dir, "bad.txt", "1 1 5.0\n");
    let missing = dir.path().join("missing.csv");

    let usage: &[&[&str]] = &[
        &["fit"],
        &["frobnicate"],
        &["fit", "--input", s(&good), "--region", "lattice"],
        &["fit", "--input", s(&good), "--tau", "1.5"],
        &["fit", "--input", s(&good), "--model", "gauss", "--region", "lattice", "--M", "3"],
        &["fit", "--input", s(&good), "--freqs", "nonsense"],
        &["sample", "--n", "5"],
        &["sample", "--dim", "2", "--n", "0"],
        &["analyze", "--params", s(&bad_params)],
        &["cv", "--input", s(&good), "--folds", "1"],
    ];
    for args in usage {
        assert_eq!(code(&sgm(args)), 2, "{args:?}");
    }
    let data: &[&[&str]] = &[
        &["fit", "--input", s(&missing)],
        &["fit", "--input", s(&blank)],
        &["fit", "--input", s(&text)],
        &["fit", "--input", s(&ragged)],
        &["fit", "--input", s(&outside), "--no-preprocess"],
        &["feasible", "--params", s(&missing)],
    ];
    for args in data {
        let o = sgm(args);
        assert_eq!(code(&o), 3, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = sgm(&["sample", "--params", s(&bad_params), "--n", "5"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    assert_eq!(code(&sgm(&["--help"])), 0);
}

#[test]
fn feasibility_report() {
    let dir = TempDir::new().unwrap();
    let e7 = write(&dir, "e7.txt", EXAMPLE7);
    let r = json(&sgm(&["feasible", "--params", s(&e7)]));
    let lit = &r["result"]["lit"];
    assert!((lit["margin"].as_f64().unwrap() - 0.1).abs() < 1e-14);
    assert_eq!(lit["feasible"], true);
    assert_eq!(r["result"]["lattice"]["m"], 3);
    assert_eq!(r["result"]["grid"]["positive_semidefinite"], true);
    assert_eq!(r["result"]["ma2"], Value::Null);

    let zero = write(&dir, "z.txt", "1 0 0\n0 1 0\n1 1 0\n");
    let r = json(&sgm(&["feasible", "--params", s(&zero), "--M", "4"]));
    assert!(r["result"]["lit"]["margin"].as_f64().unwrap() > 0.0);
    assert!(r["result"]["lattice"]["margin"].as_f64().unwrap() > 0.0);
    assert!(r["result"]["grid"]["min_eigenvalue"].as_f64().unwrap() > 0.0);

    let ma2 = write(&dir, "ma2.txt", "1 1 -0.9\n2 2 0.3\n");
    let r = json(&sgm(&["feasible", "--params", s(&ma2)]));
    assert_eq!(r["result"]["ma2"]["feasible"], false);
    assert_eq!(r["result"]["grid"]["positive_semidefinite"], false);
}

#[test]
fn zero_budget_gives_zero_estimate() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "e7.txt", EXAMPLE7);
    let data = dir.path().join("d.csv");
    assert_eq!(code(&sgm(&["sample", "--params", s(&p), "--n", "80", "--output", s(&data)])), 0);
    for model in ["sgm", "mixm"] {
        let r = json(&sgm(&["fit", "--input", s(&data), "--model", model, "--tau", "0"]));
        assert!(floats(&r["result"]["theta"]).iter().all(|&t| t == 0.0), "{model}");
        assert!(r["result"]["standardization"]["mean"].is_array());
    }
    let r = json(&sgm(&["fit", "--input", s(&data), "--model", "gauss", "--tau", "0"]));
    let pc = &r["result"]["partial_correlation"];
    assert!(pc[0][1].as_f64().unwrap().abs() < 1e-12 && pc[1][2].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn table1_and_exports() {
    let r = json(&sgm(&["analyze", "--table1"]));
    let targets = [0.7558, 0.4928, 0.5047, 0.4267, 0.7743, 0.3459];
    let rows = r["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for (row, t) in rows.iter().zip(targets) {
        assert!((row["value"].as_f64().unwrap() - t).abs() < 5e-4, "{row}");
    }
    let mixm_cmi: Vec<f64> = r["result"]["cmi"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["model"] == "mixm")
        .map(|c| c["ratio"].as_f64().unwrap())
        .collect();
    assert!((mixm_cmi[2] - 0.75).abs() < 0.075);

    let dir = TempDir::new().unwrap();
    let zero = write(&dir, "z.txt", "1 1 0 0\n0 1 1 0\n1 0 1 0\n");
    let tsv = dir.path().join("g.tsv");
    let r = json(&sgm(&[
        "analyze", "--params", s(&zero), "--quantity", "correlation,beta123,cmi,moments", "--quantity", "grid",
        "--pair", "1,3", "--resolution", "5", "--grid-output", s(&tsv), "--quad-nodes", "12",
    ]));
    let q = &r["result"];
    for k in ["correlation", "beta123", "cmi"] {
        assert!(q[k].as_f64().unwrap().abs() < 1e-12, "{k}: {}", q[k]);
    }
    assert!((q["moments"]["mean"][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((q["grid"]["trapezoid"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let text = std::fs::read_to_string(&tsv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x_1\tx_3\tdensity");
    assert_eq!(lines.len(), 26);
    assert!(lines[1..].iter().all(|l| l.split('\t').map(|c| c.parse::<f64>().unwrap()).count() == 3));
}

#[test]
fn cv_marks_one_best_row() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("u.csv");
    assert_eq!(code(&sgm(&["sample", "--dim", "2", "--n", "40", "--output", s(&data)])), 0);
    let r = json(&sgm(&["cv", "--input", s(&data), "--taus", "0.1,0.5,1", "--folds", "4"]));
    let rows = r["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().filter(|r| r["best"] == true).count(), 1);
    assert_eq!(rows[0]["per_fold"].as_array().unwrap().len(), 4);
    assert_eq!(r["config"]["folds"], 4);
}

#[test]
fn single_replicate_simulation_flags_infinite_errors() {
    let r = json(&sgm(&["simulate", "--replicates", "1", "--taus", "1", "--seed", "3"]));
    assert_eq!(r["result"]["study"], "benchmark");
    let sgm_rows = r["result"]["summary"]["sgm"].as_array().unwrap();
    assert_eq!(sgm_rows.len(), 50);
    assert_eq!(sgm_rows[0]["theta"]["se"], Value::Null);
    let flags = r["nonfinite"].as_array().unwrap();
    let se = flags.iter().find(|f| f["path"] == "result.summary.sgm[0].theta.se").expect("se flagged");
    assert_eq!(se["value"], "inf");
}

#[test]
fn recovery_simulation() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "e7.txt", EXAMPLE7);
    let r = json(&sgm(&[
        "simulate", "--recovery", "--params", s(&p), "--replicates", "2", "--n", "200", "--region", "lit",
    ]));
    let regions = r["result"]["summary"]["regions"].as_array().unwrap();
    assert_eq!(regions.len(), 1);
    assert_eq!(regions[0]["region"]["kind"], "lit");
    assert_eq!(floats(&regions[0]["truth"]), [0.1, 0.3, 0.2]);
    assert_eq!(regions[0]["coefficients"][0]["theta"]["count"], 2);
    assert_eq!(code(&sgm(&["simulate", "--recovery"])), 2);
}
