use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kerr_gates(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kerr-gates")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = kerr_gates(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const QUICK: &str = r#"{"schema_version": 1, "optimizer": {"restarts": 2, "max_iterations": 60}}"#;

fn quick_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("quick.json");
    fs::write(&path, QUICK).unwrap();
    path
}

fn strip_wall_time(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wall_time_seconds");
            map.values_mut().for_each(strip_wall_time);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_wall_time),
        _ => {}
    }
}

#[test]
fn poor_convergence_still_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let out = dir.path().join("o");
    ok(&["optimize", "--config", s(&cfg), "--target", "cnot", "--blocks", "2", "--u", "0.0", "--out-dir", s(&out)]);
    let report = json(&out.join("report.json"));
    let (f, c) = (report["report"]["best_fidelity"].as_f64().unwrap(), report["report"]["best_cost"].as_f64().unwrap());
    assert!(f < 1.0 && c > 0.0);
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "optimize");
    for o in manifest["outputs"].as_array().unwrap() {
        assert!(out.join(o.as_str().unwrap()).is_file());
    }
    let table = fs::read_to_string(out.join("params.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn evaluate_reproduces_optimize_and_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let opt = dir.path().join("opt");
    ok(&["optimize", "--config", s(&cfg), "--blocks", "3", "--u", "0.5", "--seed", "4", "--out-dir", s(&opt)]);
    let best = json(&opt.join("report.json"))["report"]["best_fidelity"].as_f64().unwrap();

    for params in ["spec.json", "report.json", "params.csv"] {
        let ev = dir.path().join(format!("ev-{params}"));
        ok(&["evaluate", "--params", s(&opt.join(params)), "--blocks", "3", "--u", "0.5", "--out-dir", s(&ev)]);
        let f = json(&ev.join("gate_report.json"))["fidelity"].as_f64().unwrap();
        assert_eq!(f.to_bits(), best.to_bits(), "{params}");
    }

    let replayed = dir.path().join("replay");
    ok(&["replay", "--manifest", s(&opt.join("manifest.json")), "--out-dir", s(&replayed), "--jobs", "1"]);
    assert_eq!(fs::read(opt.join("params.csv")).unwrap(), fs::read(replayed.join("params.csv")).unwrap());
    assert_eq!(fs::read(opt.join("spec.json")).unwrap(), fs::read(replayed.join("spec.json")).unwrap());
    let (mut a, mut b) = (json(&opt.join("report.json")), json(&replayed.join("report.json")));
    strip_wall_time(&mut a);
    strip_wall_time(&mut b);
    assert_eq!(a, b);
}

#[test]
fn zero_couplings_give_half_fidelity_for_cnot() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("zero.csv");
    fs::write(&table, "block,j_paral_upper,j_paral_lower,j_inter,j_down,j_up\n0,0,0,0,0,0\n1,0,0,0,0,0\n").unwrap();
    let out = dir.path().join("ev");
    ok(&["evaluate", "--params", s(&table), "--blocks", "2", "--target", "cnot", "--full-matrix", "--out-dir", s(&out)]);
    let r = json(&out.join("gate_report.json"));
    assert!((r["fidelity"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(r["two_photon_states"].as_array().unwrap().len(), 10);
    let real = fs::read_to_string(out.join("two_photon_real.csv")).unwrap();
    assert_eq!(real.lines().count(), 11);
    assert!(real.lines().all(|l| l.split(',').count() == 11));
    assert_eq!(fs::read_to_string(out.join("unitary_imag.csv")).unwrap().lines().count(), 82);
}

#[test]
fn usage_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"schema_version": 1, "blockz": 3, "optimizer": {"restartz": 1}}"#).unwrap();
    let out = kerr_gates(&["optimize", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("blockz") && err.contains("optimizer.restartz"), "{err}");

    let table = dir.path().join("p.csv");
    fs::write(&table, "block,j_paral_upper,j_paral_lower,j_inter,j_down,j_up\n0,0,0,0,0,0\n").unwrap();
    let out = kerr_gates(&["evaluate", "--params", s(&table), "--blocks", "4", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let out = kerr_gates(&["evaluate", "--params", s(&dir.path().join("missing.csv")), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn single_cell_sweep_matches_optimize_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let opt = dir.path().join("opt");
    let sw = dir.path().join("sweep");
    ok(&["optimize", "--config", s(&cfg), "--blocks", "2", "--u", "0.5", "--out-dir", s(&opt)]);
    ok(&["sweep", "--config", s(&cfg), "--blocks", "2", "--u", "0.5", "--out-dir", s(&sw)]);
    let cell = sw.join("cells/u0.5_b2");
    assert_eq!(fs::read(opt.join("params.csv")).unwrap(), fs::read(cell.join("params.csv")).unwrap());

    let first = fs::read_to_string(sw.join("sweep.csv")).unwrap();
    let stamp = fs::metadata(cell.join("report.json")).unwrap().modified().unwrap();
    ok(&["sweep", "--config", s(&cfg), "--blocks", "2", "--u", "0.5", "--out-dir", s(&sw)]);
    assert_eq!(fs::read_to_string(sw.join("sweep.csv")).unwrap(), first);
    assert_eq!(fs::metadata(cell.join("report.json")).unwrap().modified().unwrap(), stamp);
    assert_eq!(first.lines().count(), 2);
    assert!(first.starts_with("u_over_jmax,blocks,best_cost,best_fidelity\n"));
}

#[test]
fn noise_commands_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("p.csv");
    fs::write(&table, "block,j_paral_upper,j_paral_lower,j_inter,j_down,j_up\n0,0.3,0.4,0.5,0.6,0.7\n").unwrap();
    let cfg = dir.path().join("noise.json");
    fs::write(
        &cfg,
        r#"{"schema_version": 1, "blocks": 1,
            "lindblad": {"gamma_grid": [0, 0.5, 1], "gamma_deph_grid": [0]},
            "robustness": {"n_max_list": [0.01], "targets": ["J", "T_FP"], "samples": 4}}"#,
    )
    .unwrap();

    let lb = dir.path().join("lb");
    ok(&["lindblad", "--config", s(&cfg), "--params", s(&table), "--out-dir", s(&lb)]);
    let csv = fs::read_to_string(lb.join("lindblad.csv")).unwrap();
    assert!(csv.starts_with("gamma_over_gamma0,gamma_deph_over_gamma0,input_state,raw_fidelity,rescaled_fidelity\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 5);
    let meta = json(&lb.join("lindblad.json"));
    assert_eq!(meta["integrator"], "dormand-prince-5(4)");
    assert!((meta["decay_fit"]["rate"].as_f64().unwrap() - 2.0).abs() < 1e-3);

    let rb = dir.path().join("rb");
    ok(&["robustness", "--config", s(&cfg), "--params", s(&table), "--seed", "11", "--out-dir", s(&rb)]);
    let csv = fs::read_to_string(rb.join("robustness.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 + 1);
    assert!(csv.lines().last().unwrap().contains(",J+T_FP,mean,"));

    let again = dir.path().join("rb2");
    ok(&["replay", "--manifest", s(&rb.join("manifest.json")), "--out-dir", s(&again)]);
    assert_eq!(fs::read(rb.join("robustness.csv")).unwrap(), fs::read(again.join("robustness.csv")).unwrap());
}
