use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_iasreg"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const NUMDIFF: &str = r#"{
  "problem": {"generator": "numdiff", "n": 30, "sigma_rel": 0.01, "seed": 4},
  "prior": {"partition": "trivial", "eta": 0.0001, "vartheta": "snr"},
  "solver": {"method": "ias"}
}"#;

fn summary_without_timings(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timings");
    v
}

#[test]
fn solve_minimal_numdiff() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "nd.json", NUMDIFF);
    let out = dir.path().join("out");
    let st = bin().arg("solve").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    for f in ["solution.csv", "theta.csv", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let s = summary_without_timings(&out.join("summary.json"));
    assert_eq!(s["converged"], true);
    assert_eq!(s["schema_version"], 1);
    assert_eq!(fs::read_to_string(out.join("solution.csv")).unwrap().lines().count(), 31);
}

#[test]
fn solve_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "nd.json", NUMDIFF);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert!(bin().arg("solve").arg(&cfg).arg("--out").arg(out).status().unwrap().success());
    }
    assert_eq!(
        summary_without_timings(&a.join("summary.json")),
        summary_without_timings(&b.join("summary.json"))
    );
    assert_eq!(
        fs::read_to_string(a.join("solution.csv")).unwrap(),
        fs::read_to_string(b.join("solution.csv")).unwrap()
    );
}

#[test]
fn malformed_config_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (i, text) in [
        "{ not json",
        r#"{"problem": {"generator": "numdiff", "sigma_rel": 0.01}, "prior": {"eta": 0.1, "vartheta": {"value": 1.0}}, "solver": {"method": "ias"}, "extra": 1}"#,
        r#"{"problem": {"generator": "numdiff", "sigma_rel": 0.01}, "prior": {"eta": 0.1, "beta": 2.0, "vartheta": {"value": 1.0}}, "solver": {"method": "ias"}}"#,
        r#"{"problem": {"generator": "bundle", "path": "missing"}, "prior": {"eta": 0.1, "vartheta": {"value": 1.0}}, "solver": {"method": "ias"}}"#,
        r#"{"problem": {"generator": "numdiff", "sigma_rel": 0.01}, "prior": {"eta": -0.5, "vartheta": {"value": 1.0}}, "solver": {"method": "ias"}}"#,
    ]
    .iter()
    .enumerate()
    {
        let cfg = write(dir.path(), &format!("bad{i}.json"), text);
        let res = bin().arg("solve").arg(&cfg).arg("--out").arg(&out).output().unwrap();
        assert_eq!(res.status.code(), Some(1), "case {i}");
        assert!(!String::from_utf8_lossy(&res.stderr).is_empty());
        assert!(!out.exists(), "case {i} left output behind");
    }
}

#[test]
fn error_names_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"problem": {"generator": "numdiff", "sigma_rel": 0.01}, "prior": {"eta": 0.1, "vartheta": {"value": 1.0}}, "solver": {"method": "ias"}, "options": {"delta": 2.0}}"#,
    );
    let res = bin().arg("solve").arg(&cfg).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("options.delta"));
}

#[test]
fn non_converged_run_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"problem": {"generator": "numdiff", "n": 30, "sigma_rel": 0.05, "seed": 1},
            "prior": {"partition": "trivial", "eta": 0.0001, "vartheta": "snr"},
            "solver": {"method": "ias"}, "options": {"max_outer": 1}}"#,
    );
    let out = dir.path().join("o");
    let st = bin().arg("solve").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(2));
    assert!(out.join("summary.json").exists());
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "myrun.json", NUMDIFF);
    let root = dir.path().join("root");
    let st = bin().arg("solve").arg(&cfg).env("IASREG_OUTPUT_ROOT", &root).status().unwrap();
    assert!(st.success());
    assert!(root.join("myrun/summary.json").exists());
}

#[test]
fn gen_bundle_then_morozov() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("bundle");
    let st = bin()
        .args(["gen", "numdiff", "--n", "20", "--sigma-rel", "0.02", "--out"])
        .arg(&bundle)
        .status()
        .unwrap();
    assert!(st.success());
    assert!(bundle.join("A.mtx").exists());
    let cfg = write(
        dir.path(),
        "m.json",
        r#"{"problem": {"generator": "bundle", "path": "bundle"},
            "prior": {"partition": "trivial", "eta": 0.1, "vartheta": {"value": 1.0}},
            "solver": {"method": "tikhonov-morozov"}, "output": "mz"}"#,
    );
    assert!(bin().arg("solve").arg(&cfg).status().unwrap().success());
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("mz/summary.json")).unwrap()).unwrap();
    assert!(s["alpha_tikh"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("mz/morozov_trace.csv").exists());
}

#[test]
fn hybrid_on_small_tomo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "t.json",
        r#"{"problem": {"generator": "tomo", "nx": 12, "ny": 12, "n_rays": 16, "n_views": 8},
            "prior": {"eta": 0.001, "vartheta": {"value": 0.05}},
            "solver": {"method": "hybrid", "r2": -0.5}}"#,
    );
    let out = dir.path().join("o");
    let st = bin().arg("solve").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["method"], "hybrid");
    assert!(s["switch_iteration"].as_u64().is_some());
}

#[test]
fn compat_prints_parameters() {
    let res = bin()
        .args(["compat", "--beta1", "1.6", "--vartheta1", "0.1", "--r2", "-1"])
        .output()
        .unwrap();
    assert!(res.status.success());
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    let (b2, t2) = (v["beta2"].as_f64().unwrap(), v["vartheta2"].as_f64().unwrap());
    assert!(b2 > 1.0 && t2 > 0.0);
    let bad = bin().args(["compat", "--beta1", "1.6", "--vartheta1", "0.1", "--r2", "0.3"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn experiment_numdiff_small() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nd");
    let st = bin()
        .args(["experiment-numdiff", "--levels", "5", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(matches!(st.code(), Some(0) | Some(2)));
    let text = fs::read_to_string(out.join("numdiff.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sigma_rel,alpha_tikh,alpha_ias,evals_tikh,iters_ias,relerr_tikh,relerr_ias"
    );
    assert_eq!(lines.count(), 5);
}

#[test]
fn experiment_tomo_small() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let st = bin()
        .args(["experiment-tomo", "--nx", "12", "--ny", "12", "--rays", "16", "--views", "8", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    for f in ["tomo.json", "timing.csv", "residuals.csv", "x_true.csv", "snapshots/x_iter_001.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn help_lists_subcommands() {
    let res = bin().arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&res.stdout);
    for c in ["solve", "gen", "experiment-numdiff", "experiment-tomo", "compat"] {
        assert!(text.contains(c), "{c}");
    }
}
