use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bundle_lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bundle-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn result(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap()
}

#[test]
fn riesz_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = bundle_lab(&["riesz", "--weights", "bergman:alpha=1", "--blaschke", "blaschke(0;0,0.5)"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    let r = result(dir.path());
    assert_eq!(r["result"]["verdict"], "Riesz-consistent");
    assert_eq!(r["config"]["numerics"]["K"], 512);
    let keys: Vec<&String> = r["result"].as_object().unwrap().keys().collect();
    for k in ["K", "c1", "c2", "cond", "n_max", "stability", "tail", "verdict"] {
        assert!(keys.iter().any(|x| *x == k), "missing {k}");
    }
}

#[test]
fn json_is_sorted_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = bundle_lab(&["decompose", "--fn", "compose(poly(0,1,0,2),blaschke(0;0,0.4))"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("result.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&v).unwrap() + "\n", text);
    assert_eq!(v["result"]["m"], 2);
}

#[test]
fn similar_and_not_similar_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let f1 = "compose(poly(0,1,0,2),blaschke(0;0,0.4))";
    let o = bundle_lab(
        &["similar", "--weights", "bergman:alpha=1", "--f1", f1, "--f2", "compose(poly(0,1,0,2),blaschke(0;0.2,-0.5))"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(result(dir.path())["result"]["verdict"]["verdict"], "similar");
    let o = bundle_lab(&["similar", "--weights", "bergman:alpha=1", "--f1", f1, "--f2", "poly(0,1,0,2)"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(result(dir.path())["result"]["verdict"]["reason"], "order_mismatch");
}

#[test]
fn index_map_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["index-map", "--fn", "poly(2,1,1)", "--bounds", "-1,5,-3,3", "--res", "120"];
    assert_eq!(bundle_lab(&args, a.path()).status.code(), Some(0));
    assert_eq!(bundle_lab(&args, b.path()).status.code(), Some(0));
    for f in ["index_map.svg", "result.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        if f == "result.json" {
            // only the recorded output directory differs
            let strip = |v: &[u8]| {
                let mut v: Value = serde_json::from_slice(v).unwrap();
                v["config"]["out"] = Value::Null;
                v
            };
            assert_eq!(strip(&x), strip(&y));
        } else {
            assert_eq!(x, y);
        }
    }
    let svg = std::fs::read_to_string(a.path().join("index_map.svg")).unwrap();
    assert!(svg.contains("#e41a1c") && svg.contains("#ffd92f"));
}

#[test]
fn identity_is_one_red_disk() {
    let dir = tempfile::tempdir().unwrap();
    let o = bundle_lab(&["index-map", "--fn", "poly(0,1)", "--bounds", "-1.5,1.5,-1.5,1.5", "--res", "60"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = result(dir.path());
    let regions = r["result"]["regions"].as_array().unwrap();
    assert_eq!(regions.iter().filter(|g| g["index"] == 1).count(), 1);
    let svg = std::fs::read_to_string(dir.path().join("index_map.svg")).unwrap();
    assert!(svg.contains("#e41a1c") && !svg.contains("#ffd92f"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "command = \"douglas\"\nweights = \"hardy\"\nblaschke = \"blaschke(0;0,0.5)\"\n\n[numerics]\nK = 128\nn_max = 20\n").unwrap();
    let o = bundle_lab(&["run", "--config", cfg.to_str().unwrap(), "--n-max", "10", "--csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = result(dir.path());
    assert_eq!(r["result"]["n_max"], 10);
    assert_eq!(r["result"]["K"], 128);
    assert!(dir.path().join("x.csv").exists());
}

#[test]
fn config_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "weights = \"hardy\"\nblaschk = \"x\"\n").unwrap();
    let o = bundle_lab(&["riesz", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(64));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 2, column 1"), "{err}");
    let o = bundle_lab(&["riesz", "--weights", "bergman:beta=1", "--blaschke", "blaschke(0;0,0.5)"], dir.path());
    assert_eq!(o.status.code(), Some(64));
    let o = bundle_lab(&["decompose", "--fn", "poly(1,"], dir.path());
    assert_eq!(o.status.code(), Some(64));
    let o = bundle_lab(&["riesz", "--frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(64));
    let o = Command::new(env!("CARGO_BIN_EXE_bundle-lab"))
        .args(["weights-classify", "--weights", "hardy", "--out"])
        .arg(dir.path())
        .env("BUNDLE_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn computation_errors_exit_70() {
    let dir = tempfile::tempdir().unwrap();
    let o = bundle_lab(&["douglas", "--blaschke", "blaschke(0;0.2,0.2)"], dir.path());
    assert_eq!(o.status.code(), Some(70), "{}", String::from_utf8_lossy(&o.stderr));
    let diag: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("error.json")).unwrap()).unwrap();
    assert_eq!(diag["result"]["error"]["kind"], "RepeatedZeros");
}

#[test]
fn weights_and_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let o = bundle_lab(&["weights-classify", "--weights", "bergman:alpha=1", "--weights2", "hardy"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = result(dir.path());
    assert_eq!(r["result"]["growth"]["classification"], "polynomial");
    assert_eq!(r["result"]["equivalence"]["equivalent"], false);
    let o = bundle_lab(&["counterexample", "--t", "0.5", "--n-max", "100", "--csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(csv.starts_with("n,r_n\n0,1e0\n"));
    assert_eq!(csv.lines().count(), 102);
}
