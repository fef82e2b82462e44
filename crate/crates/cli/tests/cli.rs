use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn iterlab(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iterlab"))
        .args(args)
        .env("ITERLAB_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn records(dir: &Path) -> Vec<Value> {
    std::fs::read_to_string(dir.join("reports.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_pde_subset_writes_one_object_per_equation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = iterlab(&["verify-pde", "--tags", "a,f,l", "--out", out], "2");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let recs = records(dir.path());
    assert_eq!(recs.len(), 3);
    let tags: Vec<&str> = recs.iter().map(|r| r["tag"].as_str().unwrap()).collect();
    assert_eq!(tags, ["a", "f", "l"]);
    for r in &recs {
        for key in ["schema_version", "tag", "params", "verdict", "max_rel_residual", "seeds", "runtime_ms"] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
        assert_eq!(r["verdict"], "pass");
    }
    let csv = std::fs::read_to_string(dir.path().join("pde_points.csv")).unwrap();
    assert!(csv.starts_with("tag,x,t,residual,rel,budget,schema"));
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn loosened_tolerance_and_custom_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = iterlab(&["verify-pde", "--tags", "l", "--tol", "1e-3", "--grid", "-2:2:0.5", "--out", out], "2");
    assert_eq!(o.status.code(), Some(0));
    let r = &records(dir.path())[0];
    assert_eq!(r["params"]["tolerance"], 1e-3);
    assert_eq!(r["params"]["x_min"], -2.0);
}

#[test]
fn tight_tolerance_fails_or_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = iterlab(&["verify-pde", "--tags", "o", "--tol", "1e-12", "--out", out], "2");
    let code = o.status.code().unwrap();
    assert!(code == 1 || code == 2, "exit {code}");
    let verdict = records(dir.path())[0]["verdict"].as_str().unwrap().to_string();
    assert_eq!(code, if verdict == "fail" { 1 } else { 2 });
}

#[test]
fn usage_errors_exit_64() {
    for args in [
        vec!["verify-pde", "--tags", "z"],
        vec!["verify-pde"],
        vec!["verify-identities", "--samples", "100"],
        vec!["density", "--model", "nope", "--t", "1"],
        vec!["moments", "--chain", "1.5", "--k", "1"],
        vec!["no-such-command"],
    ] {
        let o = iterlab(&args, "1");
        assert_eq!(o.status.code(), Some(64), "{args:?}");
    }
    let o = Command::new(env!("CARGO_BIN_EXE_iterlab"))
        .args(["sample", "--model", "cc", "--t", "1", "--n", "5"])
        .env("ITERLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn density_csv_has_schema_and_singular_marker() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = iterlab(&["density", "--model", "fbm:H=0.5", "--t", "1", "--x", "0", "--out", out], "1");
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,t,density,err_estimate,singular,schema");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let d: f64 = row[2].parse().unwrap();
    assert!((d - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);

    let o = iterlab(&["density", "--model", "j:n=1,H=0.25", "--t", "2", "--x", "-0.5:0.5:0.25", "--out", out], "1");
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<Vec<String>> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    // logarithmic singularity at the origin, symmetric and decreasing away from it
    assert_eq!(rows[2][2], "");
    assert_eq!(rows[2][4], "1");
    let v = |i: usize| rows[i][2].parse::<f64>().unwrap();
    assert_eq!(v(1), v(3));
    assert!(v(1) > v(0));
}

#[test]
fn cc_density_is_continuous_across_unit_modulus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = iterlab(&["density", "--model", "cc", "--t", "1", "--x", "0.9:1.1:0.01", "--out", out], "1");
    assert_eq!(o.status.code(), Some(0));
    let vals: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(vals.len(), 21);
    for w in vals.windows(2) {
        assert!(w[1] < w[0] && w[0] - w[1] < 2e-3);
    }
}

#[test]
fn sample_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["sample", "--model", "prodfbm:n=2,H=0.8", "--t", "1", "--n", "1000", "--seed", "7", "--out", out];
    let a = iterlab(&args, "1");
    let b = iterlab(&args, "4");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).lines().count(), 1001);
}

#[test]
fn moments_table_and_log_space() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = iterlab(
        &["moments", "--chain", "0.5,0.5", "--k", "1,2,3", "--t", "1", "--samples", "200000", "--out", out],
        "2",
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 4);
    let recs = records(dir.path());
    assert_eq!(recs.len(), 3);
    // E X^4 = 3 t for iterated Brownian motion
    assert!((recs[1]["details"]["closed_form"].as_f64().unwrap() - 3.0).abs() < 1e-12);

    let o = iterlab(&["moments", "--chain", "0.9,0.9", "--k", "50", "--out", out], "1");
    assert_eq!(o.status.code(), Some(0));
    let r = &records(dir.path())[0];
    assert!(r["details"]["log_closed_form"].as_f64().unwrap().is_finite());
    assert_eq!(r["verdict"], "computed");
}

#[test]
fn manifest_rerun_reproduces_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = iterlab(
        &["moments", "--chain", "0.6,0.4", "--k", "1,2", "--samples", "50000", "--seed", "3", "--out", out],
        "4",
    );
    assert_eq!(o.status.code(), Some(0));
    let manifest = dir.path().join("manifest.json");
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    for key in ["command", "plan", "seeds", "tool_version", "timestamp", "verdicts", "digest", "schema_version"] {
        assert!(m.get(key).is_some(), "missing {key}");
    }
    for threads in ["1", "4"] {
        let o = iterlab(&["rerun", manifest.to_str().unwrap()], threads);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert!(stdout(&o).starts_with("reproduced"));
    }
    let mut tampered = m.clone();
    tampered["plan"]["seed"] = Value::from(4);
    let bad = dir.path().join("tampered.json");
    std::fs::write(&bad, serde_json::to_string(&tampered).unwrap()).unwrap();
    let o = iterlab(&["rerun", bad.to_str().unwrap()], "1");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn identities_with_controls() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = iterlab(
        &["verify-identities", "--all", "--samples", "100000", "--seed", "42", "--negative-control", "--out", out],
        "4",
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let recs = records(dir.path());
    let kind = |k: &str| recs.iter().filter(|r| r["kind"] == k).count();
    assert_eq!(kind("identity"), 7);
    assert_eq!(kind("identity_control"), 7);
    assert_eq!(kind("cdf_identity"), 1);
    for r in recs.iter().filter(|r| r["kind"] == "identity_control") {
        assert_eq!(r["details"]["identity_holds"], false, "{}", r["tag"]);
    }
}
