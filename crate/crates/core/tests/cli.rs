use std::path::Path;
use std::process::{Command, Output};

fn fermi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fermi"))
        .args(args)
        .env_clear()
        .output()
        .expect("run fermi")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn invalid_flags_exit_two_and_name_the_flag() {
    for (args, flag) in [
        (&["coeffs", "--g", "-1"][..], "--g"),
        (&["manifold", "--samples", "4"][..], "--samples"),
        (&["optimize", "--s-lo", "0.1", "--s-hi", "0"][..], "--s-hi"),
        (&["verify", "--k", "0"][..], "--k"),
    ] {
        let o = fermi(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(flag), "{args:?}");
    }
    assert_eq!(fermi(&["nonsense"]).status.code(), Some(2));
    assert_eq!(fermi(&["--help"]).status.code(), Some(0));
}

#[test]
fn coefficients_json() {
    let o = fermi(&["coeffs", "--s", "0.006", "--g", "2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["s", "g", "a1", "b1", "a2", "b2", "bound", "true_max"] {
        assert!(v[key].is_number(), "{key}");
    }
    assert_eq!(v["a1"].as_f64().unwrap(), 0.012);
}

#[test]
fn optimize_finds_the_optimum() {
    let o = fermi(&["optimize", "--format", "csv"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let row: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((row[0] - 0.009569094523943).abs() < 1e-9);
    assert!((row[1] - 0.211931840664873).abs() < 1e-12);
}

#[test]
fn verify_certifies_and_is_deterministic() {
    let a = fermi(&["verify", "--horizon", "40"]);
    let b = fermi(&["verify", "--horizon", "40"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(v["certified"], true);
}

#[test]
fn trace_without_members_exits_one() {
    let o = fermi(&["trace", "--s-min", "0.03", "--s-max", "0.05", "--samples", "5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_three() {
    let o = fermi(&["orbit", "--s", "3", "--k", "1", "--steps", "20"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn orbit_and_trace_files_with_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let orbit = dir.path().join("orbit.csv");
    let o = fermi(&["orbit", "--steps", "10", "--out", orbit.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&orbit).unwrap();
    assert!(csv.starts_with("n,t,v,gap,dv\n"));
    assert_eq!(csv.lines().count(), 12);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sidecar(&orbit, "meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "orbit");

    let trace = dir.path().join("trace.csv");
    let o = fermi(&["trace", "--s-min", "0", "--s-max", "0.02", "--samples", "21", "--out", trace.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("s,max_pdot_over_g,pt0,pt1,trace,hyperbolic\n"));
    assert_eq!(csv.lines().count(), 22);
}

#[test]
fn environment_supplies_defaults() {
    let o = Command::new(env!("CARGO_BIN_EXE_fermi"))
        .args(["coeffs"])
        .env_clear()
        .env("FERMI_G", "3")
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["g"].as_f64().unwrap(), 3.0);
}

#[test]
fn manifold_writes_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let o = fermi(&["manifold", "--samples", "1", "--cycles", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("a,t0,v0,theta_residual,decay_ratio,pass\n0,"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sidecar(&out, "summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summary"]["accepted"], 1);
}

fn sidecar(p: &Path, suffix: &str) -> std::path::PathBuf {
    p.with_file_name(format!("{}.{suffix}", p.file_name().unwrap().to_str().unwrap()))
}
