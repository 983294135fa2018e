use std::path::Path;
use std::process::{Command, Output};

use parabolic_ls::io::read_field;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parabolic-ls"))
        .args(args)
        .output()
        .unwrap()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parabolic-ls"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// CSV rows after the manifest comment and the header.
fn csv_rows(text: &str) -> Vec<&str> {
    assert!(text.starts_with("# manifest: {"));
    text.lines().skip(2).filter(|l| !l.is_empty()).collect()
}

#[test]
fn gen_writes_a_constant_field_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &[
            "gen", "--family", "const", "--value", "5", "--out", "c.field",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, u) = read_field(&dir.path().join("c.field")).unwrap();
    assert!(u.values().iter().all(|&v| v == 5.0));
    let manifest = header.manifest.expect("manifest embedded");
    assert_eq!(manifest["command"], "gen");
    assert_eq!(manifest["params"]["family"]["value"][0], 5.0);
}

#[test]
fn verify_emits_one_row_per_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &[
            "verify", "--check", "theorem2", "--family", "logspike", "--M", "2,4,8", "--shape",
            "32,32", "--out", "t2.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("t2.csv")).unwrap();
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.starts_with("theorem2,")));
}

#[test]
fn verify_json_to_stdout() {
    let o = run(&[
        "verify",
        "--check",
        "lowband",
        "--family",
        "const",
        "--value",
        "0",
        "--periodic",
        "--shape",
        "16,16",
        "--emit",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"][0]["lhs"], 0.0);
    assert_eq!(v["manifest"]["command"], "verify");
}

#[test]
fn missing_required_flag_is_a_usage_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["gen", "--value", "5", "--out", "c.field"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--family"));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn unknown_flag_names_the_token() {
    let o = run(&[
        "norm",
        "--input",
        "x.field",
        "--space",
        "lp",
        "--bogus-flag",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--bogus-flag"));
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("frobnicate"));
}

#[test]
fn domain_errors_exit_one_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &[
            "gen", "--family", "logspike", "--M", "-1", "--out", "s.field",
        ],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = run_in(
        dir.path(),
        &["norm", "--input", "missing.field", "--space", "lp"],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = run_in(
        dir.path(),
        &[
            "pde-run",
            "--N",
            "32",
            "--T",
            "0.01",
            "--dt",
            "1e-3",
            "--snapshots",
            "10",
            "--v0",
            "sine:0.95",
            "--out-dir",
            "run",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error"));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_parabolic-ls");
    let args = ["gen", "--family", "const", "--out", "c.field"];
    let ok = Command::new(bin)
        .current_dir(dir.path())
        .env("PARABOLIC_LS_THREADS", "2")
        .args(args)
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));
    let bad = Command::new(bin)
        .current_dir(dir.path())
        .env("PARABOLIC_LS_THREADS", "many")
        .args(args)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn equal_manifests_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let gen = [
        "gen", "--family", "random", "--seed", "7", "--shape", "16,32", "--out", "r.field",
    ];
    assert_eq!(run_in(dir.path(), &gen).status.code(), Some(0));
    let first = std::fs::read(dir.path().join("r.field")).unwrap();
    assert_eq!(run_in(dir.path(), &gen).status.code(), Some(0));
    assert_eq!(first, std::fs::read(dir.path().join("r.field")).unwrap());

    let sweep = [
        "sweep",
        "--checks",
        "basic,interp",
        "--family",
        "random",
        "--seed",
        "0..3",
        "--periodic",
        "--shape",
        "16,16",
        "--out",
        "s.csv",
        "--summary",
        "s.json",
    ];
    assert_eq!(run_in(dir.path(), &sweep).status.code(), Some(0));
    let (a, b) = (
        std::fs::read(dir.path().join("s.csv")).unwrap(),
        std::fs::read(dir.path().join("s.json")).unwrap(),
    );
    assert_eq!(run_in(dir.path(), &sweep).status.code(), Some(0));
    assert_eq!(a, std::fs::read(dir.path().join("s.csv")).unwrap());
    assert_eq!(b, std::fs::read(dir.path().join("s.json")).unwrap());
    assert_eq!(csv_rows(std::str::from_utf8(&a).unwrap()).len(), 6);
    assert_eq!(
        json(&dir.path().join("s.json"))["summary"]
            .as_array()
            .unwrap()
            .len(),
        2
    );
}

#[test]
fn field_tools_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let o = run_in(d, args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    };
    ok(&[
        "gen",
        "--family",
        "random",
        "--seed",
        "1",
        "--periodic",
        "--shape",
        "32,32",
        "--out",
        "p.field",
    ]);
    ok(&[
        "decompose",
        "--input",
        "p.field",
        "--bands-dir",
        "bands",
        "--out",
        "dec.json",
    ]);
    let dec = json(&d.join("dec.json"));
    assert!(dec["reconstruction_rel_error"].as_f64().unwrap() < 1e-12);
    let bands = std::fs::read_dir(d.join("bands")).unwrap().count();
    assert_eq!(bands, dec["sup_norms"].as_array().unwrap().len());

    ok(&[
        "norm",
        "--input",
        "p.field",
        "--space",
        "lt",
        "--p",
        "inf",
        "--q",
        "2",
        "--truncated",
        "--out",
        "lt.json",
    ]);
    assert!(json(&d.join("lt.json"))["value"].as_f64().unwrap() > 0.0);
    ok(&[
        "norm", "--input", "p.field", "--space", "sobolev", "--m", "1", "--out", "w.json",
    ]);
    ok(&[
        "norm", "--input", "p.field", "--space", "lp", "--p", "1", "--lo", "0,0", "--hi",
        "0.5,0.5", "--out", "l1.json",
    ]);
    ok(&[
        "bmo", "--input", "p.field", "--form", "inf", "--out", "bmo.json",
    ]);
    let bmo = json(&d.join("bmo.json"));
    assert!(bmo["result"]["value"].as_f64().unwrap() > 0.0);

    ok(&[
        "gen", "--family", "random", "--seed", "1", "--shape", "16,16", "--out", "b.field",
    ]);
    ok(&[
        "extend",
        "--input",
        "b.field",
        "--m",
        "1",
        "--out",
        "e.field",
        "--emit-seam-report",
        "seam.json",
        "--localized",
        "l.field",
    ]);
    let (_, e) = read_field(&d.join("e.field")).unwrap();
    assert_eq!(e.grid().shape(), &[48, 48]);
    assert_eq!(e.grid().origin(), &[-1.0, -1.0]);
    let (_, l) = read_field(&d.join("l.field")).unwrap();
    assert!(l.grid().is_periodic());
    assert!(
        json(&d.join("seam.json"))["seams"]["mismatches"]
            .as_array()
            .unwrap()
            .len()
            >= 4
    );

    // band norms need a periodic grid
    let o = run_in(d, &["norm", "--input", "b.field", "--space", "besov"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn pde_run_writes_three_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &[
            "pde-run",
            "--N",
            "64",
            "--dt",
            "1e-3",
            "--T",
            "0.2",
            "--snapshots",
            "20",
            "--v0",
            "sine:0.5",
            "--checkpoints",
            "0.1,0.2",
            "--out-dir",
            "run",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("run");
    let (header, traj) = read_field(&out.join("trajectory.field")).unwrap();
    assert!(!traj.grid().is_periodic());
    assert_eq!(header.manifest.unwrap()["command"], "pde-run");
    let diag = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let rows = csv_rows(&diag);
    assert_eq!(rows.len(), 21);
    assert!(diag.lines().nth(1).unwrap() == "t,m,G,bmo,sobolev");
    assert_eq!(rows.iter().filter(|r| !r.ends_with(",,")).count(), 2);
    let fit = json(&out.join("fit.json"));
    assert!(fit["apriori"]["c2"].as_f64().unwrap().is_finite());
    assert_eq!(fit["closure"].as_array().unwrap().len(), 2);
}
