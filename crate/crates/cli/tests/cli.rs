use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn nosig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nosig")).args(args).env_remove("NOSIG_THREADS").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn report(args: &[&str]) -> (i32, Value) {
    let mut full = args.to_vec();
    full.push("--json");
    let o = nosig(&full);
    let v = serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&o.stderr)));
    (code(&o), v)
}

fn verdict<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["verdicts"].as_array().unwrap().iter().find(|v| v["name"] == name).unwrap_or_else(|| panic!("no verdict {name}: {r}"))
}

fn without_timings(mut r: Value) -> Value {
    r.as_object_mut().unwrap().remove("timings_ms");
    r
}

#[test]
fn chsh_singlet_reaches_tsirelson() {
    let singlet = data("singlet.json");
    let (exit, r) = report(&["chsh", "--t", singlet.to_str().unwrap(), "--optimize", "--restarts", "32", "--seed", "7"]);
    assert_eq!(exit, 0);
    let v = verdict(&r, "tsirelson")["value"].as_f64().unwrap();
    assert!((v - 2.0 * std::f64::consts::SQRT_2).abs() <= 1e-4, "{v}");
}

#[test]
fn shipped_twist_certificate_replays() {
    let (exit, r) = report(&["twist", "--fig1"]);
    assert_eq!(exit, 0);
    assert_eq!(verdict(&r, "replay")["pass"], true);
    let cert = data("twist_certificate.json");
    let (exit, _) = report(&["twist", "--fig1", "--apply", cert.to_str().unwrap()]);
    assert_eq!(exit, 0);
}

#[test]
fn facet_free_search_in_two_dimensions_finds_nothing() {
    let o = nosig(&["keller", "search", "--n", "2", "--size", "4", "--graph", "gstar", "--exhaustive"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("no clique exists"));
}

#[test]
fn keller_search_verify_basis_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g3.txt");
    let basis = dir.path().join("basis.json");
    let o = nosig(&["keller", "search", "--n", "3", "--size", "8", "--exhaustive", "--write", file.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let (exit, r) = report(&["keller", "verify", "--file", file.to_str().unwrap(), "--graph", "g"]);
    assert_eq!(exit, 0);
    assert_eq!(verdict(&r, "clique")["pass"], true);
    let (exit, r) = report(&["keller", "basis", "--file", file.to_str().unwrap(), "--write", basis.to_str().unwrap()]);
    assert_eq!(exit, 0);
    assert_eq!(verdict(&r, "orthonormality")["pass"], true);
    assert!(basis.exists());
    // a tiling clique that shares facets is not a G*-clique
    assert_eq!(code(&nosig(&["keller", "verify", "--file", file.to_str().unwrap()])), 1);
}

#[test]
fn shipped_keller_file_verifies() {
    let file = data("keller10.txt");
    let (exit, r) = report(&["keller", "verify", "--file", file.to_str().unwrap(), "--graph", "gstar"]);
    assert_eq!(exit, 0, "{r}");
}

#[test]
fn reconstruction_paths_pass() {
    let (exit, r) = report(&["reconstruct", "--fixture", "mixed3", "--seed", "3"]);
    assert_eq!(exit, 0);
    assert!(verdict(&r, "recovery")["value"].as_f64().unwrap() <= 1e-8);
    let (exit, _) = report(&["reconstruct", "--path", "povm", "--fixture", "singlet", "--dims", "2,2"]);
    assert_eq!(exit, 0);
}

#[test]
fn violations_exit_one() {
    assert_eq!(report(&["check", "nosig", "--signalling", "0.785398"]).0, 1);
    let (exit, r) = report(&["classify", "--fixture", "orientation-mix"]);
    assert_eq!(exit, 1);
    assert_eq!(r["details"]["orientation"]["class"], "NEITHER", "{r}");
    let pr = data("pr_box.json");
    assert_eq!(report(&["chsh", "--box", pr.to_str().unwrap()]).0, 1);
    assert_eq!(report(&["check", "nosig", "--box", pr.to_str().unwrap()]).0, 0);
}

#[test]
fn section_build_then_check() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.json");
    let family = dir.path().join("family.json");
    let (exit, _) = report(&[
        "section",
        "build",
        "--fixture",
        "mixed3",
        "--table-out",
        table.to_str().unwrap(),
        "--family-out",
        family.to_str().unwrap(),
    ]);
    assert_eq!(exit, 0);
    let (exit, r) = report(&["section", "check", "--table", table.to_str().unwrap(), "--family", family.to_str().unwrap()]);
    assert_eq!(exit, 0);
    assert!(verdict(&r, "section-consistency")["value"].as_f64().unwrap() <= 1e-10);
    let (exit, r) = report(&["section", "build", "--signalling", "0.785398"]);
    assert_eq!(exit, 1);
    assert!(verdict(&r, "section-consistency")["detail"].as_str().unwrap().contains("traced out"));
}

#[test]
fn identical_arguments_give_identical_reports() {
    for args in [
        &["reconstruct", "--fixture", "mixed3", "--seed", "11"][..],
        &["prbox", "--samples", "300", "--ladder", "100,200", "--seed", "4"][..],
        &["keller", "search", "--n", "4", "--size", "16", "--seed", "9"][..],
    ] {
        let (_, a) = report(args);
        let (_, b) = report(args);
        assert_eq!(without_timings(a), without_timings(b), "{args:?}");
    }
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = nosig(&["twist", "--fig1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(written["command"][0], "twist");
    let numeric = written["verdicts"].as_array().unwrap().iter().filter(|v| v.get("value").is_some());
    for v in numeric {
        assert!(v.get("tolerance").is_some(), "numeric verdict without tolerance: {v}");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&nosig(&["frobnicate"])), 2);
    assert_eq!(code(&nosig(&["chsh", "--no-such-flag"])), 2);
    assert_eq!(code(&nosig(&["keller", "search", "--n", "5", "--size", "32", "--exhaustive"])), 2);
    assert_eq!(code(&nosig(&["--help"])), 0);
}

#[test]
fn malformed_json_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"dims\": [2, 2], \"entries\": ").unwrap();
    let o = nosig(&["chsh", "--t", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert_eq!(code(&nosig(&["check", "nosig", "--box", bad.to_str().unwrap()])), 2);
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&nosig(&["classify", "--t", missing.to_str().unwrap()])), 2);
}

#[test]
fn thread_cap_is_honoured() {
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_nosig"))
            .args(["reconstruct", "--fixture", "mixed3", "--json"])
            .env("NOSIG_THREADS", v)
            .output()
            .unwrap()
    };
    let one = run("1");
    assert_eq!(code(&one), 0);
    let two = run("2");
    let a: Value = serde_json::from_slice(&one.stdout).unwrap();
    let b: Value = serde_json::from_slice(&two.stdout).unwrap();
    assert_eq!(without_timings(a), without_timings(b));
    assert_eq!(code(&run("0")), 2);
    assert_eq!(code(&run("many")), 2);
}
