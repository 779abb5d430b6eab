use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn nikwb(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nikwb"));
    cmd.current_dir(fixtures()).args(args);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t.to_string());
    }
    cmd.output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

#[derive(serde::Deserialize)]
struct Case {
    name: String,
    args: Vec<String>,
    exit: i32,
}

fn cases() -> Vec<Case> {
    serde_json::from_str(&std::fs::read_to_string(golden_dir().join("cases.json")).unwrap()).unwrap()
}

#[test]
fn golden_reports_are_stable_across_runs_and_threads() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut failures = Vec::new();
    for Case { name, args, exit } in cases() {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let args = &args[..];
        let first = nikwb(args, Some(1));
        assert_eq!(first.status.code(), Some(exit), "{name}: {}", String::from_utf8_lossy(&first.stdout));
        for threads in [None, Some(4)] {
            let again = nikwb(args, threads);
            assert_eq!(again.stdout, first.stdout, "{name}: output depends on the run or thread count");
        }
        let path = golden_dir().join(format!("{name}.out"));
        if update {
            std::fs::write(&path, &first.stdout).unwrap();
        } else if std::fs::read(&path).ok().as_deref() != Some(&first.stdout[..]) {
            failures.push(name.to_string());
        }
    }
    assert!(failures.is_empty(), "reports differ from golden files: {failures:?}");
}

#[test]
fn spec_parsing_examples() {
    let signed = nikwb(&["transport", "--lambda", "signed.json", "--mu", "mu.json"], None);
    let r = report(&signed);
    assert_eq!(signed.status.code(), Some(3));
    assert_eq!(r["input"]["lambda"]["atoms"][1][1], "-3/1");
    assert_eq!(r["error"]["kind"], "NotNonNegative");

    let zero = report(&nikwb(&["transport", "--lambda", "zero_atom.json", "--mu", "mu.json"], None));
    assert_eq!(zero["error"]["kind"], "ValidationError");

    let phi = report(&nikwb(&["classify", "--ideal", "phi_2n2.json", "--horizon", "3"], None));
    assert_eq!(phi["result"]["atoms"]["form"], "(div 1 (mul 2 (pow n 2)))");

    let broken = nikwb(&["classify", "--ideal", "{\"kind\": "], None);
    assert_eq!(broken.status.code(), Some(3));
    assert_eq!(report(&broken)["error"]["kind"], "ParseError");
}

#[test]
fn canonical_rationals_in_reports() {
    let out = report(&nikwb(&["transport", "--lambda", "uncanonical.json", "--mu", "mu.json", "--eps", "1/2"], None));
    assert_eq!(out["result"]["transport"]["parts"][0]["mass"], "1/2");
}

#[test]
fn reports_replay() {
    let dir = tempfile::tempdir().unwrap();
    for Case { name, args, exit } in cases() {
        if exit == 3 || args.iter().any(|a| a == "text") {
            continue;
        }
        let path = dir.path().join(format!("{name}.json"));
        let mut with_out: Vec<&str> = args.iter().map(String::as_str).collect();
        let p = path.to_str().unwrap();
        with_out.extend(["--out", p]);
        nikwb(&with_out, None);
        let replay = nikwb(&["replay", "--report", p], None);
        assert_eq!(replay.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&replay.stdout));
        assert_eq!(report(&replay)["result"]["identical"], true);
    }
}

#[test]
fn tampered_report_does_not_replay() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    nikwb(&["classify", "--ideal", "phi_n.json", "--horizon", "4", "--out", p.to_str().unwrap()], None);
    let mut r: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    r["result"]["verdict"] = "NotInAN".into();
    std::fs::write(&p, serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(nikwb(&["replay", "--report", p.to_str().unwrap()], None).status.code(), Some(1));
}

#[test]
fn inputs_from_stdin_and_inline() {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_nikwb"))
        .args(["classify", "--ideal", "-", "--horizon", "4"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(br#"{"kind": "phi", "f": "n"}"#).unwrap();
    let piped = child.wait_with_output().unwrap();
    let inline = nikwb(&["classify", "--ideal", r#"{"kind": "phi", "f": "n"}"#, "--horizon", "4"], None);
    assert_eq!(piped.stdout, inline.stdout);
    assert_eq!(report(&inline)["result"]["reason"], "UnboundedNorms");
}

#[test]
fn config_validation() {
    assert_eq!(nikwb(&["classify", "--ideal", "phi_n.json", "--horizon", "0"], None).status.code(), Some(3));
    assert_eq!(nikwb(&["classify", "--ideal", "phi_n.json", "--tolerance", "-1/2"], None).status.code(), Some(3));
}
