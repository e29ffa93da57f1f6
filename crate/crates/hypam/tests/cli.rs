use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hypam-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn hypam(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hypam"));
    cmd.args(args).env_remove("HYPAM_OUT");
    if let Some(dir) = out {
        cmd.arg("--out").arg(dir);
    }
    cmd.output().unwrap()
}

fn summary(dir: &Path, command: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(command).join("summary.json")).unwrap())
        .unwrap()
}

#[test]
fn chi_in_one_dimension_passes() {
    let dir = scratch("chi");
    let out = hypam(&["chi", "--d", "1", "--gamma", "2", "--R", "6"], Some(&dir));
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(&dir, "chi");
    assert_eq!(s["status"], "pass");
    assert!((s["metrics"]["value"].as_f64().unwrap() - 1.0).abs() < 0.02);
    assert!(dir.join("chi/run.log").exists());
}

#[test]
fn constant_moment_is_eight() {
    let dir = scratch("moments");
    let args = [
        "moments",
        "--profile",
        "constant",
        "--p",
        "2",
        "--t",
        "2",
        "--paths",
        "100",
    ];
    let out = hypam(&args, Some(&dir));
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&dir, "moments");
    assert_eq!(s["status"], "pass");
    assert!((s["metrics"]["log_moment"].as_f64().unwrap() - 8.0).abs() < 1e-3);
}

#[test]
fn usage_errors_exit_nonzero() {
    let dir = scratch("usage");
    for args in [
        &["no-such-command"][..],
        &["chi", "--bogus", "1"],
        &["chi", "--d", "one"],
        &["moments", "--profile", "cubic"],
        &[],
    ] {
        let out = hypam(args, Some(&dir));
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn failed_check_exits_one() {
    let dir = scratch("fail");
    // a ball of radius 1 is far too small for the χ optimizer to reach the closed form
    let out = hypam(&["chi", "--R", "1", "--nodes", "100"], Some(&dir));
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(summary(&dir, "chi")["status"], "fail");
}

#[test]
fn flags_override_config_file() {
    let dir = scratch("config");
    let file = dir.join("chi.json");
    fs::write(
        &file,
        r#"{"command": "chi", "seed": 7, "params": {"gamma": 8, "nodes": 120}}"#,
    )
    .unwrap();
    let out = hypam(
        &["--config", file.to_str().unwrap(), "chi", "--gamma", "2"],
        Some(&dir),
    );
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&dir, "chi");
    assert_eq!(s["seed"], 7);
    assert_eq!(s["params"]["gamma"], 2.0);
    assert_eq!(s["params"]["nodes"], 120);
    // the command may also come from the file alone
    let out = hypam(
        &["--config", file.to_str().unwrap(), "--seed", "9"],
        Some(&dir),
    );
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&dir, "chi");
    assert_eq!(
        (s["seed"].clone(), s["params"]["gamma"].clone()),
        (9.into(), 8.0.into())
    );
    // and a mismatched subcommand is refused
    let out = hypam(
        &["--config", file.to_str().unwrap(), "legendre"],
        Some(&dir),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn print_config_round_trips() {
    let out = hypam(&["chi", "--d", "3", "--seed", "4", "--print-config"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let dir = scratch("print");
    let file = dir.join("c.json");
    fs::write(&file, &text).unwrap();
    let again = hypam(
        &["--config", file.to_str().unwrap(), "--print-config"],
        None,
    );
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn output_root_from_environment() {
    let dir = scratch("env");
    let out = Command::new(env!("CARGO_BIN_EXE_hypam"))
        .args(["geometry-flattening", "--pairs", "3"])
        .env("HYPAM_OUT", &dir)
        .output()
        .unwrap();
    assert!(out.status.success() || out.status.code() == Some(1));
    assert!(dir.join("geometry-flattening/summary.json").exists());
    assert!(dir.join("geometry-flattening/residuals.csv").exists());
}

#[test]
fn every_row_carries_the_hash_and_reruns_are_identical() {
    let dir = scratch("hash");
    let args = [
        "exit-fit",
        "--paths",
        "500",
        "--particles",
        "100",
        "--sv-duration",
        "2",
        "--t-lo",
        "1",
        "--t-hi",
        "2",
    ];
    hypam(&args, Some(&dir));
    let hash = summary(&dir, "exit-fit")["settings_hash"]
        .as_str()
        .unwrap()
        .to_string();
    assert_eq!(hash.len(), 16);
    let first: Vec<(String, Vec<u8>)> = csvs(&dir.join("exit-fit"));
    assert!(!first.is_empty());
    for (name, bytes) in &first {
        let text = String::from_utf8(bytes.clone()).unwrap();
        let mut lines = text.lines();
        assert!(
            lines.next().unwrap().starts_with("settings_hash,"),
            "{name}"
        );
        for line in lines {
            assert!(line.starts_with(&format!("{hash},")), "{name}: {line}");
        }
    }
    let again = scratch("hash-again");
    let mut args2 = args.to_vec();
    args2.extend(["--workers", "3"]);
    hypam(&args2, Some(&again));
    assert_eq!(first, csvs(&again.join("exit-fit")));
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}
