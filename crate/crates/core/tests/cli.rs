//! The `lungdet` binary: subcommands, exit codes and error messages.

use std::process::{Command, Output};

use lungdet::synthetic::{fixture_specs, write_fixture};

fn lungdet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lungdet")).args(args).output().expect("spawn lungdet")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn help_lists_every_subcommand() {
    let out = lungdet(&["--help"]);
    assert!(out.status.success());
    let help = text(&out.stdout);
    for cmd in ["preprocess", "infer", "eval", "bench", "selftest"] {
        assert!(help.contains(cmd), "{cmd} missing from:\n{help}");
    }
}

#[test]
fn selftest_passes_and_catches_a_perturbation() {
    let ok = lungdet(&["selftest"]);
    assert!(ok.status.success(), "{}", text(&ok.stdout));
    assert!(!text(&ok.stdout).contains("FAIL"));

    let bad = lungdet(&["selftest", "--perturb", "iou"]);
    assert!(!bad.status.success());
    let table = text(&bad.stdout);
    let failing: Vec<&str> = table.lines().filter(|l| l.contains("FAIL")).collect();
    assert_eq!(failing.len(), 1, "{table}");
    assert!(failing[0].starts_with("iou"));
}

#[test]
fn preprocess_then_eval_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = write_fixture(tmp.path(), &fixture_specs(), 0).unwrap();
    let out_dir = tmp.path().join("out");
    let out = out_dir.to_str().unwrap();
    let pre = lungdet(&[
        "preprocess",
        "--scans-dir",
        fx.scans_dir.to_str().unwrap(),
        "--annotations",
        fx.annotations.to_str().unwrap(),
        "--output-dir",
        out,
    ]);
    assert!(pre.status.success(), "{}", text(&pre.stderr));
    assert!(text(&pre.stdout).contains("slices 14"));

    std::fs::write(out_dir.join("results.json"), "[]\n").unwrap();
    let ev = lungdet(&["eval", "--output-dir", out, "--area-cuts", "60", "160"]);
    assert!(ev.status.success(), "{}", text(&ev.stderr));
    assert!(text(&ev.stdout).contains("mAP 0.000"));
    assert!(out_dir.join("eval.json").is_file());
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let out = lungdet(&[
        "preprocess",
        "--scans-dir",
        missing.to_str().unwrap(),
        "--annotations",
        missing.to_str().unwrap(),
        "--output-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("scans_dir"), "{}", text(&out.stderr));

    let bad = tmp.path().join("bad.ntar");
    std::fs::write(&bad, b"not an archive").unwrap();
    let out = lungdet(&["bench", "--weights", bad.to_str().unwrap(), "--img-size", "64"]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("NTAR1"), "{}", text(&out.stderr));
}
