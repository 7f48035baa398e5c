//! End-to-end exercise of the `rffid` binary: every stage reads only the
//! files the previous stage wrote, outputs are byte-reproducible, and the
//! exit codes follow the documented contract.

use std::path::Path;
use std::process::{Command, Output};

fn rffid(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rffid"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn rffid")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = rffid(dir, args);
    assert!(
        out.status.success(),
        "rffid {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("read {name}: {e}"))
}

#[test]
fn full_stage_round_trip_reaches_perfect_accuracy_at_20_db() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();

    run_ok(
        dir,
        &[
            "--seed", "42", "--threads", "1", "generate",
            "--devices", "3", "--frames", "12", "--symbols", "64",
        ],
    );

    run_ok(
        dir,
        &[
            "--seed", "42", "--threads", "1", "degrade",
            "--manifest", "manifest.json", "--input", "clean.rfiq",
            "--snr-list", "0,5,10,15,20,25,30", "--role", "train",
            "--name", "train.rfiq",
        ],
    );
    run_ok(
        dir,
        &[
            "--seed", "42", "--threads", "1", "degrade",
            "--manifest", "manifest.json", "--input", "clean.rfiq",
            "--snr-list", "20", "--role", "test", "--name", "test.rfiq",
        ],
    );

    run_ok(
        dir,
        &[
            "--seed", "42", "--threads", "1", "extract",
            "--manifest", "manifest.json", "--input", "clean.rfiq",
            "--name", "train_features.csv",
        ],
    );
    run_ok(
        dir,
        &[
            "--seed", "42", "--threads", "1", "extract",
            "--manifest", "manifest.json", "--input", "test.rfiq",
            "--name", "test_features.csv",
        ],
    );

    run_ok(
        dir,
        &[
            "--seed", "42", "--threads", "1", "fit-energy",
            "--manifest", "manifest.json", "--input", "train.rfiq",
        ],
    );

    run_ok(
        dir,
        &[
            "--seed", "42", "--threads", "1", "train",
            "--features", "train_features.csv", "--fit", "energy_fit.txt",
        ],
    );

    let report = run_ok(
        dir,
        &[
            "--seed", "42", "--threads", "1", "evaluate",
            "--manifest", "manifest.json", "--model", "model.txt",
            "--features", "test_features.csv", "--anti-noise", "both",
        ],
    );

    // 3 clean-trained devices at 20 dB must separate perfectly
    assert!(
        report.contains("100.00"),
        "expected a perfect row in the report:\n{report}"
    );
    let on_disk = String::from_utf8(read(dir, "report.txt")).expect("utf8 report");
    assert_eq!(on_disk, report, "stdout and report.txt must match");
    assert!(dir.join("report.csv").exists());
}

#[test]
fn generate_is_byte_reproducible() {
    let a = tempfile::tempdir().expect("tempdir");
    let b = tempfile::tempdir().expect("tempdir");
    let args = [
        "--seed", "7", "--threads", "1", "generate",
        "--devices", "2", "--frames", "4", "--symbols", "16",
    ];
    run_ok(a.path(), &args);
    run_ok(b.path(), &args);

    assert_eq!(read(a.path(), "clean.rfiq"), read(b.path(), "clean.rfiq"));
    assert_eq!(
        read(a.path(), "manifest.json"),
        read(b.path(), "manifest.json")
    );
}

#[test]
fn train_and_test_roles_draw_independent_noise() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();
    run_ok(
        dir,
        &[
            "--seed", "11", "--threads", "1", "generate",
            "--devices", "2", "--frames", "2", "--symbols", "16",
        ],
    );
    for (role, name) in [("train", "as_train.rfiq"), ("test", "as_test.rfiq")] {
        run_ok(
            dir,
            &[
                "--seed", "11", "--threads", "1", "degrade",
                "--manifest", "manifest.json", "--input", "clean.rfiq",
                "--snr-list", "10", "--role", role, "--name", name,
            ],
        );
    }
    assert_ne!(
        read(dir, "as_train.rfiq"),
        read(dir, "as_test.rfiq"),
        "train and test noise must come from disjoint streams"
    );
}

#[test]
fn missing_input_exits_with_code_2() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let out = rffid(
        tmp.path(),
        &[
            "extract", "--manifest", "missing.json", "--input", "missing.rfiq",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty(), "expected an error message on stderr");
}

#[test]
fn unknown_scenario_exits_with_code_2() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let out = rffid(tmp.path(), &["reproduce", "fig99"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupt_recording_is_rejected() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();
    run_ok(
        dir,
        &[
            "--seed", "3", "--threads", "1", "generate",
            "--devices", "2", "--frames", "1", "--symbols", "8",
        ],
    );
    let mut bytes = read(dir, "clean.rfiq");
    bytes.truncate(bytes.len() - 7);
    std::fs::write(dir.join("clean.rfiq"), &bytes).expect("write truncated file");

    let out = rffid(
        dir,
        &[
            "extract", "--manifest", "manifest.json", "--input", "clean.rfiq",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("clean.rfiq"),
        "error should name the bad file: {stderr}"
    );
}
