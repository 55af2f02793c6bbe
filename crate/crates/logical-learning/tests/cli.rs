//! End-to-end tests of the `loglearn` binary: exit-code contract, run
//! artifacts, self-describing re-evaluation, checkpoint corruption, and
//! the report command. Everything here runs on tiny synthetic IDX data so
//! the whole file finishes in seconds.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use logical_learning::data::{write_idx_images, write_idx_labels, Split, IMAGE_PIXELS};

const BIN: &str = env!("CARGO_BIN_EXE_loglearn");

fn loglearn(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("loglearn binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_exit(out: &Output, code: i32, context: &str) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "{context}: expected exit {code}\nstdout:\n{}\nstderr:\n{}",
        stdout_of(out),
        stderr_of(out)
    );
}

/// Tiny deterministic MNIST substitute: each image is a solid block whose
/// position encodes the label, so even a few training steps move the loss.
fn write_synthetic_mnist(dir: &Path, train: usize, test: usize) {
    for (split, count) in [(Split::Train, train), (Split::Test, test)] {
        let images: Vec<[u8; IMAGE_PIXELS]> = (0..count)
            .map(|i| {
                let label = i % 10;
                let mut img = [0u8; IMAGE_PIXELS];
                for p in 0..70 {
                    img[label * 70 + p] = 220;
                }
                img
            })
            .collect();
        let labels: Vec<u8> = (0..count).map(|i| (i % 10) as u8).collect();
        let (image_name, label_name) = split.file_names();
        fs::write(dir.join(image_name), write_idx_images(&images)).unwrap();
        fs::write(dir.join(label_name), write_idx_labels(&labels)).unwrap();
    }
}

#[test]
fn help_and_version_exit_zero() {
    let help = loglearn(&["--help"]);
    assert_exit(&help, 0, "--help");
    let text = stdout_of(&help);
    for verb in ["train", "evaluate", "run", "report", "gradcheck", "selftest"] {
        assert!(text.contains(verb), "--help lists the `{verb}` verb");
    }
    assert_exit(&loglearn(&["--version"]), 0, "--version");
}

#[test]
fn usage_errors_exit_one() {
    let temp = tempfile::tempdir().unwrap();

    assert_exit(&loglearn(&["frobnicate"]), 1, "unknown subcommand");
    assert_exit(&loglearn(&["run"]), 1, "run without --case or --config");
    assert_exit(
        &loglearn(&["run", "--case", "nonsense"]),
        1,
        "unknown case id",
    );
    // A config path that cannot be read is an I/O problem, not a usage
    // problem, and lands in the data-error exit code.
    assert_exit(
        &loglearn(&["run", "--config", "does-not-exist.cfg"]),
        2,
        "missing config file",
    );

    let bad = temp.path().join("bad.cfg");
    fs::write(&bad, "case = 11\nfrobnication = 9\n").unwrap();
    let out = loglearn(&["run", "--config", bad.to_str().unwrap()]);
    assert_exit(&out, 1, "config with unknown key");
    assert!(
        stderr_of(&out).contains("frobnication"),
        "error names the offending key"
    );

    let bad_sampling = temp.path().join("sampling.cfg");
    fs::write(&bad_sampling, "case = 11\nsampling = matched:1.5\n").unwrap();
    assert_exit(
        &loglearn(&["run", "--config", bad_sampling.to_str().unwrap()]),
        1,
        "matched probability outside (0,1)",
    );
}

#[test]
fn missing_data_exits_two() {
    let temp = tempfile::tempdir().unwrap();
    let out = loglearn(&[
        "train",
        "--case",
        "11",
        "--steps",
        "2",
        "--data-dir",
        temp.path().to_str().unwrap(),
        "--out-dir",
        temp.path().join("out").to_str().unwrap(),
    ]);
    assert_exit(&out, 2, "training without data files");
}

#[test]
fn run_bundle_is_self_describing_and_detects_corruption() {
    let temp = tempfile::tempdir().unwrap();
    let data_dir = temp.path().join("data");
    fs::create_dir(&data_dir).unwrap();
    write_synthetic_mnist(&data_dir, 40, 10);
    let out_dir = temp.path().join("run-11");

    let run = loglearn(&[
        "run",
        "--case",
        "11",
        "--steps",
        "4",
        "--seed",
        "7",
        "--data-dir",
        data_dir.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&run, 0, "run on synthetic data");

    for artifact in [
        "checkpoint.bin",
        "config.txt",
        "train_log.csv",
        "metrics.txt",
        "verdicts.csv",
    ] {
        assert!(
            out_dir.join(artifact).is_file(),
            "run writes {artifact}"
        );
    }

    let metrics_before = fs::read(out_dir.join("metrics.txt")).unwrap();
    let config_path = out_dir.join("config.txt");

    // Re-evaluating from nothing but the echoed config must reproduce the
    // metrics file byte for byte.
    let eval = loglearn(&["evaluate", "--config", config_path.to_str().unwrap()]);
    assert_exit(&eval, 0, "evaluate from echoed config");
    let metrics_after = fs::read(out_dir.join("metrics.txt")).unwrap();
    assert_eq!(
        metrics_before, metrics_after,
        "evaluate reproduces metrics.txt bit-exactly"
    );

    let report = loglearn(&["report", out_dir.to_str().unwrap()]);
    assert_exit(&report, 0, "report over the finished run");
    let table = stdout_of(&report);
    assert!(table.contains("logical pass"), "report prints the table header");
    assert!(table.contains("11"), "report lists the case row");

    // Flipping one checkpoint byte must be caught by the checksum and
    // surface as a data error (exit 2), never as silently wrong numbers.
    let ckpt_path = out_dir.join("checkpoint.bin");
    let mut bytes = fs::read(&ckpt_path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x5a;
    fs::write(&ckpt_path, &bytes).unwrap();
    let corrupted = loglearn(&["evaluate", "--config", config_path.to_str().unwrap()]);
    assert_exit(&corrupted, 2, "evaluate with corrupted checkpoint");
}

#[test]
fn report_without_results_exits_two() {
    let temp = tempfile::tempdir().unwrap();
    let out = loglearn(&["report", temp.path().to_str().unwrap()]);
    assert_exit(&out, 2, "report over a directory with no metrics.txt");
}

#[test]
fn selftest_passes_quickly() {
    let out = loglearn(&["selftest", "--trials", "200", "--seed", "3"]);
    assert_exit(&out, 0, "selftest");
    let text = stdout_of(&out);
    assert!(
        text.contains("selftest") || text.contains("mismatch"),
        "selftest reports its outcome: {text}"
    );
}
