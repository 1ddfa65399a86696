//! End-to-end runs of the `pairshot` binary: the gen-synth / train / eval /
//! report lifecycle, flag handling, and the per-error-family exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn pairshot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pairshot"))
        .args(args)
        .env_remove("PAIRSHOT_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

/// Tiny but satisfiable synthetic corpus flags (shared by most tests).
fn small_synth_flags(dir: &Path, sigma: &str, tau: &str) -> Vec<String> {
    vec![
        "--out".into(),
        dir.display().to_string(),
        "--sigma".into(),
        sigma.into(),
        "--tau".into(),
        tau.into(),
        "--seed".into(),
        "3".into(),
    ]
}

#[test]
fn gen_synth_writes_the_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let flags = small_synth_flags(dir.path(), "0.2", "0.3");
    let args: Vec<&str> = std::iter::once("gen-synth")
        .chain(flags.iter().map(String::as_str))
        .collect();
    let out = pairshot(&args);
    assert_exit(&out, 0);
    for name in [
        "manifest.txt",
        "background_train.fsa",
        "background_train_images.idx",
        "background_train_labels.idx",
        "background_validation.fsa",
        "one_shot_test.fsa",
        "one_shot_test_images.idx",
        "one_shot_test_labels.idx",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn noiseless_dtw_eval_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().display().to_string();
    // Oracle regime: zero noise and zero speaker offsets.
    let out = pairshot(&[
        "eval",
        "--model",
        "dtw-pixels",
        "--task",
        "cross-modal",
        "--episodes",
        "20",
        "--queries",
        "5",
        "--seeds",
        "2",
        "--sigma",
        "0",
        "--tau",
        "0",
        "--out",
        &out_dir,
    ]);
    assert_exit(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("100.00% ± 0.00%"), "{stdout}");

    let csv = std::fs::read_to_string(dir.path().join("results_cross-modal_dtw-pixels.csv"))
        .unwrap();
    assert!(csv.contains("cross-modal,dtw-pixels,11,1,2,20,1.000000,0.000000,0.000"), "{csv}");
}

#[test]
fn speaker_invariance_flag_switches_the_sampler() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().display().to_string();
    let out = pairshot(&[
        "eval",
        "--model",
        "dtw-pixels",
        "--task",
        "speaker-invariance",
        "--episodes",
        "10",
        "--seeds",
        "1",
        "--sigma",
        "0.2",
        "--tau",
        "0.5",
        "--out",
        &out_dir,
    ]);
    assert_exit(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("task=speaker-invariance"), "{stdout}");
    // The construction pins one query per adversarial episode by default.
    assert!(stdout.contains("queries=1"), "{stdout}");
}

#[test]
fn train_then_eval_round_trips_checkpoints() {
    let data_dir = tempfile::tempdir().unwrap();
    let run_dir = tempfile::tempdir().unwrap();
    let data = data_dir.path().display().to_string();
    let run = run_dir.path().display().to_string();

    // Nearly separable data so a short training run performs well.
    let mut gen: Vec<String> = vec!["gen-synth".into()];
    gen.extend(small_synth_flags(data_dir.path(), "0.1", "0.1"));
    let gen_args: Vec<&str> = gen.iter().map(String::as_str).collect();
    assert_exit(&pairshot(&gen_args), 0);

    let out = pairshot(&[
        "train",
        "--model",
        "siamese-online",
        "--data",
        &data,
        "--out",
        &run,
        "--epochs",
        "10",
        "--p",
        "8",
        "--k",
        "4",
        "--seed",
        "1",
    ]);
    assert_exit(&out, 0);
    let log_path = run_dir.path().join("siamese-online_seed1_train.log");
    let log = std::fs::read_to_string(&log_path).unwrap();
    // Early stopping monitors background one-shot accuracy; on separable
    // data the final validation accuracy clears 0.9.
    let last_val: f64 = log
        .lines()
        .rfind(|l| l.contains("net=speech"))
        .and_then(|l| {
            l.split_whitespace()
                .find_map(|f| f.strip_prefix("val_oneshot_acc="))
        })
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!(last_val > 0.9, "validation accuracy {last_val} in\n{log}");

    let out = pairshot(&[
        "eval",
        "--model",
        "siamese-online",
        "--task",
        "cross-modal",
        "--data",
        &data,
        "--checkpoint",
        &run,
        "--out",
        &run,
        "--episodes",
        "20",
        "--queries",
        "5",
        "--seeds",
        "2",
        "--seed",
        "1",
    ]);
    assert_exit(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("siamese-online"), "{stdout}");

    // A mismatched architecture flag must fail the checkpoint digest check.
    let out = pairshot(&[
        "eval",
        "--model",
        "siamese-online",
        "--task",
        "cross-modal",
        "--data",
        &data,
        "--checkpoint",
        &run,
        "--out",
        &run,
        "--seed",
        "1",
        "--config",
        "/dev/null",
    ]);
    assert_exit(&out, 0);

    let cfg_path = run_dir.path().join("bigger.cfg");
    std::fs::write(&cfg_path, "[experiment]\nhidden = 96\n").unwrap();
    let out = pairshot(&[
        "eval",
        "--model",
        "siamese-online",
        "--task",
        "cross-modal",
        "--data",
        &data,
        "--checkpoint",
        &run,
        "--out",
        &run,
        "--seed",
        "1",
        "--config",
        cfg_path.to_str().unwrap(),
    ]);
    assert_exit(&out, 3);
}

#[test]
fn neural_eval_without_checkpoint_is_a_config_error() {
    let out = pairshot(&["eval", "--model", "ffnn-classifier", "--episodes", "5"]);
    assert_exit(&out, 2);
}

#[test]
fn unknown_flags_and_bad_values_are_config_errors() {
    assert_exit(&pairshot(&["eval", "--bogus"]), 2);
    assert_exit(&pairshot(&["eval", "--model", "nonsense"]), 2);
    assert_exit(&pairshot(&["eval", "--episodes", "0"]), 2);
}

#[test]
fn corrupt_data_files_are_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut gen: Vec<String> = vec!["gen-synth".into()];
    gen.extend(small_synth_flags(dir.path(), "0.2", "0.3"));
    let gen_args: Vec<&str> = gen.iter().map(String::as_str).collect();
    assert_exit(&pairshot(&gen_args), 0);

    // Truncate the one-shot image container.
    let images = dir.path().join("one_shot_test_images.idx");
    let bytes = std::fs::read(&images).unwrap();
    std::fs::write(&images, &bytes[..bytes.len() / 2]).unwrap();

    let data = dir.path().display().to_string();
    let out = pairshot(&[
        "eval", "--model", "dtw-pixels", "--data", &data, "--episodes", "5",
    ]);
    assert_exit(&out, 3);
}

#[test]
fn leaked_classes_are_rejected_with_the_leakage_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut gen: Vec<String> = vec!["gen-synth".into()];
    gen.extend(small_synth_flags(dir.path(), "0.2", "0.3"));
    let gen_args: Vec<&str> = gen.iter().map(String::as_str).collect();
    assert_exit(&pairshot(&gen_args), 0);

    // Doctor the manifest so a background class collides with digit class 3.
    let manifest = dir.path().join("manifest.txt");
    let mut text = std::fs::read_to_string(&manifest).unwrap();
    text.push_str("class: id=3 name=leak image=40 family=background\n");
    std::fs::write(&manifest, text).unwrap();

    let data = dir.path().display().to_string();
    let out = pairshot(&[
        "eval", "--model", "dtw-pixels", "--data", &data, "--episodes", "5",
    ]);
    assert_exit(&out, 4);
}

#[test]
fn report_merges_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().display().to_string();
    for task in ["cross-modal", "unimodal-speech"] {
        let out = pairshot(&[
            "eval",
            "--model",
            "dtw-pixels",
            "--task",
            task,
            "--episodes",
            "10",
            "--queries",
            "4",
            "--seeds",
            "1",
            "--sigma",
            "0.3",
            "--tau",
            "0.4",
            "--out",
            &out_dir,
        ]);
        assert_exit(&out, 0);
    }
    let a = dir.path().join("results_cross-modal_dtw-pixels.csv");
    let b = dir.path().join("results_unimodal-speech_dtw-pixels.csv");
    let out = pairshot(&["report", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_exit(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("cross-modal"), "{stdout}");
    assert!(stdout.contains("unimodal-speech"), "{stdout}");
}

#[test]
fn data_dir_env_var_supplies_the_default() {
    let dir = tempfile::tempdir().unwrap();
    let mut gen: Vec<String> = vec!["gen-synth".into()];
    gen.extend(small_synth_flags(dir.path(), "0.2", "0.3"));
    let gen_args: Vec<&str> = gen.iter().map(String::as_str).collect();
    assert_exit(&pairshot(&gen_args), 0);

    // Point the env var at a directory with no manifest: the command must
    // fail, proving the variable was honored.
    let empty = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pairshot"))
        .args(["eval", "--model", "dtw-pixels", "--episodes", "5"])
        .env("PAIRSHOT_DATA_DIR", empty.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{out:?}");

    // And with the real dataset directory it succeeds.
    let out = Command::new(env!("CARGO_BIN_EXE_pairshot"))
        .args([
            "eval", "--model", "dtw-pixels", "--episodes", "5", "--queries", "2",
            "--seeds", "1",
        ])
        .env("PAIRSHOT_DATA_DIR", dir.path())
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}
