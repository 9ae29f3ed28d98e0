use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
[experiment]
seed = 4
sequences = 2
frames_per_sequence = 3
waveforms = ["otfs", "ofdm"]

[sensing]
target_snr_db = [5.0, 15.0]

[optimizer]
max_evals = 1500

[tradeoff]
betas = [0.0, 1.0]
clutter_ranges_db = [[-15.0, 10.0]]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isac-shield"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_to(dir: &Path, sub: &str, cfg: &Path, name: &str, extra: &[&str]) -> String {
    let out = dir.join(name);
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args);
    std::fs::read_to_string(out).unwrap()
}

#[test]
fn every_subcommand_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for (sub, first_column) in [
        ("detection-sweep", "snr_db"),
        ("case-study", "record"),
        ("tradeoff-sweep", "clutter_db"),
        ("eve-compare", "eve_mode"),
    ] {
        let text = run_to(dir.path(), sub, &cfg, &format!("{sub}.csv"), &[]);
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert!(header.starts_with(first_column), "{sub}: {header}");
        assert!(text.lines().filter(|l| !l.starts_with('#')).count() > 1, "{sub} has no rows");
        assert!(text.contains("# seed: 4"), "{sub} lacks seed metadata");
    }
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = run_to(dir.path(), "detection-sweep", &cfg, "a.csv", &["--threads", "1"]);
    let b = run_to(dir.path(), "detection-sweep", &cfg, "b.csv", &["--threads", "3"]);
    assert_eq!(a, b);
}

#[test]
fn seed_and_amortized_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let base = run_to(dir.path(), "tradeoff-sweep", &cfg, "base.csv", &[]);
    let reseeded = run_to(dir.path(), "tradeoff-sweep", &cfg, "seed.csv", &["--seed", "9"]);
    assert!(reseeded.contains("# seed: 9"));
    assert_ne!(base, reseeded);
    let amortized = run_to(dir.path(), "detection-sweep", &cfg, "amortized.csv", &["--amortized"]);
    assert!(amortized.contains("amortized"));
}

#[test]
fn json_output_parses_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let text = run_to(dir.path(), "case-study", &cfg, "cs.json", &["--format", "json"]);
    let trimmed = text.trim_start();
    assert!(trimmed.starts_with('{'));
    assert!(text.contains("\"columns\""));
    assert!(text.contains("\"rows\""));
}

#[test]
fn verify_passes() {
    let out = run(&["verify", "--seed", "2"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().count() >= 5);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
}

#[test]
fn bad_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nsubcarriers = 0\n");
    let out = dir.path().join("x.csv");
    let status = bin()
        .args(["detection-sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).starts_with("error:"));

    let typo = write_config(dir.path(), "[experiment]\nsequnces = 3\n");
    let status = bin()
        .args(["case-study", "--config", typo.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!status.status.success());

    let missing = bin().args(["tradeoff-sweep", "--config", "/nonexistent.toml", "--out", "x"]).output().unwrap();
    assert!(!missing.status.success());
}
