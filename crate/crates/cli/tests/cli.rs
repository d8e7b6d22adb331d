use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn convint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convint")).args(args).output().unwrap()
}

fn run_in(dir: &Path, sub: &str, cfg: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    convint(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn minimal_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "run", &config("minimal.toml"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).lines().any(|l| l.starts_with("PASS replay")));
    for name in ["report.json", "steps.csv", "m_final.wfld", "validation.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn config_errors_exit_two_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("minimal.toml")).unwrap();

    let missing = dir.path().join("noseed.toml");
    fs::write(&missing, text.replace("seed = 1", "")).unwrap();
    let out = run_in(dir.path(), "run", &missing, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, text.replace("margin", "x").replace("[iteration]", "[chi]\nmargin = 0.5\n\n[iteration]")).unwrap();
    let out = run_in(dir.path(), "run", &bad, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("chi.margin"));
}

#[test]
fn phases_run_independently_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("quick.toml");
    for (sub, extra) in [
        ("subsolution", vec![]),
        ("iterate", vec!["--steps", "1"]),
        ("admissibility", vec![]),
        ("report", vec![]),
        ("validate", vec![]),
    ] {
        let out = run_in(dir.path(), sub, &cfg, &extra);
        assert_eq!(out.status.code(), Some(0), "{sub}: {}", stdout(&out));
    }
    let resume = dir.path().join("m_step0001.wfld");
    let out = run_in(dir.path(), "iterate", &cfg, &["--steps", "1", "--resume", resume.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let csv = fs::read_to_string(dir.path().join("steps.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("step,deficit,gain,k_used,hint_margin_min,weak_drift,wall_time"));

    // the staged result equals a single two-step run
    let whole = tempfile::tempdir().unwrap();
    assert_eq!(run_in(whole.path(), "run", &cfg, &[]).status.code(), Some(0));
    for name in ["steps.csv", "m_final.wfld", "u_final.wfld"] {
        assert_eq!(
            fs::read(dir.path().join(name)).unwrap(),
            fs::read(whole.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn corrupted_dump_fails_validate_and_seed_override_changes_state() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config("quick.toml");
    assert_eq!(run_in(a.path(), "run", &cfg, &["--steps", "1"]).status.code(), Some(0));
    assert_eq!(run_in(b.path(), "run", &cfg, &["--steps", "1", "--seed", "99"]).status.code(), Some(0));
    let (ma, mb) = (fs::read(a.path().join("m_final.wfld")).unwrap(), fs::read(b.path().join("m_final.wfld")).unwrap());
    assert_ne!(ma, mb);

    // flip one momentum value well inside the data block
    let mut bytes = ma;
    let at = bytes.len() / 2 / 8 * 8;
    let v = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) + 0.5;
    bytes[at..at + 8].copy_from_slice(&v.to_le_bytes());
    fs::write(a.path().join("m_final.wfld"), bytes).unwrap();
    let out = run_in(a.path(), "validate", &cfg, &[]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("FAIL"));
}
