use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use irstrack_cli::RunConfig;

const SMALL: &str = r#"
seed = 3

[scenario]
q = 10

[codebook]
m = 9

[design]
grid_g = 8
max_iter = 4

[beam_pattern]
points = 41
"#;

fn irstrack(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_irstrack"));
    cmd.args(args).arg("--out").arg(out).env("RUST_LOG", "error");
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn unknown_key_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[codebook]\nm = 9\nbogus = 1\n");
    let out = irstrack(&["beam-pattern"], Some(&cfg), &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn invalid_values_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[scenario]\nq = 0\n");
    assert_eq!(irstrack(&["beam-pattern"], Some(&cfg), &dir.path().join("a")).status.code(), Some(2));
    let out = irstrack(&["campaign", "--scheme", "nonsense"], None, &dir.path().join("b"));
    assert_eq!(out.status.code(), Some(2));
    let out = irstrack(&["campaign", "--threads", "0"], None, &dir.path().join("c"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn iteration_cap_exits_with_not_converged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = irstrack(&["design-codebook"], Some(&cfg), &out_dir);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("shape_optimized_m9.txt").exists());
    assert!(out_dir.join("design_report_m9.json").exists());
}

#[test]
fn unwritable_output_exits_with_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = irstrack(&["beam-pattern"], Some(&cfg), &blocker.join("out"));
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn outputs_carry_manifest_and_rerun_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let run = irstrack(&["beam-pattern"], Some(&cfg), out);
        assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    }
    let name = "beam_pattern_optimized_m9.csv";
    let text = fs::read_to_string(a.join(name)).unwrap();
    assert_eq!(text, fs::read_to_string(b.join(name)).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# tool irstrack "));
    assert_eq!(lines[1], "# command beam-pattern");
    assert!(lines[2].starts_with("# config_sha256 ") && lines[2].len() == "# config_sha256 ".len() + 64);
    assert_eq!(lines[3], "# seed 3");
    assert_eq!(lines.len(), 4 + 1 + 41);

    // the resolved config reproduces the run
    let resolved = fs::read_to_string(a.join("config.resolved.toml")).unwrap();
    let parsed = RunConfig::from_toml(&resolved).unwrap();
    assert_eq!(parsed, RunConfig::from_toml(SMALL).unwrap());
}

#[test]
fn environment_and_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let run = Command::new(env!("CARGO_BIN_EXE_irstrack"))
        .args(["beam-pattern", "--seed", "11", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .env("IRSTRACK_BEAM_PATTERN__POINTS", "21")
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let text = fs::read_to_string(out_dir.join("beam_pattern_quadratic_m9.csv")).unwrap();
    assert!(text.contains("# seed 11\n"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 21);
}
