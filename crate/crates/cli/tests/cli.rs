use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
[run]
h = "1/16"
dt = 0.005
t_final = 0.02
cadence = 2

[grid]
points_per_wavelength = 8
y_points = 32
eta_points = 32

[initial]
wave = "wkb_cosh"
density = "bump"
"#;

fn sle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sle"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn configs(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn validate_config_accepts_shipped_configs() {
    for name in [
        "example1.toml",
        "table1.toml",
        "example2.toml",
        "example3.toml",
        "ap_study.toml",
        "ode_crosscheck.toml",
    ] {
        let out = sle(&["validate-config", "--config", &configs(name)]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stdout).contains("configuration is valid"));
    }
}

#[test]
fn paper_exact_flag_swaps_in_the_larger_sweep() {
    let out = sle(&[
        "validate-config",
        "--config",
        &configs("table1.toml"),
        "--paper-exact",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("4096"));
}

#[test]
fn run_writes_csv_with_config_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out_dir = dir.path().join("out");
    let out = sle(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let text = fs::read_to_string(out_dir.join("observables.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# resolved configuration"));
    let body: Vec<&str> = lines.skip_while(|l| l.starts_with('#')).collect();
    assert!(text.contains("# h = "));
    let header = body[0];
    assert!(header.starts_with("t,"));
    // records at steps 0, 2, 4
    assert_eq!(body.len(), 1 + 3);
    for row in &body[1..] {
        for field in row.split(',') {
            let (mantissa, _) = field.split_once('e').expect("scientific notation");
            let digits = mantissa.chars().filter(|c| c.is_ascii_digit()).count();
            assert!(digits >= 15, "{field}");
            field.parse::<f64>().unwrap();
        }
    }
    let profiles: Vec<_> = fs::read_dir(&out_dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("profile_t"))
        .collect();
    assert_eq!(profiles.len(), 1);
}

#[test]
fn exit_codes_follow_error_category() {
    let dir = tempfile::tempdir().unwrap();

    let missing = dir.path().join("absent.toml");
    assert_eq!(
        sle(&["validate-config", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(5)
    );

    let broken = write(dir.path(), "broken.toml", "[run\nh = 1");
    assert_eq!(
        sle(&["validate-config", "--config", broken.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );

    let invalid = write(
        dir.path(),
        "invalid.toml",
        &SMALL.replace("h = \"1/16\"", "h = -1.0"),
    );
    let out = sle(&["validate-config", "--config", invalid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.h"));

    let unknown = write(
        dir.path(),
        "unknown.toml",
        &format!("{SMALL}\n[extra]\nx = 1\n"),
    );
    assert_eq!(
        sle(&["validate-config", "--config", unknown.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );

    assert_eq!(sle(&["run"]).status.code(), Some(2));
}

#[test]
fn strict_cfl_rejects_an_oversized_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fast.toml",
        &SMALL
            .replace("dt = 0.005", "dt = 0.05")
            .replace("t_final = 0.02", "t_final = 0.1"),
    );
    let out_dir = dir.path().join("out");
    let args = [
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ];
    assert_eq!(sle(&args).status.code(), Some(0));
    let mut strict = args.to_vec();
    strict.push("--strict-cfl");
    let out = sle(&strict);
    assert_eq!(out.status.code(), Some(7));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CFL"));
}
