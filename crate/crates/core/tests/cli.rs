use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_tbb-cgh");

const SMALL: &str = "\
grid_n = 512
h_max = 3
modes = 1:1
plain_gratings = 0.5
astig_sweep = 2, 4
";

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path
}

fn run(dir: &Path, cfg: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn bad_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "colour = red\n");
    let (code, err) = run(dir.path(), &cfg, &["mask"]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("line 6"), "{err}");

    let cfg = write_config(dir.path(), "grid_n = 1000\n");
    assert_eq!(run(dir.path(), &cfg, &["mask"]).0, 2);

    let cfg = write_config(dir.path(), "");
    let out = Command::new(BIN)
        .arg("--config")
        .arg(&cfg)
        .arg("frobnicate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("absent.cfg");
    assert_eq!(run(dir.path(), &missing, &["mask"]).0, 2);
}

#[test]
fn empty_mode_list_cannot_make_masks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "grid_n = 512\nmodes =\n").unwrap();
    assert_eq!(run(dir.path(), &path, &["mask"]).0, 2);
}

#[test]
fn analyze_without_simulation_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let (code, err) = run(dir.path(), &cfg, &["analyze"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn full_run_is_reproducible_and_guarded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let (code, err) = run(dir.path(), &cfg, &["all"]);
    assert_eq!(code, 0, "{err}");
    let out = dir.path().join("out");
    for f in [
        "masks/p1_l1.pgm",
        "masks/p1_l1.meta",
        "masks/grating_ad0.50.pgm",
        "simulate/p1_l1_h1.cfld",
        "simulate/p1_l1_orders.csv",
        "simulate/comparison.csv",
        "astig/selection.csv",
        "reports/orders.csv",
        "reports/verdict.txt",
        "reports/gratings.csv",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let first = tree(&out);

    let (code, err) = run(dir.path(), &cfg, &["mask"]);
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("--force"), "{err}");
    assert_eq!(tree(&out), first);

    let (code, err) = run(dir.path(), &cfg, &["--force", "all"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(tree(&out), first);
}

#[test]
fn failed_expectations_exit_with_four_only_on_request() {
    // With only p = 0 references the p = 1 odd orders cannot be matched.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "max_p = 0\n");
    assert_eq!(run(dir.path(), &cfg, &["all"]).0, 0);
    let cfg = write_config(dir.path(), "max_p = 0\nrequire_even_odd = true\n");
    let (code, err) = run(dir.path(), &cfg, &["--force", "analyze"]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn config_verb_prints_effective_settings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = Command::new(BIN)
        .arg("--config")
        .arg(&cfg)
        .arg("config")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("grid_n = 512"));
    assert!(text.contains("modes = 1:1"));
    assert!(text.contains("energy_ev = 200000"));
}
