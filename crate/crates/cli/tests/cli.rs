//! End-to-end checks of the command-line binary: exit codes, artifact
//! layout, and snapshot round-tripping.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

use degensim::output::read_snapshot;
use degensim_core::Grid;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_degensim"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("degensim-cli-{name}"));
    fs::remove_dir_all(&dir).ok();
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn pme_run_produces_artifacts_and_roundtrips() {
    let dir = tmp_dir("pme-run");
    let out = dir.join("out");
    let status = bin()
        .args([
            "run",
            "--preset",
            "pme-barenblatt",
            "--grid",
            "16x16",
            "--tol",
            "1e-5",
            "--t-end",
            "0.3",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("manifest.toml").exists());
    assert!(out.join("trace.csv").exists());
    assert!(out.join("observables.csv").exists());

    let snapshot = out.join("snapshot-t0_3.csv");
    assert!(snapshot.exists(), "missing {}", snapshot.display());
    let grid = Grid::square(16, 1.0).unwrap();
    let fields = read_snapshot(&snapshot, grid).unwrap();
    assert_eq!(fields.len(), 1);
    assert_eq!(fields[0].0, "u");
    assert!(fields[0].1.values().iter().any(|&v| v > 0.0));

    // re-running the same config reproduces identical CSVs
    let out2 = dir.join("out2");
    let status = bin()
        .args([
            "run",
            "--preset",
            "pme-barenblatt",
            "--grid",
            "16x16",
            "--tol",
            "1e-5",
            "--t-end",
            "0.3",
            "--out",
            out2.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let a = fs::read_to_string(&snapshot).unwrap();
    let b = fs::read_to_string(out2.join("snapshot-t0_3.csv")).unwrap();
    assert_eq!(a, b);
    let ta = fs::read_to_string(out.join("trace.csv")).unwrap();
    let tb = fs::read_to_string(out2.join("trace.csv")).unwrap();
    assert_eq!(ta, tb);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_eps_is_a_config_error_without_artifacts() {
    let dir = tmp_dir("bad-eps");
    let out = dir.join("out");
    let output = bin()
        .args([
            "run",
            "--preset",
            "pme-barenblatt",
            "--eps",
            "1.5",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!out.exists());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("epsilon"), "stderr: {stderr}");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_preset_is_a_config_error() {
    let output = bin()
        .args(["run", "--preset", "does-not-exist"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn config_file_with_cli_override() {
    let dir = tmp_dir("config-file");
    let cfg_path = dir.join("run.toml");
    fs::write(
        &cfg_path,
        "preset = \"pme-barenblatt\"\ngrid = \"16x16\"\ntol = 1e-4\nt_end = 0.2\n",
    )
    .unwrap();
    let out = dir.join("out");
    let status = bin()
        .args([
            "run",
            "--config",
            cfg_path.to_str().unwrap(),
            "--t-end",
            "0.15",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("t_end = 0.15"), "{manifest}");
    assert!(manifest.contains("preset = \"pme-barenblatt\""));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn vtk_flag_writes_vtk_snapshots() {
    let dir = tmp_dir("vtk");
    let out = dir.join("out");
    let status = bin()
        .args([
            "run",
            "--preset",
            "pme-barenblatt",
            "--grid",
            "8x8",
            "--tol",
            "1e-4",
            "--t-end",
            "0.15",
            "--vtk",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("snapshot-t0_15-u.vtk").exists());
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn malformed_config_file_is_a_config_error() {
    let dir = tmp_dir("bad-toml");
    let cfg_path = dir.join("broken.toml");
    fs::write(&cfg_path, "preset = [this is not toml").unwrap();
    let output = bin()
        .args(["run", "--config", cfg_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn converge_eps_writes_table(){
    let dir = tmp_dir("eps-table");
    let out = dir.join("out");
    let status = bin()
        .args([
            "converge-eps",
            "--preset",
            "pme-barenblatt",
            "--grid",
            "16x16",
            "--tol",
            "1e-5",
            "--t-end",
            "0.3",
            "--eps-value", "1e-2",
            "--eps-value", "1e-3",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let table = fs::read_to_string(out.join("eps-convergence.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "eps,error_u,error_c");
    assert_eq!(lines.len(), 3);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn artifacts_match_manifest_reproduction() {
    // re-running from the echoed manifest config reproduces the run
    let dir = tmp_dir("manifest-repro");
    let out = dir.join("out");
    let status = bin()
        .args([
            "run",
            "--preset",
            "pme-barenblatt",
            "--grid",
            "8x8",
            "--tol",
            "1e-4",
            "--t-end",
            "0.2",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    // extract the [config] table from the manifest into a standalone file
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    let config_part = manifest.split("[config]").nth(1).unwrap();
    let out2 = dir.join("out2");
    let cfg2 = dir.join("repro.toml");
    let rewritten = config_part.replace(
        &format!("out = {:?}", out.to_str().unwrap()),
        &format!("out = {:?}", out2.to_str().unwrap()),
    );
    fs::write(&cfg2, rewritten).unwrap();
    let status = bin()
        .args(["run", "--config", cfg2.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let a = fs::read_to_string(out.join("snapshot-t0_2.csv")).unwrap();
    let b = fs::read_to_string(out2.join("snapshot-t0_2.csv")).unwrap();
    assert_eq!(a, b);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn help_lists_all_subcommands() {
    let output = bin().arg("--help").output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    for sub in ["run", "converge-grid", "converge-eps", "barenblatt", "qs-sweep"] {
        assert!(text.contains(sub), "missing subcommand {sub} in help");
    }
}
