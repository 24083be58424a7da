use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn romstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_romstab")).args(args).output().expect("spawn romstab")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_is_byte_for_byte_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = romstab(&["run", "--preset", "burgers-small", "--out", path(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("Q_tuned"));
    }
    assert_eq!(fs::read(a.join("summary.json")).unwrap(), fs::read(b.join("summary.json")).unwrap());
    assert!(a.join("report/cost_vs_iter.csv").exists());
}

#[test]
fn stages_can_run_one_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let o = romstab(&["simulate", "--preset", "burgers-small", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    // later stages pick the configuration up from the run directory
    for cmd in ["pod", "rom", "tune"] {
        let o = romstab(&[cmd, "--out", out]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
    }
    let o = romstab(&["report", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "snapshots.csv",
        "basis.csv",
        "rom.json",
        "tuner_trace.csv",
        "summary.json",
        "report/error_tuned.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn failing_stage_exits_nonzero_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = {
        let o = romstab(&["simulate", "--preset", "burgers-small", "--out", path(&dir.path().join("seed"))]);
        assert!(o.status.success());
        serde_json::from_str(&fs::read_to_string(dir.path().join("seed/config.json")).unwrap()).unwrap()
    };
    cfg["pod"]["r"] = serde_json::json!(12);
    cfg["pod"]["stride"] = serde_json::json!(4000);
    let cfg_path = dir.path().join("bad.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out = dir.path().join("run");
    let o = romstab(&["run", "--config", path(&cfg_path), "--out", path(&out)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("stage `pod` failed"), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("MANIFEST.json")).unwrap()).unwrap();
    assert_eq!(manifest["failed_stage"], "pod");
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let seed = dir.path().join("seed");
    assert!(romstab(&["simulate", "--preset", "burgers-small", "--out", path(&seed)]).status.success());
    let mut cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(seed.join("config.json")).unwrap()).unwrap();
    cfg["mes"]["omega"] = serde_json::json!([10.0, 90.0]);
    let cfg_path = dir.path().join("bad.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    let o = romstab(&["run", "--config", path(&cfg_path), "--out", path(&dir.path().join("run"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("mes.omega"), "{}", stderr(&o));
}

#[test]
fn report_on_an_empty_directory_lists_missing_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = romstab(&["report", "--out", path(dir.path())]);
    assert!(!o.status.success());
    let err = stderr(&o);
    for f in ["tuner_trace.csv", "error_trace_nominal.csv", "error_trace_tuned.csv"] {
        assert!(err.contains(f), "{err}");
    }
}

#[test]
fn unknown_preset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = romstab(&["run", "--preset", "nope", "--out", path(dir.path())]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("burgers-small"));
}

#[test]
fn sweep_runs_every_entry() {
    let dir = tempfile::tempdir().unwrap();
    let entries = serde_json::json!([
        { "preset": "burgers-small", "out": dir.path().join("s1") },
        { "preset": "burgers-small", "seed": 3, "out": dir.path().join("s2") },
    ]);
    let sweep = dir.path().join("sweep.json");
    fs::write(&sweep, entries.to_string()).unwrap();
    let o = romstab(&["run", "--sweep", path(&sweep)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for run in ["s1", "s2"] {
        assert!(dir.path().join(run).join("summary.json").exists());
    }
    let cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s2/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["truth"]["seed"], 3);
}
