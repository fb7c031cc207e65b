//! End-to-end contract tests for the `lpp-lab` binary: artifact layout,
//! deterministic reruns, config validation errors, capacity errors, the
//! oracle selftest exit codes, and the reference-table check.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

const SMOKE_BUDGET_SECS: f64 = 60.0;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lpp-lab"))
}

fn smoke_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn run_to_dir(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary failed to start")
}

fn read_dir_bytes(dir: &Path, skip_timing: bool) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if skip_timing && name == "timing.json" {
            continue;
        }
        files.insert(name, std::fs::read(&path).unwrap());
    }
    files
}

#[test]
fn smoke_run_is_fast_deterministic_and_tagged() {
    let out1 = tempfile::tempdir().unwrap();
    let out2 = tempfile::tempdir().unwrap();

    let t0 = Instant::now();
    let o1 = run_to_dir(&smoke_config(), out1.path(), &[]);
    let secs = t0.elapsed().as_secs_f64();
    assert!(o1.status.success(), "smoke run failed: {o1:?}");
    assert!(
        secs < SMOKE_BUDGET_SECS,
        "smoke config took {secs:.1}s, budget {SMOKE_BUDGET_SECS}s"
    );

    let o2 = run_to_dir(&smoke_config(), out2.path(), &[]);
    assert!(o2.status.success());

    let files1 = read_dir_bytes(out1.path(), true);
    let files2 = read_dir_bytes(out2.path(), true);
    assert_eq!(
        files1, files2,
        "rerun artifacts differ (timing.json excluded)"
    );

    // Inventory: one estimates CSV per experiment, a summary, and timing.
    assert!(files1.contains_key("summary.json"));
    assert!(read_dir_bytes(out1.path(), false).contains_key("timing.json"));
    let estimates = files1.keys().filter(|k| k.ends_with("_estimates.csv"));
    assert_eq!(estimates.count(), 10, "expected one estimates CSV per kind");
    assert!(files1.keys().any(|k| k.ends_with("_curves.csv")));
    assert!(files1.keys().any(|k| k.ends_with(".svg")));

    // Every artifact embeds the config hash; CSVs and the summary also
    // embed the master seed.
    let summary: serde_json::Value =
        serde_json::from_slice(&files1["summary.json"]).expect("summary.json parses");
    let sha = summary["config_sha256"].as_str().expect("hash present");
    assert_eq!(sha.len(), 64);
    for (name, bytes) in read_dir_bytes(out1.path(), false) {
        let text = String::from_utf8_lossy(&bytes).into_owned();
        assert!(text.contains(sha), "{name} missing config hash");
        if name.ends_with(".csv") {
            assert!(text.contains("master_seed"), "{name} missing seed line");
        }
    }
    assert!(summary["experiments"].as_array().map_or(0, |a| a.len()) == 10);
}

#[test]
fn seed_override_replaces_every_master_seed() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("tiny.toml");
    std::fs::write(
        &cfg,
        "[[experiment]]\nname = \"tiny\"\nkind = \"midpoint\"\nn_list = [8]\n\
         trials = 5\nmaster_seed = 1\n",
    )
    .unwrap();
    let o = run_to_dir(&cfg, out.path(), &["--seed-override", "777"]);
    assert!(o.status.success(), "run failed: {o:?}");
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiments"][0]["master_seed"], 777);
}

#[test]
fn misspelled_trials_key_is_named_in_the_error() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "[[experiment]]\nname = \"x\"\nkind = \"midpoint\"\nn_list = [8]\n\
         trails = 5\nmaster_seed = 1\n",
    )
    .unwrap();
    let o = run_to_dir(&cfg, out.path(), &[]);
    assert!(!o.status.success(), "misspelled key must fail the run");
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("trails"), "error must name the bad key: {err}");
}

#[test]
fn unknown_top_level_key_is_named() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "memory_budget_cels = 10\n[[experiment]]\nname = \"x\"\nkind = \"midpoint\"\n\
         n_list = [8]\ntrials = 5\nmaster_seed = 1\n",
    )
    .unwrap();
    let o = run_to_dir(&cfg, out.path(), &[]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("memory_budget_cels"), "stderr: {err}");
}

#[test]
fn capacity_violation_names_the_limiting_parameter() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("big.toml");
    std::fs::write(
        &cfg,
        "[[experiment]]\nname = \"big\"\nkind = \"disjoint_tail\"\nn_list = [64]\n\
         trials = 2\nmaster_seed = 1\nwidth_factor = 1.0\nell_max = 4\n",
    )
    .unwrap();
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(out.path())
        .env("LPP_MEMORY_BUDGET_CELLS", "1000")
        .output()
        .unwrap();
    assert!(!o.status.success(), "run must fail under a 1000-cell budget");
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("budget") && err.contains("cells"),
        "capacity error must name the limiting parameter: {err}"
    );

    // A malformed budget env var is rejected by name, not silently ignored.
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(out.path())
        .env("LPP_MEMORY_BUDGET_CELLS", "lots")
        .output()
        .unwrap();
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("LPP_MEMORY_BUDGET_CELLS"), "stderr: {err}");
}

#[test]
fn zero_workers_is_rejected() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("tiny.toml");
    std::fs::write(
        &cfg,
        "[[experiment]]\nname = \"tiny\"\nkind = \"midpoint\"\nn_list = [8]\n\
         trials = 5\nmaster_seed = 1\n",
    )
    .unwrap();
    let o = run_to_dir(&cfg, out.path(), &["--workers", "0"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("workers"), "stderr: {err}");
}

#[test]
fn selftest_passes_clean_and_catches_injected_bug() {
    let o = bin()
        .args(["selftest", "--max-size", "5", "--cases", "40"])
        .output()
        .unwrap();
    assert!(o.status.success(), "clean selftest must pass: {o:?}");

    let o = bin()
        .args(["selftest", "--max-size", "5", "--cases", "40", "--inject-bug"])
        .output()
        .unwrap();
    assert!(
        !o.status.success(),
        "injected bug must produce a nonzero exit"
    );
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("seed"), "failure must report a seed: {err}");
}

#[test]
fn tw_check_accepts_builtin_table() {
    let o = bin().arg("tw-check").output().unwrap();
    assert!(o.status.success(), "tw-check failed: {o:?}");
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("PASS"), "stdout: {out}");
}
