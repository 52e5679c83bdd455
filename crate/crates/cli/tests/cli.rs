use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn cidlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cidlab"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CIDLAB_OUT")
        .env_remove("CIDLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A small synthetic economy in `root/economy` with its generated config.
fn economy(root: &Path) {
    std::fs::write(
        root.join("base.toml"),
        "[synth]\nn_stocks = 240\nn_industries = 8\nn_months = 150\nseed = 3\n",
    )
    .unwrap();
    let o = cidlab(&["synth", "--config", "base.toml", "--out", "economy"], root);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn malformed_window_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "out_dir = \"out\"\n[beta]\nwindow = -3\n").unwrap();
    let o = cidlab(&["betas", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("beta.window"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "out_dir = \"out\"\n[sort]\ngroup = 5\n").unwrap();
    let o = cidlab(&["sort", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sort"), "{}", stderr(&o));
}

#[test]
fn missing_config_flag_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = cidlab(&["dispersion", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.toml"),
        "out_dir = \"out\"\n[inputs]\npanel = \"nowhere.csv\"\nscheme_name = \"SIC2\"\n",
    )
    .unwrap();
    let o = cidlab(&["dispersion", "--config", "cfg.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn synth_then_all_builds_the_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    economy(root);
    let o = cidlab(&["all", "--config", "economy/config.toml"], root);
    assert!(o.status.success(), "{}", stderr(&o));

    let report = root.join("economy/report");
    let out = files(&report);
    for name in [
        "manifest.json",
        "table_ingest.csv",
        "dispersion.csv",
        "innovations.csv",
        "betas.csv",
        "portfolios.csv",
        "table_mean_returns.csv",
        "table_alphas.csv",
        "table_fmb.csv",
        "table_fmb_stocks.csv",
        "table_spanning.csv",
        "table_predict_macro.csv",
        "table_predict_employment.csv",
        "table_sweep.csv",
    ] {
        assert!(out.contains_key(name), "missing {name}");
    }

    let manifest: serde_json::Value = serde_json::from_slice(&out["manifest.json"]).unwrap();
    assert_eq!(manifest["stages"].as_object().unwrap().len(), 10);
    assert!(manifest["inputs"]["panel"]["sha256"].as_str().unwrap().len() == 64);

    // One row per classification: the synthetic scheme plus SIC2, SIC3, SIC4.
    let sweep = String::from_utf8(out["table_sweep.csv"].clone()).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 4, "{sweep}");

    let means = String::from_utf8(out["table_mean_returns.csv"].clone()).unwrap();
    assert!(means.lines().any(|l| l.starts_with("L/S,")), "{means}");
}

#[test]
fn cache_skips_and_force_recomputes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    economy(root);
    let args = ["dispersion", "--config", "economy/config.toml", "--out", "r"];
    assert!(cidlab(&args, root).status.success());
    let before = files(&root.join("r"));

    let again = cidlab(&args, root);
    assert!(again.status.success());
    assert!(stderr(&again).contains("up to date"), "{}", stderr(&again));

    let forced = cidlab(&[&args[..], &["--force"]].concat(), root);
    assert!(forced.status.success());
    assert!(!stderr(&forced).contains("up to date"));
    assert_eq!(files(&root.join("r")), before);

    // A damaged output invalidates the cache entry.
    std::fs::write(root.join("r/dispersion.csv"), "tampered").unwrap();
    let repaired = cidlab(&args, root);
    assert!(!stderr(&repaired).contains("up to date"));
    assert_eq!(files(&root.join("r")), before);
}

#[test]
fn all_matches_stage_by_stage() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    economy(root);
    let cfg = "economy/config.toml";
    assert!(cidlab(&["all", "--config", cfg, "--out", "whole"], root).status.success());
    for stage in [
        "ingest-check",
        "dispersion",
        "betas",
        "sort",
        "alphas",
        "fmb",
        "spanning",
        "predict-macro",
        "predict-employment",
        "sweep-classification",
    ] {
        let o = cidlab(&[stage, "--config", cfg, "--out", "steps"], root);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    assert_eq!(files(&root.join("whole")), files(&root.join("steps")));
}

#[test]
fn seed_flag_changes_the_economy() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("base.toml"), "[synth]\nn_stocks = 60\nn_months = 40\n").unwrap();
    assert!(cidlab(&["synth", "--config", "base.toml", "--out", "a", "--seed", "1"], root).status.success());
    assert!(cidlab(&["synth", "--config", "base.toml", "--out", "b", "--seed", "2"], root).status.success());
    let (a, b) = (files(&root.join("a")), files(&root.join("b")));
    assert_ne!(a["panel.csv"], b["panel.csv"]);
    let cfg = String::from_utf8(a["config.toml"].clone()).unwrap();
    assert!(cfg.contains("seed = 1"), "{cfg}");
}
