//! Report bundle bookkeeping: input digests, the per-stage digest cache and
//! `manifest.json`.
//!
//! A stage key hashes the tool version, the configuration as written and the
//! digest of every configured input. A stage whose cached key matches and
//! whose recorded outputs are still on disk byte for byte is skipped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
const CACHE_DIR: &str = ".cache";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    /// Path as written in the configuration.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub key: String,
    /// File name to sha256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    config: serde_json::Value,
    inputs: BTreeMap<String, InputDigest>,
    conventions: BTreeMap<String, String>,
    stages: BTreeMap<String, StageRecord>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn conventions() -> BTreeMap<String, String> {
    [
        ("breakpoints", "computed over all eligible stocks each formation month"),
        ("double_sort_long_short", "low group minus high group, equal average over populated cells of the other key"),
        ("fmb_t_stat", "time-series t of monthly slopes; Newey-West only when battery.fmb_nw_lags is set"),
        ("formation", "portfolios formed on betas through month m and held over m+1"),
        ("long_short", "highest quantile minus lowest quantile"),
        ("mean_return_t_stat", "classical standard error of the monthly mean"),
        ("newey_west", "Bartlett kernel, no small-sample degrees-of-freedom adjustment"),
        ("portfolio_t_stats", "classical OLS errors unless battery.alpha_nw_lags is set"),
        ("predictive_regression", "filtered dependent at period q on predictors aggregated over q-1, Newey-West errors"),
        ("quantile", cidlab_core::econometrics::QUANTILE_CONVENTION),
        ("value_weights", "market capitalisation at the end of the previous month"),
        ("winsorization", "per formation month cross-section of betas"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

pub struct Bundle {
    out: PathBuf,
    force: bool,
    config: serde_json::Value,
    inputs: BTreeMap<String, InputDigest>,
    base_key: String,
    stages: BTreeMap<String, StageRecord>,
}

impl Bundle {
    /// `raw` is the configuration as written (paths unresolved); `resolved`
    /// locates the inputs to digest.
    pub fn open(out: &Path, raw: &RunConfig, resolved: &RunConfig, force: bool) -> Result<Self, CliError> {
        let mut raw = raw.clone();
        raw.synth.seed = resolved.synth.seed;
        raw.out_dir = None;
        raw.threads = None;
        let config = serde_json::to_value(&raw).map_err(|e| CliError::Internal(format!("config to json: {e}")))?;

        let mut inputs = BTreeMap::new();
        let ri = &raw.inputs;
        let fi = &resolved.inputs;
        let pairs = [
            ("panel", &ri.panel, &fi.panel),
            ("factors", &ri.factors, &fi.factors),
            ("scheme", &ri.scheme, &fi.scheme),
            ("deflator", &ri.deflator, &fi.deflator),
            ("unemployment", &ri.unemployment, &fi.unemployment),
            ("lt_unemployment", &ri.lt_unemployment, &fi.lt_unemployment),
            ("st_unemployment", &ri.st_unemployment, &fi.st_unemployment),
            ("employment", &ri.employment, &fi.employment),
        ];
        let mut files: Vec<(String, String, PathBuf)> = pairs
            .into_iter()
            .filter_map(|(n, r, f)| Some((n.to_string(), r.as_ref()?.display().to_string(), f.clone()?)))
            .collect();
        for (s, f) in raw.sweep.schemes.iter().zip(&resolved.sweep.schemes) {
            files.push((format!("sweep_{}", s.name), s.path.display().to_string(), f.path.clone()));
        }
        for (name, shown, path) in files {
            let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
            inputs.insert(
                name,
                InputDigest {
                    path: shown,
                    sha256: sha256_hex(&bytes),
                },
            );
        }

        let mut h = Sha256::new();
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        h.update(config.to_string().as_bytes());
        for (k, v) in &inputs {
            h.update(k.as_bytes());
            h.update(v.sha256.as_bytes());
        }
        let base_key = hex::encode(h.finalize());

        let mut bundle = Bundle {
            out: out.to_path_buf(),
            force,
            config,
            inputs,
            base_key,
            stages: BTreeMap::new(),
        };
        // Keep stage records from earlier runs of the same configuration.
        if let Ok(text) = std::fs::read_to_string(out.join(MANIFEST)) {
            if let Ok(old) = serde_json::from_str::<Manifest>(&text) {
                for (name, rec) in old.stages {
                    if rec.key == bundle.stage_key(&name) {
                        bundle.stages.insert(name, rec);
                    }
                }
            }
        }
        Ok(bundle)
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    pub fn stage_key(&self, stage: &str) -> String {
        sha256_hex(format!("{}:{stage}", self.base_key).as_bytes())
    }

    fn cache_path(&self, stage: &str) -> PathBuf {
        self.out.join(CACHE_DIR).join(format!("{stage}.json"))
    }

    /// True when `stage` can be skipped.
    pub fn is_current(&mut self, stage: &str) -> bool {
        if self.force {
            return false;
        }
        let Ok(text) = std::fs::read_to_string(self.cache_path(stage)) else { return false };
        let Ok(rec) = serde_json::from_str::<StageRecord>(&text) else { return false };
        if rec.key != self.stage_key(stage) {
            return false;
        }
        let intact = rec.outputs.iter().all(|(file, digest)| {
            std::fs::read(self.out.join(file)).is_ok_and(|b| sha256_hex(&b) == *digest)
        });
        if intact {
            self.stages.insert(stage.to_string(), rec);
        }
        intact
    }

    /// Writes a stage's files and records them in the cache.
    pub fn write_stage(&mut self, stage: &str, files: Vec<(String, Vec<u8>)>) -> Result<(), CliError> {
        let mut outputs = BTreeMap::new();
        for (name, bytes) in files {
            let path = self.out.join(&name);
            write_if_changed(&path, &bytes)?;
            outputs.insert(name, sha256_hex(&bytes));
        }
        let rec = StageRecord {
            key: self.stage_key(stage),
            outputs,
        };
        let cache = self.cache_path(stage);
        std::fs::create_dir_all(cache.parent().expect("cache file has a parent")).map_err(|e| io_err(&cache, e))?;
        let text = serde_json::to_string_pretty(&rec).map_err(|e| CliError::Internal(e.to_string()))?;
        write_if_changed(&cache, text.as_bytes())?;
        self.stages.insert(stage.to_string(), rec);
        Ok(())
    }

    /// Writes `manifest.json`, leaving the file untouched when unchanged.
    pub fn finish(self) -> Result<(), CliError> {
        let manifest = Manifest {
            tool: "cidlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: self.config,
            inputs: self.inputs,
            conventions: conventions(),
            stages: self.stages,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        write_if_changed(&self.out.join(MANIFEST), text.as_bytes())
    }
}

fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if std::fs::read(path).is_ok_and(|old| old == bytes) {
        return Ok(());
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}
