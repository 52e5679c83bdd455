//! Run configuration read from a single TOML file.
//!
//! Every section rejects unknown keys. Relative paths are resolved against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use cidlab_core::battery::Aggregation;
use cidlab_core::beta::BetaConfig;
use cidlab_core::dispersion::{CsdWeighting, MarketSource};
use cidlab_core::panel::Frequency;
use cidlab_core::portfolio::{Breakpoints, Weighting};
use cidlab_core::synth::SynthConfig;
use cidlab_core::MonthId;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Report directory; overridden by `--out` or `CIDLAB_OUT`.
    pub out_dir: Option<PathBuf>,
    /// Worker threads; overridden by `--threads` or `CIDLAB_THREADS`.
    pub threads: Option<usize>,
    pub inputs: Inputs,
    pub screens: Screens,
    pub dispersion: DispersionSection,
    pub beta: BetaSection,
    pub sort: SortSection,
    pub battery: BatterySection,
    pub sweep: SweepSection,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Inputs {
    pub panel: Option<PathBuf>,
    pub factors: Option<PathBuf>,
    /// SIC range file; when absent `scheme_name` must be a builtin `SICk`.
    pub scheme: Option<PathBuf>,
    pub scheme_name: Option<String>,
    pub deflator: Option<PathBuf>,
    pub unemployment: Option<PathBuf>,
    pub lt_unemployment: Option<PathBuf>,
    pub st_unemployment: Option<PathBuf>,
    /// Long `period,industry,value` file of industry employment growth.
    pub employment: Option<PathBuf>,
    /// Panel returns are raw; subtract `RF` from the factor file.
    pub raw_returns: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Screens {
    pub enabled: bool,
    pub min_price: f64,
    /// In currency units of `base_month` per the deflator.
    pub min_real_cap: f64,
    pub base_month: Option<MonthId>,
}

impl Default for Screens {
    fn default() -> Self {
        Screens {
            enabled: false,
            min_price: 5.0,
            min_real_cap: 50.0,
            base_month: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispersionSection {
    pub min_firms: usize,
    pub market: MarketSource,
    pub csd_weighting: CsdWeighting,
    /// Factor columns for abnormal industry returns.
    pub abnormal_model: Option<Vec<String>>,
}

impl Default for DispersionSection {
    fn default() -> Self {
        DispersionSection {
            min_firms: 10,
            market: MarketSource::Factor,
            csd_weighting: CsdWeighting::Nested,
            abnormal_model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaSection {
    pub window: usize,
    pub min_obs: usize,
    pub winsor: [f64; 2],
    pub market_control: bool,
    pub frequency: Frequency,
}

impl Default for BetaSection {
    fn default() -> Self {
        let b = BetaConfig::default();
        BetaSection {
            window: b.window,
            min_obs: b.min_obs,
            winsor: [b.winsor.0, b.winsor.1],
            market_control: b.market_control,
            frequency: b.frequency,
        }
    }
}

impl BetaSection {
    pub fn to_config(&self) -> BetaConfig {
        BetaConfig {
            window: self.window,
            min_obs: self.min_obs,
            winsor: (self.winsor[0], self.winsor[1]),
            market_control: self.market_control,
            frequency: self.frequency,
        }
    }
}

/// Second key of the double sort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKey {
    Size,
    WidBeta,
    CsdBeta,
}

impl ControlKey {
    pub fn label(self) -> &'static str {
        match self {
            ControlKey::Size => "size",
            ControlKey::WidBeta => "wid_beta",
            ControlKey::CsdBeta => "csd_beta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleSortSection {
    pub control: ControlKey,
    pub control_groups: usize,
    #[serde(default)]
    pub control_breakpoints: Breakpoints,
    pub beta_groups: usize,
    #[serde(default)]
    pub beta_breakpoints: Breakpoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SortSection {
    pub groups: usize,
    pub breakpoints: Breakpoints,
    pub weighting: Weighting,
    pub characteristics: Vec<String>,
    pub double: Option<DoubleSortSection>,
}

impl Default for SortSection {
    fn default() -> Self {
        SortSection {
            groups: 5,
            breakpoints: Breakpoints::EqualCount,
            weighting: Weighting::Value,
            characteristics: ["prebeta", "size", "mom12_2", "vol12m"].map(String::from).to_vec(),
            double: None,
        }
    }
}

/// Dispersion measure whose beta sort supplies the spanning candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Wid,
    Csd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatterySection {
    pub models: Vec<String>,
    /// Newey-West lags for alpha regressions; classical errors when absent.
    pub alpha_nw_lags: Option<usize>,
    /// Newey-West lags for Fama-MacBeth means; plain t when absent.
    pub fmb_nw_lags: Option<usize>,
    /// Stock-level Fama-MacBeth controls next to the dispersion beta.
    pub fmb_controls: Vec<String>,
    pub spanning_base: Vec<String>,
    pub spanning_candidate: Measure,
    pub nw_lags: usize,
    pub aggregation: Aggregation,
    pub vol_window: usize,
    pub employment_max_lag: usize,
}

impl Default for BatterySection {
    fn default() -> Self {
        BatterySection {
            models: ["CAPM", "FF3", "Carhart", "FF5", "FF5+UMD+STR"].map(String::from).to_vec(),
            alpha_nw_lags: None,
            fmb_nw_lags: None,
            fmb_controls: vec!["size".into()],
            spanning_base: ["MKT_RF", "SMB", "HML", "RMW", "CMA"].map(String::from).to_vec(),
            spanning_candidate: Measure::Csd,
            nw_lags: 4,
            aggregation: Aggregation::Sum,
            vol_window: 24,
            employment_max_lag: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeFile {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Range schemes such as the Fama-French partitions, in sweep order.
    pub schemes: Vec<SchemeFile>,
    pub sic_digits: Vec<u8>,
    pub min_firms_ranges: usize,
    pub min_firms_sic: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            schemes: Vec::new(),
            sic_digits: vec![2, 3, 4],
            min_firms_ranges: 10,
            min_firms_sic: 5,
        }
    }
}

fn config_error(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

impl RunConfig {
    /// Returns the configuration as written and with resolved paths.
    pub fn load(path: &Path) -> Result<(Self, Self), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let raw = Self::parse(&text)?;
        let mut cfg = raw.clone();
        cfg.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok((raw, cfg))
    }

    /// Parses and validates; errors name the offending key path.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(&path, e.into_inner().message().trim())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        let i = &mut self.inputs;
        for p in [
            &mut i.panel,
            &mut i.factors,
            &mut i.scheme,
            &mut i.deflator,
            &mut i.unemployment,
            &mut i.lt_unemployment,
            &mut i.st_unemployment,
            &mut i.employment,
            &mut self.out_dir,
        ] {
            fix(p);
        }
        for s in &mut self.sweep.schemes {
            if s.path.is_relative() {
                s.path = base.join(&s.path);
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let b = &self.beta;
        if b.window < 3 {
            return Err(config_error("beta.window", format!("must be at least 3, got {}", b.window)));
        }
        if b.min_obs < 3 || b.min_obs > b.window {
            return Err(config_error(
                "beta.min_obs",
                format!("must lie in 3..=beta.window ({}), got {}", b.window, b.min_obs),
            ));
        }
        if b.frequency != Frequency::Monthly {
            return Err(config_error("beta.frequency", "only monthly betas are supported"));
        }
        b.to_config().validate().map_err(|e| config_error("beta.winsor", e))?;
        if self.dispersion.min_firms == 0 {
            return Err(config_error("dispersion.min_firms", "must be positive"));
        }
        let s = &self.sort;
        if s.groups < 2 {
            return Err(config_error("sort.groups", "need at least two groups"));
        }
        check_breakpoints("sort.breakpoints", &s.breakpoints, s.groups)?;
        for (i, c) in s.characteristics.iter().enumerate() {
            cidlab_core::portfolio::Characteristic::builtin(c)
                .map_err(|e| config_error(&format!("sort.characteristics[{i}]"), e))?;
        }
        if let Some(d) = &s.double {
            if d.control_groups < 2 {
                return Err(config_error("sort.double.control_groups", "need at least two groups"));
            }
            if d.beta_groups < 2 {
                return Err(config_error("sort.double.beta_groups", "need at least two groups"));
            }
            check_breakpoints("sort.double.control_breakpoints", &d.control_breakpoints, d.control_groups)?;
            check_breakpoints("sort.double.beta_breakpoints", &d.beta_breakpoints, d.beta_groups)?;
        }
        let bat = &self.battery;
        for (i, m) in bat.models.iter().enumerate() {
            cidlab_core::battery::ModelSpec::builtin(m).map_err(|e| config_error(&format!("battery.models[{i}]"), e))?;
        }
        for (i, c) in bat.fmb_controls.iter().enumerate() {
            match cidlab_core::portfolio::Characteristic::builtin(c) {
                Ok(cidlab_core::portfolio::Characteristic::PreBeta) | Err(_) => {
                    return Err(config_error(
                        &format!("battery.fmb_controls[{i}]"),
                        format!("`{c}` is not one of size, mom12_2, vol12m"),
                    ))
                }
                Ok(_) => {}
            }
        }
        if bat.vol_window < 2 {
            return Err(config_error("battery.vol_window", "must be at least 2"));
        }
        if bat.employment_max_lag == 0 {
            return Err(config_error("battery.employment_max_lag", "must be positive"));
        }
        for (i, d) in self.sweep.sic_digits.iter().enumerate() {
            if !(1..=4).contains(d) {
                return Err(config_error(&format!("sweep.sic_digits[{i}]"), "must lie in 1..=4"));
            }
        }
        if self.sweep.min_firms_ranges == 0 || self.sweep.min_firms_sic == 0 {
            return Err(config_error("sweep", "minimum firm counts must be positive"));
        }
        if self.screens.enabled && self.screens.base_month.is_none() {
            return Err(config_error("screens.base_month", "required when screens are enabled"));
        }
        if self.threads == Some(0) {
            return Err(config_error("threads", "must be positive"));
        }
        self.synth.validate().map_err(|e| config_error("synth", e))?;
        Ok(())
    }
}

fn check_breakpoints(path: &str, bp: &Breakpoints, groups: usize) -> Result<(), CliError> {
    if let Breakpoints::Percentiles(p) = bp {
        if p.len() + 1 != groups {
            return Err(config_error(path, format!("{} cuts give {} groups, not {groups}", p.len(), p.len() + 1)));
        }
        if p.windows(2).any(|w| w[0] >= w[1]) || p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(config_error(path, "cuts must increase inside [0, 1]"));
        }
    }
    Ok(())
}
