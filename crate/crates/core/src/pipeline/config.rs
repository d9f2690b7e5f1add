//! The declarative pipeline configuration, read from TOML.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::Reweighting;
use crate::panel::{BalancePolicy, ColumnMapping, TransformSpec};
use crate::pvar::{IrfConfig, PvarTransform, DEFAULT_ORDERING};
use crate::time::YearMonth;
use crate::unit_root::{AdfConfig, Deterministic, LagRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Relative paths resolve against the directory of the config file.
    pub output_dir: PathBuf,
    pub inputs: InputConfig,
    #[serde(default)]
    pub index: IndexStageConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_rate: Option<PolicyRateConfig>,
    #[serde(default)]
    pub transforms: Vec<TransformSpec>,
    /// Required: how to balance the analysis panel.
    pub balance: BalancePolicy,
    #[serde(default)]
    pub unit_root: UnitRootStageConfig,
    #[serde(default)]
    pub pvar: PvarStageConfig,
    #[serde(default)]
    pub irf: IrfStageConfig,
    #[serde(default)]
    pub kao: KaoStageConfig,
    #[serde(default)]
    pub ardl: Vec<ArdlSystemConfig>,
    #[serde(default)]
    pub report: ReportConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub prices: PathBuf,
    pub shares: PathBuf,
    pub sector_map: PathBuf,
    /// Long-format `unit,date,variable,value` macro panel.
    #[serde(rename = "macro")]
    pub macro_panel: PathBuf,
    #[serde(default)]
    pub columns: ColumnMapping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct IndexStageConfig {
    /// Month at which every index equals 100; defaults to the first month
    /// of the macro panel.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_period: Option<YearMonth>,
    pub reweighting: Reweighting,
}

/// Builds one panel variable by taking, for each unit, the named series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyRateConfig {
    pub output: String,
    /// unit -> source variable
    pub sources: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnitRootStageConfig {
    /// Defaults to the PVAR variables.
    pub variables: Vec<String>,
    pub deterministic: Deterministic,
    pub max_lags: usize,
    pub lag_rule: LagRule,
}

impl Default for UnitRootStageConfig {
    fn default() -> Self {
        let adf = AdfConfig::default();
        Self {
            variables: Vec::new(),
            deterministic: adf.deterministic,
            max_lags: adf.max_lags,
            lag_rule: adf.lag_rule,
        }
    }
}

impl UnitRootStageConfig {
    pub fn adf(&self) -> AdfConfig {
        AdfConfig {
            deterministic: self.deterministic,
            max_lags: self.max_lags,
            lag_rule: self.lag_rule,
        }
    }
}

/// Either a fixed lag order or `"auto"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LagChoice {
    Fixed(usize),
    Named(String),
}

impl Default for LagChoice {
    fn default() -> Self {
        LagChoice::Named("auto".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Mbic,
    #[default]
    Maic,
    Mqic,
}

impl Criterion {
    pub fn label(self) -> &'static str {
        match self {
            Criterion::Mbic => "MBIC",
            Criterion::Maic => "MAIC",
            Criterion::Mqic => "MQIC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PvarStageConfig {
    pub variables: Vec<String>,
    pub lags: LagChoice,
    pub transform: PvarTransform,
    pub instrument_lags: [usize; 2],
    pub max_lag: usize,
    pub mqic_r: f64,
    pub criterion: Criterion,
}

impl Default for PvarStageConfig {
    fn default() -> Self {
        Self {
            variables: DEFAULT_ORDERING.iter().map(|s| s.to_string()).collect(),
            lags: LagChoice::default(),
            transform: PvarTransform::default(),
            instrument_lags: [1, 4],
            max_lag: 4,
            mqic_r: 2.0,
            criterion: Criterion::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IrfStageConfig {
    pub horizon: usize,
    pub draws: usize,
    pub seed: u64,
    pub band: f64,
    /// Cholesky ordering; defaults to the PVAR variable order.
    pub ordering: Vec<String>,
}

impl Default for IrfStageConfig {
    fn default() -> Self {
        let d = IrfConfig::default();
        Self {
            horizon: d.horizon,
            draws: d.n_draws,
            seed: d.seed,
            band: d.band_level,
            ordering: Vec::new(),
        }
    }
}

impl IrfStageConfig {
    pub fn irf_config(&self) -> IrfConfig {
        IrfConfig {
            horizon: self.horizon,
            n_draws: self.draws,
            seed: self.seed,
            band_level: self.band,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    pub dependent: String,
    pub regressors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KaoStageConfig {
    pub residual_lags: usize,
    pub systems: Vec<SystemConfig>,
}

impl Default for KaoStageConfig {
    fn default() -> Self {
        Self {
            residual_lags: 1,
            systems: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArdlSystemConfig {
    pub name: String,
    pub dependent: String,
    pub regressors: Vec<String>,
    /// Lags of the dependent variable.
    #[serde(default = "one")]
    pub p: usize,
    /// Lags per regressor; one entry per regressor, defaulting to 1 each.
    #[serde(default)]
    pub q: Vec<usize>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    /// Half-life range (years) the estimates are compared against.
    pub reference_half_life_years: [f64; 2],
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            reference_half_life_years: [1.5, 3.0],
        }
    }
}

impl PipelineConfig {
    /// Reads a TOML config and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg: PipelineConfig = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.inputs.prices);
        fix(&mut self.inputs.shares);
        fix(&mut self.inputs.sector_map);
        fix(&mut self.inputs.macro_panel);
    }

    /// Fills in defaults that depend on other sections.
    pub fn materialize(&mut self) {
        if self.unit_root.variables.is_empty() {
            self.unit_root.variables = self.pvar.variables.clone();
        }
        if self.irf.ordering.is_empty() {
            self.irf.ordering = self.pvar.variables.clone();
        }
        for sys in &mut self.ardl {
            if sys.q.is_empty() {
                sys.q = vec![1; sys.regressors.len()];
            }
        }
    }

    /// Fixed lag order, or `None` for automatic selection.
    pub fn fixed_lags(&self) -> Result<Option<usize>> {
        match &self.pvar.lags {
            LagChoice::Fixed(p) => Ok(Some(*p)),
            LagChoice::Named(s) if s == "auto" => Ok(None),
            LagChoice::Named(s) => Err(Error::Config(format!(
                "pvar.lags must be a positive integer or \"auto\", got \"{s}\""
            ))),
        }
    }

    /// Checks every setting and every variable reference. `available` lists
    /// the variables present before transforms (ingested and constructed);
    /// transform outputs are added in order.
    pub fn validate(&self, available: &BTreeSet<String>, units: &[String]) -> Result<()> {
        let mut known = available.clone();
        let unknown = |ctx: &str, v: &str| Error::Config(format!("{ctx}: unknown variable '{v}'"));

        if let Some(pr) = &self.policy_rate {
            for u in units {
                let Some(src) = pr.sources.get(u) else {
                    return Err(Error::Config(format!("policy_rate.sources: no series mapped for unit '{u}'")));
                };
                if !known.contains(src) {
                    return Err(unknown("policy_rate.sources", src));
                }
            }
            if let Some(extra) = pr.sources.keys().find(|k| !units.contains(k)) {
                return Err(Error::Config(format!("policy_rate.sources: unknown unit '{extra}'")));
            }
            if !known.insert(pr.output.clone()) {
                return Err(Error::Config(format!("policy_rate.output '{}' already exists", pr.output)));
            }
        }
        for t in &self.transforms {
            if !known.contains(&t.applied_to) {
                return Err(unknown("transforms", &t.applied_to));
            }
            if !known.insert(t.output_name.clone()) {
                return Err(Error::Config(format!("transforms: output '{}' already exists", t.output_name)));
            }
        }
        for v in &self.unit_root.variables {
            if !known.contains(v) {
                return Err(unknown("unit_root.variables", v));
            }
        }
        if self.pvar.variables.is_empty() {
            return Err(Error::Config("pvar.variables is empty".into()));
        }
        for v in &self.pvar.variables {
            if !known.contains(v) {
                return Err(unknown("pvar.variables", v));
            }
        }
        let distinct: BTreeSet<&String> = self.pvar.variables.iter().collect();
        if distinct.len() != self.pvar.variables.len() {
            return Err(Error::Config("pvar.variables contains duplicates".into()));
        }
        let fixed = self.fixed_lags()?;
        if fixed == Some(0) {
            return Err(Error::Config("pvar.lags must be at least 1".into()));
        }
        if fixed.is_none() && self.pvar.transform != PvarTransform::ForwardOrthogonalDeviations {
            return Err(Error::Config(
                "pvar.lags = \"auto\" needs the forward_orthogonal_deviations transform".into(),
            ));
        }
        let [lo, hi] = self.pvar.instrument_lags;
        if lo == 0 || hi < lo {
            return Err(Error::Config(format!("pvar.instrument_lags [{lo}, {hi}] is not a valid range")));
        }
        if self.pvar.max_lag == 0 {
            return Err(Error::Config("pvar.max_lag must be at least 1".into()));
        }
        if !(self.pvar.mqic_r > 0.0) {
            return Err(Error::Config("pvar.mqic_r must be positive".into()));
        }
        if !self.irf.ordering.is_empty() {
            let a: BTreeSet<&String> = self.irf.ordering.iter().collect();
            if a != distinct || self.irf.ordering.len() != self.pvar.variables.len() {
                for v in &self.irf.ordering {
                    if !known.contains(v) {
                        return Err(unknown("irf.ordering", v));
                    }
                }
                return Err(Error::Config("irf.ordering must be a permutation of pvar.variables".into()));
            }
        }
        if !(self.irf.band > 0.0 && self.irf.band < 1.0) {
            return Err(Error::Config(format!("irf.band must lie in (0, 1), got {}", self.irf.band)));
        }
        if self.irf.draws < 2 {
            return Err(Error::Config("irf.draws must be at least 2".into()));
        }
        let mut names = BTreeSet::new();
        for s in &self.kao.systems {
            if !names.insert(&s.name) {
                return Err(Error::Config(format!("kao.systems: duplicate name '{}'", s.name)));
            }
            if s.regressors.is_empty() {
                return Err(Error::Config(format!("kao.systems '{}': no regressors", s.name)));
            }
            for v in std::iter::once(&s.dependent).chain(&s.regressors) {
                if !known.contains(v) {
                    return Err(unknown(&format!("kao.systems '{}'", s.name), v));
                }
            }
        }
        let mut names = BTreeSet::new();
        for s in &self.ardl {
            if !names.insert(&s.name) {
                return Err(Error::Config(format!("ardl: duplicate name '{}'", s.name)));
            }
            for v in std::iter::once(&s.dependent).chain(&s.regressors) {
                if !known.contains(v) {
                    return Err(unknown(&format!("ardl '{}'", s.name), v));
                }
            }
            if !s.q.is_empty() && s.q.len() != s.regressors.len() {
                return Err(Error::Config(format!(
                    "ardl '{}': q has {} entries for {} regressors",
                    s.name,
                    s.q.len(),
                    s.regressors.len()
                )));
            }
            self.ardl_spec(s).validate()?;
        }
        let [a, b] = self.report.reference_half_life_years;
        if !(a > 0.0 && b >= a) {
            return Err(Error::Config(format!(
                "report.reference_half_life_years [{a}, {b}] is not a valid range"
            )));
        }
        Ok(())
    }

    pub fn ardl_spec(&self, s: &ArdlSystemConfig) -> crate::ardl::ArdlSpec {
        let q = if s.q.is_empty() { vec![1; s.regressors.len()] } else { s.q.clone() };
        crate::ardl::ArdlSpec::new(&s.dependent, &s.regressors).with_lags(s.p, q)
    }
}
