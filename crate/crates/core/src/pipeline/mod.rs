//! The end-to-end batch pipeline: sector indices, transforms and balancing,
//! panel unit roots, lag selection, panel VAR with impulse responses, Kao
//! cointegration and PMG/MG estimation, then a markdown report and a JSON
//! manifest recording every choice that shaped the outputs.
//!
//! Output depends only on the inputs and the config: no timestamps, and
//! every collection is written in a fixed order.

mod config;
mod report;
mod svg;
mod tables;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use crate::ardl::{fit_mg, fit_pmg, MgFit, PmgFit};
use crate::coint::{kao_test, KaoResult, KAO_VARIANT};
use crate::error::{Error, Result};
use crate::index::{build_sector_indices, load_constituents, write_index_csv, ConstituentSeries, IndexConfig};
use crate::panel::{apply_transform, balance, load_panel_csv, DropReport, PanelDataset};
use crate::pvar::{
    fit_pvar, orthogonalized_irf, select_lag, LagSelectionTable, MmscConfig, PvarSpec, PvarTransform,
};
use crate::simulate::GENERATOR;
use crate::unit_root::{levels_and_differences, UnitRootRow};

pub use config::{
    ArdlSystemConfig, Criterion, IndexStageConfig, InputConfig, IrfStageConfig, KaoStageConfig, LagChoice,
    PipelineConfig, PolicyRateConfig, PvarStageConfig, ReportConfig, SystemConfig, UnitRootStageConfig,
};
pub use report::{half_life_check, half_life_section, render_report, HalfLifeCheck, ReportInputs, CHOLESKY_NOTE, ECM_LABEL_NOTE};
pub use svg::{eigenvalue_svg, irf_svg};
pub use tables::{
    csv_with_header, pvar_header, write_coefficients_csv, write_eigenvalues_csv, write_irf_csv, write_kao_csv,
    write_lag_table_csv, write_mg_csv, write_pmg_csv, write_pmg_units_csv, write_unit_root_csv, KaoRow,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.md";

/// Major dependency versions the numerics rest on.
pub const DEPENDENCIES: [&str; 5] = ["nalgebra 0.35", "statrs 0.19", "rand 0.9", "rand_chacha 0.9", "rand_distr 0.5"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub status: String,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Software {
    pub name: &'static str,
    pub version: &'static str,
    pub generator: &'static str,
    pub dependencies: Vec<&'static str>,
}

impl Default for Software {
    fn default() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            generator: GENERATOR,
            dependencies: DEPENDENCIES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    /// `complete` or `failed`.
    pub status: String,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub software: Software,
    /// The config with every default filled in. The output directory is
    /// omitted: artifacts are named relative to the manifest.
    pub config: serde_json::Value,
    /// Choices resolved at run time (automatic lag order, test variants).
    pub choices: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub drop_report: Option<DropReport>,
    pub stages: Vec<StageRecord>,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
}

struct Inputs {
    constituents: Vec<ConstituentSeries>,
    macro_panel: PanelDataset,
}

fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs> {
    let i = &cfg.inputs;
    for p in [&i.prices, &i.shares, &i.sector_map, &i.macro_panel] {
        if !p.exists() {
            return Err(Error::Config(format!("input file {} does not exist", p.display())));
        }
    }
    Ok(Inputs {
        constituents: load_constituents(&i.prices, &i.shares, &i.sector_map)?,
        macro_panel: load_panel_csv(&i.macro_panel, &i.columns)?,
    })
}

/// Reads the config file and runs the pipeline.
pub fn run_pipeline_file(path: impl AsRef<Path>) -> Result<PipelineRun> {
    run_pipeline(&PipelineConfig::load(path)?)
}

/// Validates the config against the inputs, then runs every stage in order.
/// A failing stage stops the run with [`Error::Stage`]; the artifacts of
/// completed stages stay on disk and the manifest records the failure.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun> {
    let mut cfg = config.clone();
    cfg.materialize();
    let inputs = load_inputs(&cfg).map_err(|e| stage_error("load-inputs", e))?;

    let mut available: BTreeSet<String> = inputs
        .macro_panel
        .variable_names()
        .into_iter()
        .map(String::from)
        .collect();
    for c in &inputs.constituents {
        available.insert(c.sector.variable_name());
    }
    cfg.validate(&available, inputs.macro_panel.units())?;

    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out)?;
    let mut run = Run {
        out: out.clone(),
        stages: Vec::new(),
        choices: BTreeMap::new(),
        drop_report: None,
    };
    let result = execute(&cfg, &inputs, &mut run);

    let mut config_json = serde_json::to_value(&cfg)?;
    if let Some(obj) = config_json.as_object_mut() {
        obj.remove("output_dir");
    }
    let (status, failed_stage, error) = match &result {
        Ok(()) => ("complete".to_string(), None, None),
        Err(Error::Stage { stage, source }) => ("failed".into(), Some(stage.clone()), Some(source.to_string())),
        Err(e) => ("failed".into(), None, Some(e.to_string())),
    };
    let manifest = Manifest {
        status,
        failed_stage,
        error,
        software: Software::default(),
        config: config_json,
        choices: run.choices,
        seeds: [("irf".to_string(), cfg.irf.seed)].into_iter().collect(),
        drop_report: run.drop_report,
        stages: run.stages,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(out.join(MANIFEST_FILE))?);
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    writeln!(f)?;
    f.flush()?;
    result.map(|()| PipelineRun {
        output_dir: out,
        manifest,
    })
}

fn stage_error(stage: &str, e: Error) -> Error {
    match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage: stage.to_string(),
            source: Box::new(other),
        },
    }
}

struct Run {
    out: PathBuf,
    stages: Vec<StageRecord>,
    choices: BTreeMap<String, String>,
    drop_report: Option<DropReport>,
}

impl Run {
    /// Runs one stage; `f` receives the output directory and a list to which
    /// it appends the file names it writes.
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&Path, &mut Vec<String>) -> Result<T>) -> Result<T> {
        info!("stage {name}");
        let mut artifacts = Vec::new();
        let r = f(&self.out, &mut artifacts);
        self.stages.push(StageRecord {
            name: name.to_string(),
            status: if r.is_ok() { "complete" } else { "failed" }.into(),
            artifacts,
        });
        r.map_err(|e| stage_error(name, e))
    }

    fn choose(&mut self, key: &str, value: impl ToString) {
        self.choices.insert(key.to_string(), value.to_string());
    }
}

fn execute(cfg: &PipelineConfig, inputs: &Inputs, run: &mut Run) -> Result<()> {
    // Indices, merged into every unit of the macro panel.
    let base = cfg.index.base_period.unwrap_or(inputs.macro_panel.start());
    run.choose("index.base_period", base);
    let merged = run.stage("build-index", |out, arts| {
        let indices = build_sector_indices(
            &inputs.constituents,
            base,
            IndexConfig {
                reweighting: cfg.index.reweighting,
            },
        )?;
        let series: Vec<_> = indices.values().collect();
        let file = std::fs::File::create(out.join("indices.csv"))?;
        write_index_csv(
            file,
            &series,
            &[
                format!(
                    "regional capitalization-weighted sector indices, {base} = 100, {:?} reweighting",
                    cfg.index.reweighting
                ),
                format!("constituents: {}", inputs.constituents.len()),
            ],
        )?;
        arts.push("indices.csv".into());
        let mut ds = inputs.macro_panel.clone();
        for (sector, idx) in &indices {
            let cells = (0..ds.n_units())
                .map(|_| (0..ds.n_periods()).map(|t| idx.value_at(ds.period(t))).collect())
                .collect();
            ds = ds.with_variable(&sector.variable_name(), cells)?;
        }
        Ok(ds)
    })?;

    // Policy rate, transforms, balancing.
    let used = used_variables(cfg);
    let (ds, drops) = run.stage("transforms", |out, arts| {
        let mut ds = merged;
        if let Some(pr) = &cfg.policy_rate {
            let mut cells = Vec::with_capacity(ds.n_units());
            for (u, unit) in ds.units().iter().enumerate() {
                cells.push(ds.series(u, &pr.sources[unit])?.to_vec());
            }
            ds = ds.with_variable(&pr.output, cells)?;
        }
        for t in &cfg.transforms {
            ds = apply_transform(&ds, t)?;
        }
        let (ds, drops) = balance(&ds.select_variables(&used)?, cfg.balance)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(out.join("analysis_panel.csv"))?);
        writeln!(f, "# analysis panel after transforms, balanced with {:?}", cfg.balance)?;
        writeln!(
            f,
            "# dropped units: [{}]; dropped periods: {}; dropped cells: {}",
            drops.dropped_units.join(", "),
            drops.dropped_periods.len(),
            drops.dropped_cells
        )?;
        ds.write_csv(&mut f)?;
        f.flush()?;
        arts.push("analysis_panel.csv".into());
        Ok((ds, drops))
    })?;
    run.drop_report = Some(drops.clone());

    let adf = cfg.unit_root.adf();
    run.choose("unit_root.test", adf.describe());
    let unit_roots = run.stage("unit-root", |out, arts| {
        let rows = cfg
            .unit_root
            .variables
            .iter()
            .map(|v| levels_and_differences(&ds, v, &adf))
            .collect::<Result<Vec<UnitRootRow>>>()?;
        write_unit_root_csv(&out.join("unit_roots.csv"), &rows, &adf)?;
        arts.push("unit_roots.csv".into());
        Ok(rows)
    })?;

    let [lo, hi] = cfg.pvar.instrument_lags;
    let base_spec = PvarSpec::new(&cfg.pvar.variables, 1)
        .with_transform(cfg.pvar.transform)
        .with_instrument_lags(lo, hi);
    let fixed = cfg.fixed_lags()?;
    let lag_table = if cfg.pvar.transform == PvarTransform::ForwardOrthogonalDeviations {
        let t = run.stage("lag-selection", |out, arts| {
            let t = select_lag(&ds, &base_spec, cfg.pvar.max_lag, MmscConfig { mqic_r: cfg.pvar.mqic_r })?;
            write_lag_table_csv(&out.join("lag_selection.csv"), &t, &cfg.pvar.variables)?;
            arts.push("lag_selection.csv".into());
            Ok(t)
        })?;
        Some(t)
    } else {
        None
    };
    let lags = match (fixed, &lag_table) {
        (Some(p), _) => {
            run.choose("pvar.lag_choice", format!("fixed at {p}"));
            p
        }
        (None, Some(t)) => {
            let p = chosen_lag(t, cfg.pvar.criterion);
            run.choose("pvar.lag_choice", format!("{} selects {p}", cfg.pvar.criterion.label()));
            p
        }
        (None, None) => unreachable!("validated: automatic lags need the GMM estimator"),
    };
    run.choose("pvar.lags", lags);
    run.choose("pvar.estimator", cfg.pvar.transform.label());

    let spec = PvarSpec {
        lags,
        ..base_spec.clone()
    };
    let (fit, stab) = run.stage("pvar", |out, arts| {
        let fit = fit_pvar(&ds, &spec)?;
        let stab = fit.stability();
        write_coefficients_csv(&out.join("pvar_coefficients.csv"), &fit)?;
        arts.push("pvar_coefficients.csv".into());
        write_eigenvalues_csv(&out.join("eigenvalues.csv"), &fit, &stab)?;
        arts.push("eigenvalues.csv".into());
        let title = format!("Companion eigenvalues, PVAR({})", fit.lag_order());
        std::fs::write(out.join("eigenvalues.svg"), eigenvalue_svg(&stab.eigenvalues, &title))?;
        arts.push("eigenvalues.svg".into());
        Ok((fit, stab))
    })?;
    run.choose("pvar.stable", stab.stable);

    run.choose("irf.identification", format!("Cholesky, ordering {}", cfg.irf.ordering.join(", ")));
    run.choose("irf.normalizations", "one standard deviation (irf.csv), unit impact (irf_unit.csv)");
    let irf = run.stage("irf", |out, arts| {
        let irf = orthogonalized_irf(&fit, &cfg.irf.ordering, &cfg.irf.irf_config())?;
        let header = pvar_header(&fit);
        write_irf_csv(&out.join("irf.csv"), &irf, false, &header)?;
        arts.push("irf.csv".into());
        write_irf_csv(&out.join("irf_unit.csv"), &irf, true, &header)?;
        arts.push("irf_unit.csv".into());
        for (s, name) in irf.variables.iter().enumerate() {
            let file = format!("irf_shock_{}.svg", file_safe(name));
            std::fs::write(out.join(&file), irf_svg(&irf, s, false))?;
            arts.push(file);
        }
        Ok(irf)
    })?;

    run.choose("kao.variant", KAO_VARIANT);
    let kao = run.stage("kao", |out, arts| {
        let mut results: Vec<(String, KaoResult)> = Vec::new();
        for s in &cfg.kao.systems {
            let r = kao_test(&ds, &s.dependent, &s.regressors, cfg.kao.residual_lags)
                .map_err(|e| Error::Config(format!("system '{}': {e}", s.name)))?;
            results.push((s.name.clone(), r));
        }
        let rows: Vec<KaoRow<'_>> = cfg
            .kao
            .systems
            .iter()
            .zip(&results)
            .map(|(s, (_, r))| KaoRow {
                system: &s.name,
                dependent: &s.dependent,
                regressors: &s.regressors,
                result: r,
            })
            .collect();
        write_kao_csv(&out.join("kao.csv"), &rows)?;
        arts.push("kao.csv".into());
        Ok(results)
    })?;

    let (pmg, mg) = run.stage("pmg-mg", |out, arts| {
        let mut pmg: Vec<(String, String, PmgFit)> = Vec::new();
        let mut mg: Vec<(String, String, MgFit)> = Vec::new();
        for s in &cfg.ardl {
            let spec = cfg.ardl_spec(s);
            let wrap = |e: Error| Error::Config(format!("system '{}': {e}", s.name));
            pmg.push((s.name.clone(), s.dependent.clone(), fit_pmg(&ds, &spec).map_err(wrap)?));
            mg.push((s.name.clone(), s.dependent.clone(), fit_mg(&ds, &spec).map_err(wrap)?));
        }
        write_pmg_csv(&out.join("pmg.csv"), &pmg)?;
        arts.push("pmg.csv".into());
        write_pmg_units_csv(&out.join("pmg_units.csv"), &pmg)?;
        arts.push("pmg_units.csv".into());
        write_mg_csv(&out.join("mg.csv"), &mg)?;
        arts.push("mg.csv".into());
        Ok((pmg, mg))
    })?;

    let periods = (ds.start().to_string(), ds.end().to_string(), ds.n_periods());
    let inputs = ReportInputs {
        units: ds.units().to_vec(),
        periods: Some(periods),
        drop_report: Some(&drops),
        adf: Some(adf),
        unit_roots: Some(&unit_roots),
        lag_table: lag_table.as_ref(),
        lag_choice: run.choices.get("pvar.lag_choice").cloned(),
        pvar: Some(&fit),
        stability: Some(&stab),
        irf: Some(&irf),
        kao,
        pmg,
        mg,
        reference_half_life_years: cfg.report.reference_half_life_years,
    };
    run.stage("report", |out, arts| {
        std::fs::write(out.join(REPORT_FILE), render_report(&inputs))?;
        arts.push(REPORT_FILE.into());
        Ok(())
    })
}

/// The lag chosen by `criterion`.
pub fn chosen_lag(t: &LagSelectionTable, criterion: Criterion) -> usize {
    match criterion {
        Criterion::Mbic => t.chosen_mbic,
        Criterion::Maic => t.chosen_maic,
        Criterion::Mqic => t.chosen_mqic,
    }
}

fn used_variables(cfg: &PipelineConfig) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let all = cfg
        .unit_root
        .variables
        .iter()
        .chain(&cfg.pvar.variables)
        .chain(cfg.kao.systems.iter().flat_map(|s| std::iter::once(&s.dependent).chain(&s.regressors)))
        .chain(cfg.ardl.iter().flat_map(|s| std::iter::once(&s.dependent).chain(&s.regressors)));
    for v in all {
        if seen.insert(v.clone()) {
            out.push(v.clone());
        }
    }
    out
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}
