//! `sectorvar` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use sectorvar::ardl::{fit_mg, fit_pmg, ArdlSpec};
use sectorvar::coint::kao_test;
use sectorvar::index::{build_sector_indices, load_constituents, write_index_csv, IndexConfig, Reweighting};
use sectorvar::panel::{load_panel_csv, ColumnMapping, PanelDataset};
use sectorvar::pipeline::{
    self, eigenvalue_svg, irf_svg, pvar_header, write_coefficients_csv, write_eigenvalues_csv, write_irf_csv,
    write_kao_csv, write_lag_table_csv, write_mg_csv, write_pmg_csv, write_pmg_units_csv, write_unit_root_csv,
    KaoRow, PipelineConfig,
};
use sectorvar::pvar::{fit_pvar, orthogonalized_irf, select_lag, IrfConfig, MmscConfig, PvarFit, PvarSpec, PvarTransform};
use sectorvar::simulate::{
    generate_with_truth, write_sector_fixture, write_simulated_panel, write_truth_csv, DgpConfig, DgpKind, EcmParams,
};
use sectorvar::time::YearMonth;
use sectorvar::unit_root::{fisher_adf, levels_and_differences, AdfConfig, Deterministic, LagRule};

#[derive(Parser)]
#[command(name = "sectorvar", version, about = "Panel econometrics for sectoral stock indices")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build regional cap-weighted sector indices from constituent CSVs.
    BuildIndex(BuildIndexArgs),
    /// Fisher-ADF panel unit-root test.
    UnitRoot(UnitRootArgs),
    /// Panel VAR estimation, lag selection and impulse responses.
    Pvar {
        #[command(subcommand)]
        command: PvarCommand,
    },
    /// Kao residual-based panel cointegration test.
    Kao(KaoArgs),
    /// Pooled Mean Group panel ARDL.
    Pmg(ArdlArgs),
    /// Mean Group panel ARDL.
    Mg(ArdlArgs),
    /// Simulate a panel with known parameters.
    Simulate(SimulateArgs),
    /// Run the full pipeline from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the report and status of a finished pipeline run.
    Report {
        /// Output directory of a pipeline run.
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Long-format panel CSV (`unit,date,variable,value`).
    #[arg(long)]
    data: PathBuf,
}

impl DataArgs {
    fn load(&self) -> Result<PanelDataset> {
        load_panel_csv(&self.data, &ColumnMapping::default())
            .with_context(|| format!("reading {}", self.data.display()))
    }
}

#[derive(Args)]
struct BuildIndexArgs {
    #[arg(long)]
    prices: PathBuf,
    #[arg(long)]
    shares: PathBuf,
    #[arg(long)]
    sectors: PathBuf,
    /// Base month (index = 100), e.g. 2010-01.
    #[arg(long)]
    base: YearMonth,
    #[arg(long, value_enum, default_value_t = ReweightingArg::Monthly)]
    reweighting: ReweightingArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReweightingArg {
    Monthly,
    FixedBase,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeterministicArg {
    None,
    Constant,
    ConstantTrend,
}

#[derive(Clone, Copy, ValueEnum)]
enum LagRuleArg {
    Fixed,
    Aic,
}

#[derive(Args)]
struct UnitRootArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Variables to test (comma-separated).
    #[arg(long = "var", value_delimiter = ',', required = true)]
    vars: Vec<String>,
    /// Also test first differences.
    #[arg(long)]
    diff: bool,
    #[arg(long, value_enum, default_value_t = DeterministicArg::Constant)]
    deterministic: DeterministicArg,
    #[arg(long, default_value_t = 12)]
    max_lags: usize,
    #[arg(long, value_enum, default_value_t = LagRuleArg::Aic)]
    lag_rule: LagRuleArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PvarModelArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Variables in Cholesky order (comma-separated).
    #[arg(long, value_delimiter = ',', required = true)]
    vars: Vec<String>,
    #[arg(long, value_enum, default_value_t = TransformArg::Fod)]
    transform: TransformArg,
    /// Instrument lag range, e.g. 1,4.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1usize, 4])]
    instrument_lags: Vec<usize>,
}

impl PvarModelArgs {
    fn spec(&self, lags: usize) -> PvarSpec {
        PvarSpec::new(&self.vars, lags)
            .with_transform(match self.transform {
                TransformArg::Fod => PvarTransform::ForwardOrthogonalDeviations,
                TransformArg::Within => PvarTransform::WithinDemean,
            })
            .with_instrument_lags(self.instrument_lags[0], self.instrument_lags[1])
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformArg {
    /// Forward orthogonal deviations with GMM.
    Fod,
    /// Within demeaning with OLS.
    Within,
}

#[derive(Subcommand)]
enum PvarCommand {
    /// Estimate the panel VAR; writes coefficients and eigenvalues.
    Fit {
        #[command(flatten)]
        model: PvarModelArgs,
        #[arg(long, default_value_t = 2)]
        lags: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Tabulate MBIC/MAIC/MQIC over candidate lags.
    SelectLag {
        #[command(flatten)]
        model: PvarModelArgs,
        #[arg(long = "max", default_value_t = 4)]
        max_lag: usize,
        #[arg(long, default_value_t = 2.0)]
        mqic_r: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Orthogonalized impulse responses with Monte Carlo bands.
    Irf {
        #[command(flatten)]
        model: PvarModelArgs,
        #[arg(long, default_value_t = 2)]
        lags: usize,
        #[arg(long, default_value_t = 24)]
        horizon: usize,
        #[arg(long, default_value_t = 500)]
        draws: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.90)]
        band: f64,
        /// Cholesky ordering; defaults to the order of --vars.
        #[arg(long, value_delimiter = ',')]
        ordering: Vec<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct KaoArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    dep: String,
    #[arg(long, value_delimiter = ',', required = true)]
    regressors: Vec<String>,
    #[arg(long, default_value_t = 1)]
    residual_lags: usize,
    /// System label in the output.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ArdlArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    dep: String,
    #[arg(long, value_delimiter = ',', required = true)]
    regressors: Vec<String>,
    /// Lag order of the dependent variable.
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Lag order per regressor (comma-separated); defaults to 1 each.
    #[arg(long, value_delimiter = ',')]
    q: Vec<usize>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

impl ArdlArgs {
    fn spec(&self) -> ArdlSpec {
        let q = if self.q.is_empty() { vec![1; self.regressors.len()] } else { self.q.clone() };
        ArdlSpec::new(&self.dep, &self.regressors).with_lags(self.p, q)
    }

    fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.dep.clone())
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// panel_var, cointegrated_ecm, independent_random_walks, white_noise or
    /// sector_fixture (the constituent and macro CSVs for `run`).
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 6)]
    units: usize,
    #[arg(long, default_value_t = 165)]
    periods: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of variables (panel_var, white_noise, random walks) or
    /// regressors (cointegrated_ecm).
    #[arg(long, default_value_t = 2)]
    vars: usize,
    /// Own-lag coefficient of the panel_var DGP.
    #[arg(long, default_value_t = 0.5)]
    ar: f64,
    /// Long-run coefficient of every regressor (cointegrated_ecm).
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Error-correction coefficient (cointegrated_ecm).
    #[arg(long, default_value_t = -0.2, allow_hyphen_values = true)]
    phi: f64,
    /// Output CSV; the true-parameter sidecar goes next to it as
    /// `<stem>_truth.csv`. For sector_fixture, an output directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::BuildIndex(a) => build_index(a).context("stage 'build-index'"),
        Command::UnitRoot(a) => unit_root(a).context("stage 'unit-root'"),
        Command::Pvar { command } => pvar(command).context("stage 'pvar'"),
        Command::Kao(a) => kao(a).context("stage 'kao'"),
        Command::Pmg(a) => pmg(a).context("stage 'pmg'"),
        Command::Mg(a) => mg(a).context("stage 'mg'"),
        Command::Simulate(a) => simulate(a).context("stage 'simulate'"),
        Command::Run { config } => {
            let cfg = PipelineConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let run = pipeline::run_pipeline(&cfg)?;
            println!("pipeline complete; outputs in {}", run.output_dir.display());
            Ok(())
        }
        Command::Report { dir } => report(&dir),
    }
}

fn build_index(a: BuildIndexArgs) -> Result<()> {
    let constituents = load_constituents(&a.prices, &a.shares, &a.sectors)?;
    let reweighting = match a.reweighting {
        ReweightingArg::Monthly => Reweighting::Monthly,
        ReweightingArg::FixedBase => Reweighting::FixedBase,
    };
    let indices = build_sector_indices(&constituents, a.base, IndexConfig { reweighting })?;
    let series: Vec<_> = indices.values().collect();
    write_index_csv(
        std::fs::File::create(&a.out)?,
        &series,
        &[format!(
            "regional capitalization-weighted sector indices, {} = 100, {reweighting:?} reweighting",
            a.base
        )],
    )?;
    Ok(())
}

fn unit_root(a: UnitRootArgs) -> Result<()> {
    let ds = a.data.load()?;
    let cfg = AdfConfig {
        deterministic: match a.deterministic {
            DeterministicArg::None => Deterministic::None,
            DeterministicArg::Constant => Deterministic::Constant,
            DeterministicArg::ConstantTrend => Deterministic::ConstantTrend,
        },
        max_lags: a.max_lags,
        lag_rule: match a.lag_rule {
            LagRuleArg::Fixed => LagRule::Fixed,
            LagRuleArg::Aic => LagRule::Aic,
        },
    };
    if a.diff {
        let rows = a
            .vars
            .iter()
            .map(|v| levels_and_differences(&ds, v, &cfg))
            .collect::<sectorvar::error::Result<Vec<_>>>()?;
        write_unit_root_csv(&a.out, &rows, &cfg)?;
    } else {
        let mut w = pipeline::csv_with_header(
            &a.out,
            &[
                "Fisher-ADF panel unit root test: -2 sum ln p_i ~ chi2(2N); null = unit root in every unit".into(),
                format!("{} (MacKinnon response-surface p-values)", cfg.describe()),
            ],
        )?;
        w.write_record(["variable", "level_statistic", "level_p_value", "units"])?;
        for v in &a.vars {
            let r = fisher_adf(&ds, v, &cfg)?;
            w.write_record([v.clone(), r.statistic.to_string(), r.p_value.to_string(), r.per_unit.len().to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn write_fit(fit: &PvarFit, dir: &Path) -> Result<()> {
    let stab = fit.stability();
    write_coefficients_csv(&dir.join("pvar_coefficients.csv"), fit)?;
    write_eigenvalues_csv(&dir.join("eigenvalues.csv"), fit, &stab)?;
    let title = format!("Companion eigenvalues, PVAR({})", fit.lag_order());
    std::fs::write(dir.join("eigenvalues.svg"), eigenvalue_svg(&stab.eigenvalues, &title))?;
    if !stab.stable {
        eprintln!("warning: the estimated panel VAR is not stable");
    }
    Ok(())
}

fn pvar(command: PvarCommand) -> Result<()> {
    match command {
        PvarCommand::Fit { model, lags, out_dir } => {
            let ds = model.data.load()?;
            let fit = fit_pvar(&ds, &model.spec(lags))?;
            std::fs::create_dir_all(&out_dir)?;
            write_fit(&fit, &out_dir)
        }
        PvarCommand::SelectLag {
            model,
            max_lag,
            mqic_r,
            out,
        } => {
            let ds = model.data.load()?;
            let table = select_lag(&ds, &model.spec(1), max_lag, MmscConfig { mqic_r })?;
            write_lag_table_csv(&out, &table, &model.vars)?;
            println!(
                "chosen lag: MBIC {}, MAIC {}, MQIC {}",
                table.chosen_mbic, table.chosen_maic, table.chosen_mqic
            );
            Ok(())
        }
        PvarCommand::Irf {
            model,
            lags,
            horizon,
            draws,
            seed,
            band,
            ordering,
            out_dir,
        } => {
            let ds = model.data.load()?;
            let fit = fit_pvar(&ds, &model.spec(lags))?;
            let ordering = if ordering.is_empty() { model.vars.clone() } else { ordering };
            let cfg = IrfConfig {
                horizon,
                n_draws: draws,
                seed,
                band_level: band,
            };
            let irf = orthogonalized_irf(&fit, &ordering, &cfg)?;
            std::fs::create_dir_all(&out_dir)?;
            let header = pvar_header(&fit);
            write_irf_csv(&out_dir.join("irf.csv"), &irf, false, &header)?;
            write_irf_csv(&out_dir.join("irf_unit.csv"), &irf, true, &header)?;
            for (s, name) in irf.variables.iter().enumerate() {
                std::fs::write(out_dir.join(format!("irf_shock_{name}.svg")), irf_svg(&irf, s, false))?;
            }
            Ok(())
        }
    }
}

fn kao(a: KaoArgs) -> Result<()> {
    let ds = a.data.load()?;
    let r = kao_test(&ds, &a.dep, &a.regressors, a.residual_lags)?;
    let name = a.name.clone().unwrap_or_else(|| a.dep.clone());
    write_kao_csv(
        &a.out,
        &[KaoRow {
            system: &name,
            dependent: &a.dep,
            regressors: &a.regressors,
            result: &r,
        }],
    )?;
    println!("Kao statistic {:.4}, p-value {:.4}", r.statistic, r.p_value);
    Ok(())
}

fn pmg(a: ArdlArgs) -> Result<()> {
    let ds = a.data.load()?;
    let fit = fit_pmg(&ds, &a.spec())?;
    std::fs::create_dir_all(&a.out_dir)?;
    let rows = vec![(a.label(), a.dep.clone(), fit)];
    write_pmg_csv(&a.out_dir.join("pmg.csv"), &rows)?;
    write_pmg_units_csv(&a.out_dir.join("pmg_units.csv"), &rows)?;
    Ok(())
}

fn mg(a: ArdlArgs) -> Result<()> {
    let ds = a.data.load()?;
    let fit = fit_mg(&ds, &a.spec())?;
    std::fs::create_dir_all(&a.out_dir)?;
    write_mg_csv(&a.out_dir.join("mg.csv"), &[(a.label(), a.dep.clone(), fit)])?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    if a.kind == "sector_fixture" {
        for p in write_sector_fixture(&a.out, a.seed)? {
            println!("wrote {}", p.display());
        }
        return Ok(());
    }
    let kind: DgpKind = a.kind.parse().map_err(anyhow::Error::msg)?;
    let cfg = match kind {
        DgpKind::PanelVar => DgpConfig::panel_var(
            vec![DMatrix::identity(a.vars, a.vars) * a.ar],
            DMatrix::identity(a.vars, a.vars),
            a.units,
            a.periods,
            a.seed,
        ),
        DgpKind::CointegratedEcm => {
            DgpConfig::cointegrated_ecm(EcmParams::new(vec![a.theta; a.vars], a.phi), a.units, a.periods, a.seed)
        }
        DgpKind::IndependentRandomWalks => {
            DgpConfig::independent_random_walks(a.vars, a.units, a.periods, a.seed)
        }
        DgpKind::WhiteNoise => DgpConfig::white_noise(a.vars, a.units, a.periods, a.seed),
    };
    let (ds, truth) = generate_with_truth(&cfg)?;
    write_simulated_panel(&a.out, &cfg, &ds)?;
    let stem = a
        .out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "panel".into());
    let truth_path = a.out.with_file_name(format!("{stem}_truth.csv"));
    write_truth_csv(&truth_path, &cfg, &truth)?;
    println!("wrote {} and {}", a.out.display(), truth_path.display());
    Ok(())
}

fn report(dir: &Path) -> Result<()> {
    let manifest_path = dir.join(pipeline::MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest_path)
        .with_context(|| format!("reading {}", manifest_path.display()))?;
    let manifest: serde_json::Value = serde_json::from_str(&text)?;
    let status = manifest["status"].as_str().unwrap_or("unknown");
    if let Ok(report) = std::fs::read_to_string(dir.join(pipeline::REPORT_FILE)) {
        print!("{report}");
    }
    println!("\nstatus: {status}");
    if let Some(stages) = manifest["stages"].as_array() {
        for s in stages {
            println!(
                "  {:<14} {:<9} {}",
                s["name"].as_str().unwrap_or("?"),
                s["status"].as_str().unwrap_or("?"),
                s["artifacts"]
                    .as_array()
                    .map(|a| a.iter().filter_map(|v| v.as_str()).collect::<Vec<_>>().join(", "))
                    .unwrap_or_default()
            );
        }
    }
    if status != "complete" {
        bail!(
            "run failed in stage '{}': {}",
            manifest["failed_stage"].as_str().unwrap_or("?"),
            manifest["error"].as_str().unwrap_or("?")
        );
    }
    Ok(())
}
