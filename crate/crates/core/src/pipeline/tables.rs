//! CSV writers for every table the pipeline emits. Each file starts with
//! `# ` comment lines naming the model settings that produced it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::ardl::{half_life, MgFit, PmgFit};
use crate::coint::KaoResult;
use crate::error::Result;
use crate::pvar::{IrfResult, LagSelectionTable, PvarFit, StabilityReport};
use crate::stats::{stars, two_sided_normal_p};
use crate::unit_root::{AdfConfig, UnitRootRow};

pub type CsvOut = csv::Writer<BufWriter<File>>;

pub fn csv_with_header(path: &Path, comments: &[String]) -> Result<CsvOut> {
    let mut w = BufWriter::new(File::create(path)?);
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    Ok(csv::Writer::from_writer(w))
}

fn f(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

pub fn pvar_header(fit: &PvarFit) -> Vec<String> {
    let mut lines = vec![
        format!("panel VAR: {} lag(s), {}", fit.lag_order(), fit.transform.label()),
        format!("variables (ordering): {}", fit.variables.join(", ")),
    ];
    if let Some((lo, hi)) = fit.instrument_lags {
        lines.push(format!(
            "instruments: levels lagged {lo}..{hi}; two-step GMM (2SLS first step); J = {:.4}",
            fit.j_statistic
        ));
    }
    lines.push(format!(
        "observations {}, units {}, moments {}, parameters {}",
        fit.n_obs, fit.n_units, fit.n_moments, fit.n_params
    ));
    lines
}

pub fn write_unit_root_csv(path: &Path, rows: &[UnitRootRow], adf: &AdfConfig) -> Result<()> {
    let mut w = csv_with_header(
        path,
        &[
            "Fisher-ADF panel unit root test: -2 sum ln p_i ~ chi2(2N); null = unit root in every unit".into(),
            format!("{} (MacKinnon response-surface p-values)", adf.describe()),
        ],
    )?;
    w.write_record([
        "variable",
        "level_statistic",
        "level_p_value",
        "difference_statistic",
        "difference_p_value",
        "units",
    ])?;
    for r in rows {
        w.write_record([
            r.variable.clone(),
            f(r.level.statistic),
            f(r.level.p_value),
            f(r.first_difference.statistic),
            f(r.first_difference.p_value),
            r.level.per_unit.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_lag_table_csv(path: &Path, table: &LagSelectionTable, variables: &[String]) -> Result<()> {
    let mut w = csv_with_header(
        path,
        &[
            format!(
                "lag selection by moment and model selection criteria; instruments lagged {}..{}; MQIC R = {}",
                table.instrument_lags.0, table.instrument_lags.1, table.mqic_r
            ),
            format!("variables: {}", variables.join(", ")),
            format!(
                "chosen lag: MBIC {}, MAIC {}, MQIC {}; '.' marks a lag that is not estimable",
                table.chosen_mbic, table.chosen_maic, table.chosen_mqic
            ),
        ],
    )?;
    w.write_record(["lag", "mbic", "maic", "mqic", "j_statistic", "j_p_value", "n_obs", "n_moments", "n_params", "chosen_by"])?;
    for lag in 1..=table.max_lag {
        match table.row(lag) {
            Some(r) => {
                let mut chosen = Vec::new();
                for (name, l) in [("MBIC", table.chosen_mbic), ("MAIC", table.chosen_maic), ("MQIC", table.chosen_mqic)] {
                    if l == lag {
                        chosen.push(name);
                    }
                }
                w.write_record([
                    lag.to_string(),
                    f(r.mbic),
                    f(r.maic),
                    f(r.mqic),
                    f(r.j_statistic),
                    f(r.j_p_value),
                    r.n_obs.to_string(),
                    r.n_moments.to_string(),
                    r.n_params.to_string(),
                    chosen.join(";"),
                ])?;
            }
            None => {
                let mut rec = vec![lag.to_string()];
                rec.extend(std::iter::repeat_n(".".to_string(), 8));
                rec.push(String::new());
                w.write_record(rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_coefficients_csv(path: &Path, fit: &PvarFit) -> Result<()> {
    let mut w = csv_with_header(path, &pvar_header(fit))?;
    w.write_record(["equation", "regressor", "estimate", "std_error", "z", "p_value", "stars"])?;
    for r in fit.coefficient_table() {
        w.write_record([
            r.equation.clone(),
            r.regressor.clone(),
            f(r.estimate),
            f(r.std_error),
            f(r.z),
            f(r.p_value),
            stars(r.p_value).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_eigenvalues_csv(path: &Path, fit: &PvarFit, report: &StabilityReport) -> Result<()> {
    let mut header = pvar_header(fit);
    header.push(format!(
        "companion eigenvalues; stable (all moduli < 1): {}",
        report.stable
    ));
    let mut w = csv_with_header(path, &header)?;
    w.write_record(["real", "imaginary", "modulus"])?;
    for e in &report.eigenvalues {
        w.write_record([f(e.re), f(e.im), f(e.modulus)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_irf_csv(path: &Path, irf: &IrfResult, unit_shock: bool, header: &[String]) -> Result<()> {
    let mut lines = header.to_vec();
    lines.push(format!(
        "orthogonalized impulse responses, recursive (Cholesky) identification in the order {}",
        irf.variables.join(", ")
    ));
    lines.push(if unit_shock {
        "normalization: unit impact of the shocked variable on itself".into()
    } else {
        "normalization: one standard deviation orthogonalized shock".into()
    });
    lines.push(format!(
        "bands: {:.0}% percentile, {} Monte Carlo coefficient draws, seed {}",
        irf.band_level * 100.0,
        irf.n_draws,
        irf.seed
    ));
    let mut w = csv_with_header(path, &lines)?;
    w.write_record(["response", "shock", "horizon", "point", "lower", "upper"])?;
    let m = irf.variables.len();
    for r in 0..m {
        for s in 0..m {
            for h in 0..=irf.horizon {
                let (p, lo, hi) = if unit_shock {
                    irf.unit_shock(r, s, h)
                } else {
                    (irf.point(r, s, h), irf.lower(r, s, h), irf.upper(r, s, h))
                };
                w.write_record([irf.variables[r].clone(), irf.variables[s].clone(), h.to_string(), f(p), f(lo), f(hi)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub struct KaoRow<'a> {
    pub system: &'a str,
    pub dependent: &'a str,
    pub regressors: &'a [String],
    pub result: &'a KaoResult,
}

pub fn write_kao_csv(path: &Path, rows: &[KaoRow<'_>]) -> Result<()> {
    let variant = rows.first().map(|r| r.result.variant).unwrap_or(crate::coint::KAO_VARIANT);
    let mut w = csv_with_header(
        path,
        &[
            format!("Kao panel cointegration test: {variant}; null = no cointegration; left-tail N(0,1) p-value"),
            "long-run variances: Bartlett kernel, Newey-West bandwidth, on per-unit demeaned first differences".into(),
        ],
    )?;
    w.write_record(["system", "dependent", "regressors", "statistic", "p_value", "stars", "residual_lags", "bandwidth", "units", "periods"])?;
    for r in rows {
        w.write_record([
            r.system.to_string(),
            r.dependent.to_string(),
            r.regressors.join(";"),
            f(r.result.statistic),
            f(r.result.p_value),
            stars(r.result.p_value).to_string(),
            r.result.residual_lags.to_string(),
            r.result.bandwidth.to_string(),
            r.result.n_units.to_string(),
            r.result.n_periods.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn coef_record(system: &str, term: &str, coef: f64, se: f64) -> Vec<String> {
    let p = if se > 0.0 { two_sided_normal_p(coef / se) } else { f64::NAN };
    let star = if p.is_nan() { "" } else { stars(p) };
    vec![
        system.to_string(),
        term.to_string(),
        f(coef),
        f(se),
        f(p),
        star.to_string(),
        format!("{coef:.4}{star} ({se:.4})"),
    ]
}

const COEF_COLUMNS: [&str; 7] = ["system", "term", "coefficient", "std_error", "p_value", "stars", "display"];

fn ardl_notes() -> Vec<String> {
    vec![
        "panel ARDL in error-correction form: d.y = phi (y(t-1) - theta'x(t)) + lagged differences + unit intercept".into(),
        "theta: long-run coefficients; ect: error-correction (adjustment) coefficient; lagged differences: short-run dynamics".into(),
        "stars: * 10%, ** 5%, *** 1% (two-sided normal)".into(),
    ]
}

pub fn write_pmg_csv(path: &Path, fits: &[(String, String, PmgFit)]) -> Result<()> {
    let mut header = vec!["Pooled Mean Group estimates (common long-run coefficients, concentrated likelihood, Newton iterations)".to_string()];
    header.extend(ardl_notes());
    header.push("ect: unweighted mean of unit error-correction coefficients, standard error sd/sqrt(N)".into());
    let mut w = csv_with_header(path, &header)?;
    w.write_record(COEF_COLUMNS)?;
    for (system, _, fit) in fits {
        w.write_record(coef_record(system, "ect", fit.pooled_phi, fit.pooled_phi_se))?;
        for (j, r) in fit.regressors.iter().enumerate() {
            w.write_record(coef_record(system, r, fit.theta[j], fit.theta_se[j]))?;
        }
        for (name, m, se) in &fit.short_run_mean {
            w.write_record(coef_record(system, &format!("short_run:{name}"), *m, *se))?;
        }
        let hl = half_life(fit.pooled_phi).map(f).unwrap_or_else(|_| "NA".into());
        w.write_record([system.clone(), "half_life_months".into(), hl, String::new(), String::new(), String::new(), String::new()])?;
        w.write_record([system.clone(), "log_likelihood".into(), f(fit.log_likelihood), String::new(), String::new(), String::new(), String::new()])?;
        w.write_record([system.clone(), "iterations".into(), fit.iterations.to_string(), String::new(), String::new(), String::new(), String::new()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pmg_units_csv(path: &Path, fits: &[(String, String, PmgFit)]) -> Result<()> {
    let mut w = csv_with_header(path, &["unit error-correction coefficients under the common long-run vector".into()])?;
    w.write_record(["system", "unit", "phi", "phi_se", "half_life_months", "n_obs"])?;
    for (system, _, fit) in fits {
        for u in &fit.units {
            let hl = half_life(u.phi).map(f).unwrap_or_else(|_| "NA".into());
            w.write_record([system.clone(), u.unit.clone(), f(u.phi), f(u.phi_se), hl, u.n_obs.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_mg_csv(path: &Path, fits: &[(String, String, MgFit)]) -> Result<()> {
    let mut header = vec!["Mean Group estimates: unweighted means of unit ARDL coefficients, standard error sd/sqrt(N)".to_string()];
    header.extend(ardl_notes());
    let mut w = csv_with_header(path, &header)?;
    w.write_record(COEF_COLUMNS)?;
    for (system, _, fit) in fits {
        w.write_record(coef_record(system, "ect", fit.phi_mg, fit.phi_se))?;
        for (j, r) in fit.regressors.iter().enumerate() {
            w.write_record(coef_record(system, r, fit.theta_mg[j], fit.se[j]))?;
        }
        let flagged: Vec<&str> = fit
            .per_unit
            .iter()
            .filter(|u| u.non_converging)
            .map(|u| u.unit.as_str())
            .collect();
        w.write_record([system.clone(), "units".into(), fit.per_unit.len().to_string(), String::new(), String::new(), String::new(), String::new()])?;
        w.write_record([
            system.clone(),
            "non_converging_units".into(),
            flagged.join(";"),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
