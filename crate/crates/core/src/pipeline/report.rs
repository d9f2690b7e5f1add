//! The human-readable `report.md` summarizing a pipeline run.

use std::fmt::Write;

use serde::Serialize;

use crate::ardl::{half_life, MgFit, PmgFit};
use crate::coint::KaoResult;
use crate::panel::DropReport;
use crate::pvar::{IrfResult, LagSelectionTable, PvarFit, StabilityReport};
use crate::stats::stars;
use crate::unit_root::{AdfConfig, UnitRootRow};

/// A half-life compared against a reference range in years.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfLifeCheck {
    pub label: String,
    pub phi: f64,
    /// `None` when `phi` is outside `(-1, 0)` and no half-life exists.
    pub months: Option<f64>,
    pub years: Option<f64>,
    pub within_reference: bool,
}

pub fn half_life_check(label: &str, phi: f64, reference_years: [f64; 2]) -> HalfLifeCheck {
    let months = half_life(phi).ok();
    let years = months.map(|m| m / 12.0);
    let within_reference = years
        .map(|y| y >= reference_years[0] && y <= reference_years[1])
        .unwrap_or(false);
    HalfLifeCheck {
        label: label.to_string(),
        phi,
        months,
        years,
        within_reference,
    }
}

/// Markdown table of half-lives with a flag whenever any falls outside the
/// reference range.
pub fn half_life_section(checks: &[HalfLifeCheck], reference_years: [f64; 2]) -> String {
    let mut s = String::new();
    let [lo, hi] = reference_years;
    let _ = writeln!(
        s,
        "Half-life of a deviation from the long-run relation, ln(0.5) / ln(1 + ect), in months. \
         Reference range: {lo} to {hi} years.\n"
    );
    let _ = writeln!(s, "| system | ect | half-life (months) | half-life (years) | within reference |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for c in checks {
        let (m, y) = match (c.months, c.years) {
            (Some(m), Some(y)) => (format!("{m:.1}"), format!("{y:.2}")),
            _ => ("n/a".into(), "n/a".into()),
        };
        let _ = writeln!(
            s,
            "| {} | {:.4} | {m} | {y} | {} |",
            c.label,
            c.phi,
            if c.within_reference { "yes" } else { "no" }
        );
    }
    let outside: Vec<&str> = checks
        .iter()
        .filter(|c| !c.within_reference)
        .map(|c| c.label.as_str())
        .collect();
    if outside.is_empty() {
        let _ = writeln!(s, "\nAll half-lives fall inside the reference range.");
    } else {
        let _ = writeln!(
            s,
            "\n**Flag:** the half-lives implied by the error-correction coefficients of {} fall outside \
             the reference range of {lo} to {hi} years. Both figures are shown; the discrepancy is not resolved here.",
            outside.join(", ")
        );
    }
    s
}

pub const CHOLESKY_NOTE: &str = "Shocks are identified recursively (Cholesky factor of the residual covariance) in the \
ordering shown. This does not address simultaneity or reverse causality among the variables, and responses may change \
under a different ordering.";

pub const ECM_LABEL_NOTE: &str = "Labels follow the standard panel error-correction convention: the error-correction \
term (ect) is the speed of adjustment toward the long-run relation, theta holds the long-run coefficients, and the \
lagged differences are short-run dynamics. Some presentations of this model swap the short-run and long-run labels \
of the adjustment term and the lagged differences; the estimates are the same, only the naming differs.";

/// Everything the report summarizes. Stages that did not run stay `None`.
#[derive(Default)]
pub struct ReportInputs<'a> {
    pub units: Vec<String>,
    pub periods: Option<(String, String, usize)>,
    pub drop_report: Option<&'a DropReport>,
    pub adf: Option<AdfConfig>,
    pub unit_roots: Option<&'a [UnitRootRow]>,
    pub lag_table: Option<&'a LagSelectionTable>,
    pub lag_choice: Option<String>,
    pub pvar: Option<&'a PvarFit>,
    pub stability: Option<&'a StabilityReport>,
    pub irf: Option<&'a IrfResult>,
    pub kao: Vec<(String, KaoResult)>,
    pub pmg: Vec<(String, String, PmgFit)>,
    pub mg: Vec<(String, String, MgFit)>,
    pub reference_half_life_years: [f64; 2],
}

pub fn render_report(r: &ReportInputs<'_>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Sectoral asset-price channel: pipeline report\n");

    let _ = writeln!(s, "## Data\n");
    let _ = writeln!(s, "- units: {}", r.units.join(", "));
    if let Some((a, b, n)) = &r.periods {
        let _ = writeln!(s, "- analysis sample: {a} to {b} ({n} months)");
    }
    if let Some(d) = r.drop_report {
        let _ = writeln!(
            s,
            "- balancing dropped {} unit(s), {} period(s), {} observed cell(s)",
            d.dropped_units.len(),
            d.dropped_periods.len(),
            d.dropped_cells
        );
    }

    if let (Some(adf), Some(rows)) = (r.adf, r.unit_roots) {
        let _ = writeln!(s, "\n## Panel unit roots (Fisher-ADF)\n");
        let _ = writeln!(s, "Test settings: {}.\n", adf.describe());
        let _ = writeln!(s, "| variable | level p | first-difference p |");
        let _ = writeln!(s, "|---|---|---|");
        for row in rows {
            let _ = writeln!(
                s,
                "| {} | {:.4}{} | {:.4}{} |",
                row.variable,
                row.level.p_value,
                stars(row.level.p_value),
                row.first_difference.p_value,
                stars(row.first_difference.p_value)
            );
        }
    }

    if let Some(t) = r.lag_table {
        let _ = writeln!(s, "\n## Lag selection\n");
        let _ = writeln!(
            s,
            "Moment and model selection criteria with instruments lagged {}..{} and MQIC constant {}.\n",
            t.instrument_lags.0, t.instrument_lags.1, t.mqic_r
        );
        let _ = writeln!(s, "| lag | MBIC | MAIC | MQIC | J | J p-value |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        for lag in 1..=t.max_lag {
            match t.row(lag) {
                Some(row) => {
                    let _ = writeln!(
                        s,
                        "| {lag} | {:.3} | {:.3} | {:.3} | {:.3} | {:.4} |",
                        row.mbic, row.maic, row.mqic, row.j_statistic, row.j_p_value
                    );
                }
                None => {
                    let _ = writeln!(s, "| {lag} | . | . | . | . | . |");
                }
            }
        }
        let _ = writeln!(
            s,
            "\nChosen: MBIC {}, MAIC {}, MQIC {}.",
            t.chosen_mbic, t.chosen_maic, t.chosen_mqic
        );
    }

    if let Some(fit) = r.pvar {
        let _ = writeln!(s, "\n## Panel VAR\n");
        let _ = writeln!(s, "- variables: {}", fit.variables.join(", "));
        let _ = writeln!(s, "- lags: {}", fit.lag_order());
        if let Some(c) = &r.lag_choice {
            let _ = writeln!(s, "- lag choice: {c}");
        }
        let _ = writeln!(s, "- estimator: {}", fit.transform.label());
        if let Some((lo, hi)) = fit.instrument_lags {
            let _ = writeln!(s, "- instruments: levels lagged {lo}..{hi}; Hansen J = {:.3}", fit.j_statistic);
        }
        let _ = writeln!(s, "- observations: {} over {} units", fit.n_obs, fit.n_units);
        if let Some(st) = r.stability {
            let max = st.eigenvalues.first().map(|e| e.modulus).unwrap_or(0.0);
            let _ = writeln!(
                s,
                "- stability: largest companion modulus {max:.4}; {}",
                if st.stable { "all eigenvalues inside the unit circle" } else { "**NOT stable**" }
            );
        }
    }

    if let Some(irf) = r.irf {
        let _ = writeln!(s, "\n## Impulse responses\n");
        let _ = writeln!(s, "Ordering: {}.\n", irf.variables.join(" -> "));
        let _ = writeln!(s, "{CHOLESKY_NOTE}\n");
        let _ = writeln!(
            s,
            "Two normalizations are written: `irf.csv` scales each shock to one standard deviation of the \
             orthogonalized innovation; `irf_unit.csv` scales it to a unit impact on the shocked variable. \
             Bands are {:.0}% percentile intervals from {} Monte Carlo coefficient draws (seed {}), horizon {} months.",
            irf.band_level * 100.0,
            irf.n_draws,
            irf.seed,
            irf.horizon
        );
    }

    if !r.kao.is_empty() {
        let _ = writeln!(s, "\n## Panel cointegration (Kao)\n");
        let _ = writeln!(s, "Variant: {}. Null: no cointegration.\n", r.kao[0].1.variant);
        let _ = writeln!(s, "| system | statistic | p-value |");
        let _ = writeln!(s, "|---|---|---|");
        for (name, k) in &r.kao {
            let _ = writeln!(s, "| {name} | {:.3} | {:.4}{} |", k.statistic, k.p_value, stars(k.p_value));
        }
    }

    if !r.pmg.is_empty() || !r.mg.is_empty() {
        let _ = writeln!(s, "\n## Panel ARDL (PMG and MG)\n");
        let _ = writeln!(s, "{ECM_LABEL_NOTE}\n");
        let _ = writeln!(s, "Standard errors in parentheses; * 10%, ** 5%, *** 1%.\n");
        for (name, dep, fit) in &r.pmg {
            let _ = writeln!(s, "### {name}: PMG, dependent {dep}\n");
            let _ = writeln!(s, "| term | estimate |");
            let _ = writeln!(s, "|---|---|");
            let _ = writeln!(s, "| ect | {} |", cell(fit.pooled_phi, fit.pooled_phi_se));
            for (j, reg) in fit.regressors.iter().enumerate() {
                let _ = writeln!(s, "| {reg} | {} |", cell(fit.theta[j], fit.theta_se[j]));
            }
            let _ = writeln!(s, "\nLog-likelihood {:.3} after {} iterations.", fit.log_likelihood, fit.iterations);
            if fit.saddle_suspected {
                let _ = writeln!(s, "\n**Warning:** the Hessian at the optimum is not negative definite.");
            }
            let _ = writeln!(s);
        }
        for (name, dep, fit) in &r.mg {
            let _ = writeln!(s, "### {name}: MG, dependent {dep}\n");
            let _ = writeln!(s, "| term | estimate |");
            let _ = writeln!(s, "|---|---|");
            let _ = writeln!(s, "| ect | {} |", cell(fit.phi_mg, fit.phi_se));
            for (j, reg) in fit.regressors.iter().enumerate() {
                let _ = writeln!(s, "| {reg} | {} |", cell(fit.theta_mg[j], fit.se[j]));
            }
            let flagged: Vec<&str> = fit
                .per_unit
                .iter()
                .filter(|u| u.non_converging)
                .map(|u| u.unit.as_str())
                .collect();
            if !flagged.is_empty() {
                let _ = writeln!(s, "\nUnits without significant error correction: {}.", flagged.join(", "));
            }
            let _ = writeln!(s);
        }
        if !r.pmg.is_empty() {
            let _ = writeln!(s, "### Half-lives\n");
            let checks: Vec<HalfLifeCheck> = r
                .pmg
                .iter()
                .map(|(name, _, fit)| half_life_check(name, fit.pooled_phi, r.reference_half_life_years))
                .collect();
            s.push_str(&half_life_section(&checks, r.reference_half_life_years));
        }
    }
    s
}

fn cell(coef: f64, se: f64) -> String {
    let p = crate::stats::two_sided_normal_p(coef / se);
    let star = if p.is_nan() { "" } else { stars(p) };
    format!("{coef:.4}{star} ({se:.4})")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_life_flag() {
        let range = [1.5, 3.0];
        let man = half_life_check("MAN", -0.0301, range);
        assert!(man.within_reference);
        let elec = half_life_check("ELEC", -0.0549, range);
        assert!(!elec.within_reference);
        let text = half_life_section(&[man, elec], range);
        assert!(text.contains("**Flag:**") && text.contains("ELEC"));
        let none = half_life_check("X", 0.1, range);
        assert_eq!(none.months, None);
        assert!(!none.within_reference);
    }
}
