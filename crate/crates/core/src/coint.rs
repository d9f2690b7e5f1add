//! Kao residual-based panel cointegration test, ADF-type statistic.
//!
//! Under the null of no cointegration the residuals of the pooled
//! fixed-effect regression of `y` on `x` carry a unit root. The pooled ADF
//! t-ratio on those residuals is recentred and rescaled with the
//! conditional short-run and long-run variances of `Δy` given `Δx`, giving
//! an asymptotically standard normal statistic with a left-tail rejection.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{ols, spd_inverse};
use crate::panel::PanelDataset;
use crate::stats::norm_cdf;

pub const KAO_VARIANT: &str = "Kao ADF-type t, individual intercepts, no trend";

/// Recentring factor `sqrt(6N) σ_v / (2 σ_0v)` uses this constant: the limit
/// of the pooled Dickey-Fuller t-ratio mean under the null is
/// `-sqrt(6N) σ_v / (2 σ_0v)` after fixed-effect demeaning.
const MEAN_SCALE: f64 = 6.0;
/// Variance terms `σ_0v² / (2 σ_v²) + 3 σ_v² / (10 σ_0v²)` of the same limit.
const VAR_LONG_RUN_WEIGHT: f64 = 0.5;
const VAR_SHORT_RUN_WEIGHT: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KaoResult {
    pub statistic: f64,
    /// Left-tail standard normal probability.
    pub p_value: f64,
    pub t_adf: f64,
    pub rho: f64,
    pub sigma2_v: f64,
    pub sigma2_0v: f64,
    pub residual_lags: usize,
    pub bandwidth: usize,
    pub n_units: usize,
    pub n_periods: usize,
    pub variant: &'static str,
}

/// Newey-West automatic bandwidth `floor(4 (T/100)^(2/9))`.
pub fn bartlett_bandwidth(t: usize) -> usize {
    (4.0 * (t as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Pooled long-run covariance with Bartlett weights of per-unit series
/// (rows are periods). Inputs are assumed demeaned.
fn long_run_cov(blocks: &[DMatrix<f64>], bandwidth: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = blocks[0].ncols();
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let gamma = |lag: usize| {
        let mut g = DMatrix::zeros(k, k);
        for b in blocks {
            for t in lag..b.nrows() {
                g += b.row(t).transpose() * b.row(t - lag);
            }
        }
        g / n as f64
    };
    let g0 = gamma(0);
    let mut omega = g0.clone();
    for j in 1..=bandwidth {
        let w = 1.0 - j as f64 / (bandwidth as f64 + 1.0);
        let gj = gamma(j);
        omega += (&gj + gj.transpose()) * w;
    }
    (g0, omega)
}

/// Variance of the first component conditional on the rest, `a - b'C^{-1}b`.
fn conditional_variance(m: &DMatrix<f64>) -> Result<f64> {
    let k = m.nrows();
    let a = m[(0, 0)];
    if k == 1 {
        return Ok(a);
    }
    let b = m.view((1, 0), (k - 1, 1)).into_owned();
    let c = m.view((1, 1), (k - 1, k - 1)).into_owned();
    let ci = spd_inverse(&c, "regressor covariance")?;
    Ok(a - (b.transpose() * ci * b)[(0, 0)])
}

pub fn kao_test(
    ds: &PanelDataset,
    dependent: &str,
    regressors: &[impl AsRef<str>],
    residual_lags: usize,
) -> Result<KaoResult> {
    if regressors.is_empty() {
        return Err(Error::Config("Kao test needs at least one regressor".into()));
    }
    let mut names = vec![dependent.to_string()];
    names.extend(regressors.iter().map(|r| r.as_ref().to_string()));
    let sub = ds.select_variables(&names)?;
    if !sub.is_balanced() {
        return Err(Error::Unbalanced(format!(
            "Kao test variables {} are not observed over a common window",
            names.join(", ")
        )));
    }
    let k = regressors.len();
    let mut blocks = Vec::with_capacity(sub.n_units());
    for u in 0..sub.n_units() {
        if let Some((_, b)) = sub.joint_block(u, &names)? {
            blocks.push(b);
        }
    }
    let t_len = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let required = residual_lags + 4;
    if blocks.is_empty() || t_len < required {
        return Err(Error::SeriesTooShort {
            len: t_len,
            required,
        });
    }
    let n_units = blocks.len();

    // Pooled fixed-effect regression of y on x.
    let n = n_units * t_len;
    let mut x = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    for (i, b) in blocks.iter().enumerate() {
        let means: Vec<f64> = (0..=k).map(|j| b.column(j).mean()).collect();
        for t in 0..t_len {
            y[i * t_len + t] = b[(t, 0)] - means[0];
            for j in 0..k {
                x[(i * t_len + t, j)] = b[(t, j + 1)] - means[j + 1];
            }
        }
    }
    let reg_names: Vec<String> = names[1..].to_vec();
    let fe = ols(&x, &y, Some(&reg_names))?;
    let resid = &fe.residuals;

    // Pooled ADF regression on the residuals, no deterministic terms.
    let p = residual_lags;
    let rows_per_unit = t_len - 1 - p;
    let mut ax = DMatrix::zeros(n_units * rows_per_unit, 1 + p);
    let mut ay = DVector::zeros(n_units * rows_per_unit);
    for i in 0..n_units {
        let e = |t: usize| resid[i * t_len + t];
        for (r, t) in (p + 1..t_len).enumerate() {
            let row = i * rows_per_unit + r;
            ay[row] = e(t);
            ax[(row, 0)] = e(t - 1);
            for j in 1..=p {
                ax[(row, j)] = e(t - j) - e(t - j - 1);
            }
        }
    }
    let mut adf_names = vec!["e(t-1)".to_string()];
    adf_names.extend((1..=p).map(|j| format!("d.e(t-{j})")));
    let adf = ols(&ax, &ay, Some(&adf_names))?;
    let rho = adf.coefficients[0];
    let s2 = adf.ssr / adf.n_obs as f64;
    let t_adf = (rho - 1.0) / (s2 * adf.xtx_inv[(0, 0)]).sqrt();

    // Short- and long-run covariance of per-unit demeaned (Δy, Δx).
    let diffs: Vec<DMatrix<f64>> = blocks
        .iter()
        .map(|b| {
            let mut d = DMatrix::from_fn(t_len - 1, k + 1, |t, j| b[(t + 1, j)] - b[(t, j)]);
            for j in 0..=k {
                let mu = d.column(j).mean();
                d.column_mut(j).add_scalar_mut(-mu);
            }
            d
        })
        .collect();
    let bandwidth = bartlett_bandwidth(t_len - 1);
    let (sigma, omega) = long_run_cov(&diffs, bandwidth);
    let sigma2_v = conditional_variance(&sigma)?;
    let sigma2_0v = conditional_variance(&omega)?;
    if !(sigma2_v > 0.0 && sigma2_0v > 0.0) {
        return Err(Error::Singular(
            "conditional variance of the dependent variable is not positive".into(),
        ));
    }
    let (sv, s0v) = (sigma2_v.sqrt(), sigma2_0v.sqrt());
    let numerator = t_adf + (MEAN_SCALE * n_units as f64).sqrt() * sv / (2.0 * s0v);
    let denominator = (VAR_LONG_RUN_WEIGHT * sigma2_0v / sigma2_v
        + VAR_SHORT_RUN_WEIGHT * sigma2_v / sigma2_0v)
        .sqrt();
    let statistic = numerator / denominator;
    Ok(KaoResult {
        statistic,
        p_value: norm_cdf(statistic),
        t_adf,
        rho,
        sigma2_v,
        sigma2_0v,
        residual_lags,
        bandwidth,
        n_units,
        n_periods: t_len,
        variant: KAO_VARIANT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{generate, DgpConfig, EcmParams};

    #[test]
    fn cointegrated_panel_rejects() {
        let ds = generate(&DgpConfig::cointegrated_ecm(EcmParams::new(vec![2.0], -0.5), 6, 165, 1)).unwrap();
        let r = kao_test(&ds, "y", &["x1"], 1).unwrap();
        assert!(r.p_value < 0.01, "{r:?}");
        assert!((0.0..=1.0).contains(&r.p_value));
        assert_eq!(r.bandwidth, 4);
    }

    #[test]
    fn scale_invariance() {
        let ds = generate(&DgpConfig::independent_random_walks(3, 6, 80, 4)).unwrap();
        let base = kao_test(&ds, "y", &["x1", "x2"], 1).unwrap();
        let scaled_cells: Vec<Vec<Option<f64>>> = (0..ds.n_units())
            .map(|u| {
                ds.series(u, "y")
                    .unwrap()
                    .iter()
                    .map(|c| c.map(|v| 3.5 * v - 10.0))
                    .collect()
            })
            .collect();
        let ds2 = ds.with_variable("y_scaled", scaled_cells).unwrap();
        let scaled = kao_test(&ds2, "y_scaled", &["x1", "x2"], 1).unwrap();
        assert!((base.statistic - scaled.statistic).abs() < 1e-8);
        assert_eq!(base, kao_test(&ds, "y", &["x1", "x2"], 1).unwrap());
    }

    #[test]
    fn rejects_unbalanced_and_degenerate_inputs() {
        let ds = generate(&DgpConfig::independent_random_walks(2, 3, 40, 4)).unwrap();
        let mut cells: Vec<Vec<Option<f64>>> =
            (0..3).map(|u| ds.series(u, "x1").unwrap().to_vec()).collect();
        cells[0][0] = None;
        let ragged = ds.with_variable("x_short", cells).unwrap();
        assert!(matches!(
            kao_test(&ragged, "y", &["x_short"], 1),
            Err(Error::Unbalanced(_))
        ));
        let constant = ds
            .with_variable("c", vec![vec![Some(1.0); 40]; 3])
            .unwrap();
        // A unit-constant regressor vanishes after demeaning.
        assert!(matches!(kao_test(&constant, "y", &["c"], 1), Err(Error::Collinear(_))));
        let empty: [&str; 0] = [];
        assert!(kao_test(&ds, "y", &empty, 1).is_err());
    }

    #[test]
    fn bandwidth_rule() {
        assert_eq!(bartlett_bandwidth(100), 4);
        assert_eq!(bartlett_bandwidth(164), 4);
        assert_eq!(bartlett_bandwidth(20), 2);
    }
}
