//! Augmented Dickey-Fuller tests and the Fisher (Maddala-Wu) panel combination.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ols;
use crate::panel::PanelDataset;
use crate::stats::{chi2_sf, norm_cdf};

/// Deterministic terms in the test regression.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deterministic {
    None,
    #[default]
    Constant,
    ConstantTrend,
}

impl Deterministic {
    fn n_terms(self) -> usize {
        match self {
            Deterministic::None => 0,
            Deterministic::Constant => 1,
            Deterministic::ConstantTrend => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Deterministic::None => "none",
            Deterministic::Constant => "constant",
            Deterministic::ConstantTrend => "constant_trend",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagRule {
    /// Use exactly `max_lags` lagged differences.
    Fixed,
    /// Minimize AIC over `0..=max_lags` on a common sample.
    #[default]
    Aic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdfConfig {
    pub deterministic: Deterministic,
    pub max_lags: usize,
    pub lag_rule: LagRule,
}

impl Default for AdfConfig {
    fn default() -> Self {
        Self {
            deterministic: Deterministic::Constant,
            max_lags: 12,
            lag_rule: LagRule::Aic,
        }
    }
}

impl AdfConfig {
    pub fn describe(&self) -> String {
        format!(
            "ADF deterministic={} lag_rule={} max_lags={}",
            self.deterministic.label(),
            match self.lag_rule {
                LagRule::Fixed => "fixed",
                LagRule::Aic => "aic",
            },
            self.max_lags
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdfResult {
    pub tau: f64,
    pub p_value: f64,
    pub lags_used: usize,
    pub deterministic: Deterministic,
    pub n_obs: usize,
}

// MacKinnon (1994) response-surface coefficients for the single-series case,
// as tabulated in statsmodels `tsa/adfvalues.py` (`tau_*_smallp`,
// `tau_*_largep`, `tau_max`, `tau_min`, `tau_star`, N = 1). Coefficients are
// in increasing polynomial order; the p-value is Φ(poly(τ)).
struct Surface {
    max: f64,
    min: f64,
    star: f64,
    small: [f64; 3],
    large: [f64; 4],
}

const SURFACE_NONE: Surface = Surface {
    max: f64::INFINITY,
    min: -19.04,
    star: -1.04,
    small: [0.6344, 1.2378, 3.2496e-2],
    large: [0.4797, 9.3557e-1, -0.6999e-1, 3.3066e-2],
};

const SURFACE_CONSTANT: Surface = Surface {
    max: 2.74,
    min: -18.83,
    star: -1.61,
    small: [2.1659, 1.4412, 3.8269e-2],
    large: [1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2],
};

const SURFACE_TREND: Surface = Surface {
    max: 0.7,
    min: -16.18,
    star: -2.89,
    small: [3.2512, 1.6047, 4.9588e-2],
    large: [2.5261, 6.1654e-1, -3.7956e-1, -6.0285e-2],
};

// MacKinnon (2010) finite-sample critical values, N = 1, at 1%, 5% and 10%:
// cv(T) = b0 + b1/T + b2/T^2 + b3/T^3.
const CRIT_NONE: [[f64; 4]; 3] = [
    [-2.56574, -2.2358, -3.627, 0.0],
    [-1.94100, -0.2686, -3.365, 31.223],
    [-1.61682, 0.2656, -2.714, 25.364],
];
const CRIT_CONSTANT: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.040],
    [-2.56677, -1.5384, -2.809, 0.0],
];
const CRIT_TREND: [[f64; 4]; 3] = [
    [-3.95877, -9.0531, -28.428, -134.155],
    [-3.41049, -4.3904, -9.036, -45.374],
    [-3.12705, -2.5856, -3.925, -22.380],
];

/// Maps a τ from a regression on `n_obs` observations onto the asymptotic
/// scale: τ is multiplied by cv(∞)/cv(T), the ratio interpolated linearly
/// between the 1%, 5% and 10% critical values and held constant beyond them.
pub fn finite_sample_tau(tau: f64, deterministic: Deterministic, n_obs: usize) -> f64 {
    let table = match deterministic {
        Deterministic::None => &CRIT_NONE,
        Deterministic::Constant => &CRIT_CONSTANT,
        Deterministic::ConstantTrend => &CRIT_TREND,
    };
    let t = n_obs.max(1) as f64;
    let anchors: Vec<(f64, f64)> = table
        .iter()
        .map(|b| {
            let cv_t = b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t);
            (cv_t, b[0] / cv_t)
        })
        .collect();
    let ratio = if tau <= anchors[0].0 {
        anchors[0].1
    } else if tau >= anchors[2].0 {
        anchors[2].1
    } else {
        let k = if tau <= anchors[1].0 { 0 } else { 1 };
        let ((x0, r0), (x1, r1)) = (anchors[k], anchors[k + 1]);
        r0 + (r1 - r0) * (tau - x0) / (x1 - x0)
    };
    tau * ratio
}

/// Approximate asymptotic p-value of an ADF τ statistic.
pub fn mackinnon_p(tau: f64, deterministic: Deterministic) -> f64 {
    let s = match deterministic {
        Deterministic::None => &SURFACE_NONE,
        Deterministic::Constant => &SURFACE_CONSTANT,
        Deterministic::ConstantTrend => &SURFACE_TREND,
    };
    if tau.is_nan() {
        return f64::NAN;
    }
    if tau > s.max {
        return 1.0;
    }
    if tau < s.min {
        return 0.0;
    }
    let coefs: &[f64] = if tau <= s.star { &s.small } else { &s.large };
    let z = coefs.iter().rev().fold(0.0, |acc, c| acc * tau + c);
    norm_cdf(z)
}

struct AdfFit {
    tau: f64,
    n_obs: usize,
    aic: f64,
}

fn adf_regression(y: &[f64], lags: usize, first: usize, det: Deterministic) -> Result<AdfFit> {
    let n = y.len() - first;
    let k = det.n_terms() + 1 + lags;
    let mut x = DMatrix::zeros(n, k);
    let mut dy = DVector::zeros(n);
    for (r, t) in (first..y.len()).enumerate() {
        dy[r] = y[t] - y[t - 1];
        let mut c = 0;
        if det.n_terms() >= 1 {
            x[(r, c)] = 1.0;
            c += 1;
        }
        if det.n_terms() == 2 {
            x[(r, c)] = t as f64;
            c += 1;
        }
        x[(r, c)] = y[t - 1];
        c += 1;
        for j in 1..=lags {
            x[(r, c)] = y[t - j] - y[t - j - 1];
            c += 1;
        }
    }
    let fit = ols(&x, &dy, None)?;
    let rho_col = det.n_terms();
    let rho = fit.coefficients[rho_col];
    let scale = dy.norm_squared();
    let tau = if fit.ssr <= 1e-24 * scale.max(f64::MIN_POSITIVE) {
        // Exact fit: a deterministic path, not a mean-reverting one.
        let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if rho.abs() * y_scale <= 1e-8 * scale.sqrt().max(1e-300) {
            0.0
        } else {
            rho.signum() * f64::INFINITY
        }
    } else {
        rho / (fit.sigma2() * fit.xtx_inv[(rho_col, rho_col)]).sqrt()
    };
    let aic = n as f64 * (fit.ssr / n as f64).max(f64::MIN_POSITIVE).ln() + 2.0 * k as f64;
    Ok(AdfFit { tau, n_obs: n, aic })
}

/// Augmented Dickey-Fuller test of a unit root in `series`.
pub fn adf_test(series: &[f64], config: &AdfConfig) -> Result<AdfResult> {
    let required = config.max_lags + 10;
    if series.len() < required {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            required,
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("series contains non-finite values".into()));
    }
    let first = series[0];
    if series.iter().all(|v| *v == first) {
        return Err(Error::ConstantSeries);
    }
    let det = config.deterministic;
    let lags = match config.lag_rule {
        LagRule::Fixed => config.max_lags,
        LagRule::Aic => {
            let mut best: Option<(usize, f64)> = None;
            for p in 0..=config.max_lags {
                match adf_regression(series, p, config.max_lags + 1, det) {
                    Ok(fit) => {
                        if best.is_none_or(|(_, a)| fit.aic < a) {
                            best = Some((p, fit.aic));
                        }
                    }
                    Err(Error::Collinear(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            best.map(|b| b.0).ok_or_else(|| {
                Error::Collinear(vec!["every candidate ADF lag order".into()])
            })?
        }
    };
    let fit = adf_regression(series, lags, lags + 1, det)?;
    Ok(AdfResult {
        tau: fit.tau,
        p_value: mackinnon_p(finite_sample_tau(fit.tau, det, fit.n_obs), det),
        lags_used: lags,
        deterministic: det,
        n_obs: fit.n_obs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherAdfResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub per_unit: Vec<(String, AdfResult)>,
}

/// `-2 Σ ln p_i` and its χ²(2N) upper-tail probability.
pub fn fisher_combine(p_values: &[f64]) -> (f64, usize, f64) {
    let statistic: f64 = -2.0 * p_values.iter().map(|p| p.ln()).sum::<f64>();
    let statistic = if statistic == 0.0 { 0.0 } else { statistic };
    let dof = 2 * p_values.len();
    (statistic, dof, chi2_sf(statistic, dof as f64))
}

/// Fisher-ADF panel unit root test on one variable.
pub fn fisher_adf(ds: &PanelDataset, variable: &str, config: &AdfConfig) -> Result<FisherAdfResult> {
    let per_unit = (0..ds.n_units())
        .into_par_iter()
        .map(|u| {
            let unit = &ds.units()[u];
            let (_, series) = ds.observed(u, variable)?;
            adf_test(&series, config)
                .map(|r| (unit.clone(), r))
                .map_err(|e| Error::in_unit(unit, e))
        })
        .collect::<Result<Vec<_>>>()?;
    if per_unit.len() < 2 {
        return Err(Error::Invalid(format!(
            "Fisher-ADF needs at least 2 units, '{variable}' has {}",
            per_unit.len()
        )));
    }
    let ps: Vec<f64> = per_unit.iter().map(|(_, r)| r.p_value).collect();
    let (statistic, dof, p_value) = fisher_combine(&ps);
    Ok(FisherAdfResult {
        statistic,
        dof,
        p_value,
        per_unit,
    })
}

/// Fisher-ADF p-values in levels and in first differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitRootRow {
    pub variable: String,
    pub level: FisherAdfResult,
    pub first_difference: FisherAdfResult,
}

pub fn levels_and_differences(
    ds: &PanelDataset,
    variable: &str,
    config: &AdfConfig,
) -> Result<UnitRootRow> {
    let diff_name = format!("__d_{variable}");
    let dd = crate::panel::apply_transform(
        ds,
        &crate::panel::TransformSpec::new(
            crate::panel::TransformKind::FirstDifference,
            variable,
            &diff_name,
        ),
    )?;
    Ok(UnitRootRow {
        variable: variable.to_string(),
        level: fisher_adf(ds, variable, config)?,
        first_difference: fisher_adf(&dd, &diff_name, config)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn mackinnon_matches_reference_values() {
        // Reference values from statsmodels.tsa.adfvalues.mackinnonp(tau, regression, N=1);
        // the tolerance absorbs the difference between normal CDF implementations.
        let cases = [
            (-2.0, Deterministic::Constant, 0.28657309916843154),
            (-3.5, Deterministic::Constant, 0.007987094061496709),
            (0.0, Deterministic::Constant, 0.958532086060056),
            (-3.0, Deterministic::ConstantTrend, 0.1320809847799973),
            (-1.0, Deterministic::None, 0.28810611212633064),
            (-2.5, Deterministic::None, 0.012004037384041915),
        ];
        for (tau, det, want) in cases {
            let got = mackinnon_p(tau, det);
            assert!((got - want).abs() < 1e-10, "{tau} {det:?}: {got} vs {want}");
        }
        assert_eq!(mackinnon_p(3.0, Deterministic::Constant), 1.0);
        assert_eq!(mackinnon_p(-20.0, Deterministic::Constant), 0.0);
    }

    #[test]
    fn fisher_hand_computation() {
        let (s, dof, p) = fisher_combine(&[0.05, 0.10]);
        let hand = -2.0 * (0.05f64.ln() + 0.10f64.ln());
        assert!((s - hand).abs() < 1e-10);
        assert!((s - 10.5966).abs() < 1e-4);
        assert_eq!(dof, 4);
        // χ²(4) survival: e^{-x/2}(1 + x/2) with e^{-x/2} = 0.05 · 0.10.
        let oracle = 0.005 * (1.0 + hand / 2.0);
        assert!((p - oracle).abs() < 1e-12);
        assert!((p - 0.0315).abs() < 1e-4);
    }

    #[test]
    fn fisher_boundary_all_ones() {
        let (s, dof, p) = fisher_combine(&[1.0, 1.0, 1.0]);
        assert_eq!(s, 0.0);
        assert_eq!(dof, 6);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn fisher_unit_with_p_one_only_adds_dof() {
        let ps = [0.2, 0.03, 0.5];
        let (s1, d1, p1) = fisher_combine(&ps);
        let (s2, d2, p2) = fisher_combine(&[0.2, 0.03, 0.5, 1.0]);
        assert!((s1 - s2).abs() < 1e-12);
        assert_eq!(d2, d1 + 2);
        assert!(p2 >= p1);
        let (s3, _, _) = fisher_combine(&[0.5, 0.2, 0.03]);
        assert!((s1 - s3).abs() < 1e-12);
    }

    #[test]
    fn linear_trend_is_not_rejected_under_constant_spec() {
        let y: Vec<f64> = (0..165).map(|t| t as f64).collect();
        let r = adf_test(&y, &AdfConfig::default()).unwrap();
        assert!(r.p_value > 0.05, "{r:?}");
    }

    #[test]
    fn constant_and_short_series_fail() {
        assert!(matches!(
            adf_test(&[2.0; 50], &AdfConfig::default()),
            Err(Error::ConstantSeries)
        ));
        let short: Vec<f64> = (0..15).map(|t| (t as f64).sin()).collect();
        assert!(matches!(
            adf_test(&short, &AdfConfig::default()),
            Err(Error::SeriesTooShort { len: 15, required: 22 })
        ));
    }

    fn random_walk(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
        let mut y = Vec::with_capacity(n);
        let mut acc = 0.0;
        for _ in 0..n {
            let e: f64 = StandardNormal.sample(rng);
            acc += e;
            y.push(acc);
        }
        y
    }

    #[test]
    fn tau_invariant_to_positive_scaling() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let y = random_walk(&mut rng, 165);
        let base = adf_test(&y, &AdfConfig::default()).unwrap();
        for a in [0.001, 3.0, 1e4] {
            let ys: Vec<f64> = y.iter().map(|v| a * v).collect();
            let r = adf_test(&ys, &AdfConfig::default()).unwrap();
            assert_eq!(r.lags_used, base.lags_used);
            assert!((r.tau - base.tau).abs() < 1e-10, "{} vs {}", r.tau, base.tau);
        }
    }

    #[test]
    fn lags_respect_maximum() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let y = random_walk(&mut rng, 120);
        for max in [0, 3, 8] {
            let cfg = AdfConfig {
                max_lags: max,
                ..AdfConfig::default()
            };
            let r = adf_test(&y, &cfg).unwrap();
            assert!(r.lags_used <= max);
            assert!((0.0..=1.0).contains(&r.p_value));
        }
        let fixed = AdfConfig {
            max_lags: 4,
            lag_rule: LagRule::Fixed,
            deterministic: Deterministic::ConstantTrend,
        };
        let r = adf_test(&y, &fixed).unwrap();
        assert_eq!(r.lags_used, 4);
        assert_eq!(r.n_obs, 120 - 5);
    }
}
