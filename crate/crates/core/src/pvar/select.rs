//! Lag-order choice by moment and model selection criteria on the GMM
//! J statistic.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{fit_pvar, PvarSpec, PvarTransform};
use crate::error::{Error, Result};
use crate::panel::PanelDataset;
use crate::stats::chi2_sf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmscConfig {
    /// Multiplier `R` in the Hannan-Quinn type penalty `R (q-k) ln ln n`.
    pub mqic_r: f64,
}

impl Default for MmscConfig {
    fn default() -> Self {
        Self { mqic_r: 2.0 }
    }
}

/// `(MBIC, MAIC, MQIC)` for a J statistic with `q` moments, `k` parameters
/// and `n` observations.
pub fn mmsc(j: f64, q: usize, k: usize, n: usize, cfg: MmscConfig) -> (f64, f64, f64) {
    let over = q as f64 - k as f64;
    let ln_n = (n as f64).ln();
    (
        j - over * ln_n,
        j - 2.0 * over,
        j - cfg.mqic_r * over * ln_n.ln(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagSelectionRow {
    pub lag: usize,
    pub j_statistic: f64,
    pub j_p_value: f64,
    pub mbic: f64,
    pub maic: f64,
    pub mqic: f64,
    pub n_obs: usize,
    pub n_moments: usize,
    pub n_params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagSelectionTable {
    pub max_lag: usize,
    pub instrument_lags: (usize, usize),
    pub mqic_r: f64,
    /// Estimable candidates only, in increasing lag order.
    pub rows: Vec<LagSelectionRow>,
    /// Candidate lags without a row, with the reason.
    pub absent: Vec<(usize, String)>,
    pub chosen_mbic: usize,
    pub chosen_maic: usize,
    pub chosen_mqic: usize,
}

impl LagSelectionTable {
    pub fn row(&self, lag: usize) -> Option<&LagSelectionRow> {
        self.rows.iter().find(|r| r.lag == lag)
    }
}

fn argmin(rows: &[LagSelectionRow], f: impl Fn(&LagSelectionRow) -> f64) -> usize {
    rows.iter()
        .min_by(|a, b| f(a).total_cmp(&f(b)).then(a.lag.cmp(&b.lag)))
        .map(|r| r.lag)
        .unwrap_or(0)
}

/// Fits lags `1..=max_lag` on a common estimation sample (fixed by the
/// instrument range) and tabulates the criteria. Lags whose model is not
/// overidentified, or fails to fit, are listed in `absent`.
pub fn select_lag(
    ds: &PanelDataset,
    spec: &PvarSpec,
    max_lag: usize,
    cfg: MmscConfig,
) -> Result<LagSelectionTable> {
    if spec.transform != PvarTransform::ForwardOrthogonalDeviations {
        return Err(Error::Config(
            "lag selection needs the GMM estimator (forward orthogonal deviations)".into(),
        ));
    }
    if max_lag == 0 {
        return Err(Error::Config("max_lag must be at least 1".into()));
    }
    let (_, hi) = spec.instrument_lags;
    if max_lag > hi {
        warn!("candidate lags above the deepest instrument lag {hi} are not identified");
    }
    let mut rows = Vec::new();
    let mut absent = Vec::new();
    for lag in 1..=max_lag {
        let mut candidate = spec.clone();
        candidate.lags = lag;
        let m = candidate.variables.len();
        let q = m * m * (hi - candidate.instrument_lags.0 + 1);
        let k = m * m * lag;
        if q <= k {
            absent.push((lag, format!("{q} moments for {k} parameters: not overidentified")));
            continue;
        }
        match fit_pvar(ds, &candidate) {
            Ok(fit) => {
                let (mbic, maic, mqic) = mmsc(fit.j_statistic, fit.n_moments, fit.n_params, fit.n_obs, cfg);
                rows.push(LagSelectionRow {
                    lag,
                    j_statistic: fit.j_statistic,
                    j_p_value: chi2_sf(fit.j_statistic, (fit.n_moments - fit.n_params) as f64),
                    mbic,
                    maic,
                    mqic,
                    n_obs: fit.n_obs,
                    n_moments: fit.n_moments,
                    n_params: fit.n_params,
                });
            }
            Err(e) => {
                warn!("lag {lag} not estimable: {e}");
                absent.push((lag, e.to_string()));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientDepth(format!(
            "no candidate lag in 1..={max_lag} is estimable with instrument lags {}..{hi}",
            spec.instrument_lags.0
        )));
    }
    Ok(LagSelectionTable {
        max_lag,
        instrument_lags: spec.instrument_lags,
        mqic_r: cfg.mqic_r,
        chosen_mbic: argmin(&rows, |r| r.mbic),
        chosen_maic: argmin(&rows, |r| r.maic),
        chosen_mqic: argmin(&rows, |r| r.mqic),
        rows,
        absent,
    })
}
