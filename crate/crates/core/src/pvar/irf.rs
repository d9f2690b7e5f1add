//! Cholesky-orthogonalized impulse responses with Monte Carlo bands.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PvarFit;
use crate::error::{Error, Result};
use crate::linalg::cholesky_lower;
use crate::stats::quantile_sorted;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrfConfig {
    pub horizon: usize,
    pub n_draws: usize,
    pub seed: u64,
    /// Coverage of the percentile band, e.g. 0.90.
    pub band_level: f64,
}

impl Default for IrfConfig {
    fn default() -> Self {
        Self {
            horizon: 24,
            n_draws: 500,
            seed: 42,
            band_level: 0.90,
        }
    }
}

/// Responses indexed by (response variable, shock variable, horizon), both
/// variables in the chosen ordering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrfResult {
    pub variables: Vec<String>,
    pub horizon: usize,
    pub band_level: f64,
    pub n_draws: usize,
    pub seed: u64,
    /// Impact standard deviation of each orthogonal shock, the diagonal of
    /// the Cholesky factor. Dividing by it gives unit-shock responses.
    pub shock_sd: Vec<f64>,
    point: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl IrfResult {
    fn idx(&self, response: usize, shock: usize, h: usize) -> usize {
        let m = self.variables.len();
        (response * m + shock) * (self.horizon + 1) + h
    }

    /// Response to a one-standard-deviation shock.
    pub fn point(&self, response: usize, shock: usize, h: usize) -> f64 {
        self.point[self.idx(response, shock, h)]
    }

    pub fn lower(&self, response: usize, shock: usize, h: usize) -> f64 {
        self.lower[self.idx(response, shock, h)]
    }

    pub fn upper(&self, response: usize, shock: usize, h: usize) -> f64 {
        self.upper[self.idx(response, shock, h)]
    }

    /// `(point, lower, upper)` per unit impact of the shocked variable.
    pub fn unit_shock(&self, response: usize, shock: usize, h: usize) -> (f64, f64, f64) {
        let s = self.shock_sd[shock];
        (
            self.point(response, shock, h) / s,
            self.lower(response, shock, h) / s,
            self.upper(response, shock, h) / s,
        )
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }
}

/// `Φ_0 = I`, `Φ_h = Σ_{k=1..min(h,p)} A_k Φ_{h-k}`.
pub fn ma_coefficients(lags: &[DMatrix<f64>], horizon: usize) -> Vec<DMatrix<f64>> {
    let m = lags.first().map(|a| a.nrows()).unwrap_or(0);
    let mut phi = Vec::with_capacity(horizon + 1);
    phi.push(DMatrix::identity(m, m));
    for h in 1..=horizon {
        let mut acc = DMatrix::zeros(m, m);
        for (k, a) in lags.iter().enumerate().take(h) {
            acc += a * &phi[h - k - 1];
        }
        phi.push(acc);
    }
    phi
}

/// Flattened `(Φ_h P)[r, s]` in the ordering given by `perm`.
fn responses(lags: &[DMatrix<f64>], perm: &[usize], p_chol: &DMatrix<f64>, horizon: usize) -> Vec<f64> {
    let m = perm.len();
    let phi = ma_coefficients(lags, horizon);
    let mut out = vec![0.0; m * m * (horizon + 1)];
    for (h, ph) in phi.iter().enumerate() {
        let permuted = DMatrix::from_fn(m, m, |i, j| ph[(perm[i], perm[j])]);
        let r = permuted * p_chol;
        for i in 0..m {
            for j in 0..m {
                out[(i * m + j) * (horizon + 1) + h] = r[(i, j)];
            }
        }
    }
    out
}

/// Square root of a symmetric PSD matrix for drawing, Cholesky when possible
/// and a clipped eigen factor otherwise.
fn draw_factor(v: &DMatrix<f64>) -> DMatrix<f64> {
    if v.iter().all(|x| *x == 0.0) {
        return DMatrix::zeros(v.nrows(), v.ncols());
    }
    if let Some(c) = v.clone().cholesky() {
        return c.l();
    }
    let eig = v.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| x.max(0.0).sqrt()));
    &eig.eigenvectors * d
}

pub fn orthogonalized_irf(fit: &PvarFit, ordering: &[impl AsRef<str>], cfg: &IrfConfig) -> Result<IrfResult> {
    let m = fit.n_vars();
    let names: Vec<String> = ordering.iter().map(|v| v.as_ref().to_string()).collect();
    if names.len() != m {
        return Err(Error::Invalid(format!(
            "ordering lists {} variables but the fit has {m}",
            names.len()
        )));
    }
    let mut perm = Vec::with_capacity(m);
    for v in &names {
        let i = fit
            .variables
            .iter()
            .position(|f| f == v)
            .ok_or_else(|| Error::UnknownVariable(v.clone()))?;
        if perm.contains(&i) {
            return Err(Error::Invalid(format!("'{v}' appears twice in the ordering")));
        }
        perm.push(i);
    }
    if !(cfg.band_level > 0.0 && cfg.band_level < 1.0) {
        return Err(Error::Config(format!("band level {} must lie in (0, 1)", cfg.band_level)));
    }
    if !fit.stability().stable {
        warn!("panel VAR is not stable; impulse responses will not die out");
    }
    let sigma = DMatrix::from_fn(m, m, |i, j| fit.sigma[(perm[i], perm[j])]);
    let p_chol = cholesky_lower(&sigma)?;
    let point = responses(&fit.lags, &perm, &p_chol, cfg.horizon);

    let b = fit.coef_vector();
    let factor = draw_factor(&fit.coef_cov);
    let k = b.len();
    let draws: Vec<Vec<f64>> = (0..cfg.n_draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(d as u64);
            let zv = DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(&mut rng)));
            let bd = &b + &factor * zv;
            responses(&fit.lags_from_vector(&bd), &perm, &p_chol, cfg.horizon)
        })
        .collect();

    let alpha = (1.0 - cfg.band_level) / 2.0;
    let mut lower = point.clone();
    let mut upper = point.clone();
    if !draws.is_empty() {
        let mut column = vec![0.0; draws.len()];
        for e in 0..point.len() {
            for (c, d) in column.iter_mut().zip(&draws) {
                *c = d[e];
            }
            column.sort_by(f64::total_cmp);
            lower[e] = quantile_sorted(&column, alpha).min(point[e]);
            upper[e] = quantile_sorted(&column, 1.0 - alpha).max(point[e]);
        }
    }
    Ok(IrfResult {
        variables: names,
        horizon: cfg.horizon,
        band_level: cfg.band_level,
        n_draws: cfg.n_draws,
        seed: cfg.seed,
        shock_sd: (0..m).map(|j| p_chol[(j, j)]).collect(),
        point,
        lower,
        upper,
    })
}
