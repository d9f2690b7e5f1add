//! Panel VAR with unit fixed effects.
//!
//! `y_it = A_0 + Σ_k A_k y_{i,t-k} + α_i + ε_it`, estimated either by two-step
//! GMM on forward orthogonal deviations with lagged levels as instruments, or
//! by least squares on within-demeaned data.

mod fod;
mod irf;
mod select;
mod stability;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ols, spd_inverse, symmetrize};
use crate::panel::PanelDataset;
use crate::stats::two_sided_normal_p;

pub use fod::{fod, forward_orthogonal_deviations};
pub use irf::{ma_coefficients, orthogonalized_irf, IrfConfig, IrfResult};
pub use select::{mmsc, select_lag, LagSelectionRow, LagSelectionTable, MmscConfig};
pub use stability::{companion_matrix, stability, Eigenvalue, StabilityReport};

/// Default recursive ordering: policy rate, exchange rate, the four sector
/// indices, industrial production, inflation.
pub const DEFAULT_ORDERING: [&str; 8] = [
    "irs",
    "err",
    "index_telecom",
    "index_man",
    "index_elec",
    "index_fin",
    "ip",
    "cpi",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PvarTransform {
    #[default]
    ForwardOrthogonalDeviations,
    WithinDemean,
}

impl PvarTransform {
    pub fn label(self) -> &'static str {
        match self {
            PvarTransform::ForwardOrthogonalDeviations => "forward orthogonal deviations, GMM",
            PvarTransform::WithinDemean => "within demeaning, OLS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvarSpec {
    pub variables: Vec<String>,
    pub lags: usize,
    pub transform: PvarTransform,
    /// Inclusive range of lags of the levels used as instruments.
    pub instrument_lags: (usize, usize),
}

impl PvarSpec {
    pub fn new(variables: &[impl AsRef<str>], lags: usize) -> Self {
        Self {
            variables: variables.iter().map(|v| v.as_ref().to_string()).collect(),
            lags,
            transform: PvarTransform::default(),
            instrument_lags: (1, 4),
        }
    }

    pub fn with_transform(mut self, transform: PvarTransform) -> Self {
        self.transform = transform;
        self
    }

    pub fn with_instrument_lags(mut self, from: usize, to: usize) -> Self {
        self.instrument_lags = (from, to);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.variables.is_empty() {
            return Err(Error::Config("panel VAR needs at least one variable".into()));
        }
        for (i, v) in self.variables.iter().enumerate() {
            if self.variables[..i].contains(v) {
                return Err(Error::Config(format!("variable '{v}' listed twice")));
            }
        }
        if self.lags == 0 {
            return Err(Error::Config("lag order must be at least 1".into()));
        }
        let (lo, hi) = self.instrument_lags;
        if self.transform == PvarTransform::ForwardOrthogonalDeviations && (lo == 0 || hi < lo) {
            return Err(Error::Config(format!(
                "instrument lags {lo}..{hi} must satisfy 1 <= from <= to"
            )));
        }
        Ok(())
    }

    /// First observation (0-based, within a unit) that enters estimation.
    fn sample_start(&self) -> usize {
        match self.transform {
            PvarTransform::ForwardOrthogonalDeviations => self.lags.max(self.instrument_lags.1),
            PvarTransform::WithinDemean => self.lags,
        }
    }
}

/// Level residuals of one unit starting at dataset period `first_period`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitResiduals {
    pub unit: String,
    pub first_period: usize,
    /// Rows are periods, columns variables.
    pub values: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub equation: String,
    pub regressor: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone)]
pub struct PvarFit {
    pub variables: Vec<String>,
    pub transform: PvarTransform,
    pub instrument_lags: Option<(usize, usize)>,
    /// `A_1..A_p`; row = equation, column = lagged variable.
    pub lags: Vec<DMatrix<f64>>,
    /// Average intercept across units.
    pub intercept: DVector<f64>,
    /// Unit intercept minus `intercept`.
    pub fixed_effects: Vec<(String, DVector<f64>)>,
    pub residuals: Vec<UnitResiduals>,
    pub sigma: DMatrix<f64>,
    /// Covariance of `vec(B)` where `B` stacks the lag blocks (rows) per
    /// equation (columns); index `eq * m * p + (k - 1) * m + j`.
    pub coef_cov: DMatrix<f64>,
    pub j_statistic: f64,
    pub n_obs: usize,
    pub n_params: usize,
    pub n_moments: usize,
    pub n_units: usize,
}

impl PvarFit {
    /// A fit carrying known parameters, for impulse responses of a true model.
    /// The coefficient covariance is zero, so bands collapse to the point.
    pub fn from_parameters(
        variables: &[impl AsRef<str>],
        lags: Vec<DMatrix<f64>>,
        sigma: DMatrix<f64>,
    ) -> Result<Self> {
        let m = variables.len();
        if m == 0 || lags.is_empty() {
            return Err(Error::Invalid("need at least one variable and one lag".into()));
        }
        if lags.iter().any(|a| a.shape() != (m, m)) || sigma.shape() != (m, m) {
            return Err(Error::Invalid(format!("parameter matrices must be {m} x {m}")));
        }
        let k = m * m * lags.len();
        Ok(Self {
            variables: variables.iter().map(|v| v.as_ref().to_string()).collect(),
            transform: PvarTransform::default(),
            instrument_lags: None,
            lags,
            intercept: DVector::zeros(m),
            fixed_effects: Vec::new(),
            residuals: Vec::new(),
            sigma,
            coef_cov: DMatrix::zeros(k, k),
            j_statistic: 0.0,
            n_obs: 0,
            n_params: k,
            n_moments: k,
            n_units: 0,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn lag_order(&self) -> usize {
        self.lags.len()
    }

    /// Overidentifying restrictions, `q - k`.
    pub fn overidentification(&self) -> i64 {
        self.n_moments as i64 - self.n_params as i64
    }

    /// Coefficients stacked as `vec(B)`, matching [`PvarFit::coef_cov`].
    pub fn coef_vector(&self) -> DVector<f64> {
        let m = self.n_vars();
        let p = self.lag_order();
        let mut b = DVector::zeros(m * m * p);
        for eq in 0..m {
            for (k, a) in self.lags.iter().enumerate() {
                for j in 0..m {
                    b[eq * m * p + k * m + j] = a[(eq, j)];
                }
            }
        }
        b
    }

    /// Inverse of [`PvarFit::coef_vector`].
    pub fn lags_from_vector(&self, b: &DVector<f64>) -> Vec<DMatrix<f64>> {
        unstack(b, self.n_vars(), self.lag_order())
    }

    pub fn stability(&self) -> StabilityReport {
        stability(&self.lags)
    }

    pub fn coefficient_table(&self) -> Vec<CoefficientRow> {
        let m = self.n_vars();
        let p = self.lag_order();
        let b = self.coef_vector();
        let mut rows = Vec::with_capacity(b.len());
        for eq in 0..m {
            for k in 0..p {
                for j in 0..m {
                    let idx = eq * m * p + k * m + j;
                    let se = self.coef_cov[(idx, idx)].max(0.0).sqrt();
                    let z = if se > 0.0 { b[idx] / se } else { f64::NAN };
                    rows.push(CoefficientRow {
                        equation: self.variables[eq].clone(),
                        regressor: format!("L{}.{}", k + 1, self.variables[j]),
                        estimate: b[idx],
                        std_error: se,
                        z,
                        p_value: two_sided_normal_p(z),
                    });
                }
            }
        }
        rows
    }
}

fn unstack(b: &DVector<f64>, m: usize, p: usize) -> Vec<DMatrix<f64>> {
    let mut lags = vec![DMatrix::zeros(m, m); p];
    for eq in 0..m {
        for (k, a) in lags.iter_mut().enumerate() {
            for j in 0..m {
                a[(eq, j)] = b[eq * m * p + k * m + j];
            }
        }
    }
    lags
}

/// One unit's jointly observed block of the model variables.
struct UnitBlock {
    name: String,
    first_period: usize,
    y: DMatrix<f64>,
}

fn unit_blocks(ds: &PanelDataset, variables: &[String]) -> Result<Vec<UnitBlock>> {
    for v in variables {
        if !ds.has_variable(v) {
            return Err(Error::UnknownVariable(v.clone()));
        }
    }
    let mut blocks = Vec::new();
    for (u, name) in ds.units().iter().enumerate() {
        match ds.joint_block(u, variables)? {
            Some((first_period, y)) => blocks.push(UnitBlock {
                name: name.clone(),
                first_period,
                y,
            }),
            None => warn!("unit '{name}' has no months where all panel VAR variables are observed; skipped"),
        }
    }
    Ok(blocks)
}

pub fn fit_pvar(ds: &PanelDataset, spec: &PvarSpec) -> Result<PvarFit> {
    spec.validate()?;
    let blocks = unit_blocks(ds, &spec.variables)?;
    // FOD needs two level rows past the start to give one transformed row.
    let min_len = spec.sample_start()
        + match spec.transform {
            PvarTransform::ForwardOrthogonalDeviations => 2,
            PvarTransform::WithinDemean => 1,
        };
    let (usable, short): (Vec<_>, Vec<_>) = blocks.into_iter().partition(|b| b.y.nrows() >= min_len);
    for b in &short {
        warn!(
            "unit '{}' has {} joint observations, fewer than the {min_len} required; skipped",
            b.name,
            b.y.nrows()
        );
    }
    if usable.is_empty() {
        return Err(Error::InsufficientDepth(format!(
            "no unit has the {min_len} consecutive joint observations required for {} lag(s)",
            spec.lags
        )));
    }
    match spec.transform {
        PvarTransform::ForwardOrthogonalDeviations => fit_gmm(&usable, spec),
        PvarTransform::WithinDemean => fit_within(&usable, spec),
    }
}

fn lag_names(spec: &PvarSpec) -> Vec<String> {
    (1..=spec.lags)
        .flat_map(|k| spec.variables.iter().map(move |v| format!("L{k}.{v}")))
        .collect()
}

fn fit_gmm(blocks: &[UnitBlock], spec: &PvarSpec) -> Result<PvarFit> {
    let m = spec.variables.len();
    let p = spec.lags;
    let (lo, hi) = spec.instrument_lags;
    let s = spec.sample_start();
    let kx = m * p;
    let nz = m * (hi - lo + 1);

    let n: usize = blocks.iter().map(|b| b.y.nrows() - s - 1).sum();
    let mut x = DMatrix::zeros(n, kx);
    let mut y = DMatrix::zeros(n, m);
    let mut z = DMatrix::zeros(n, nz);
    let mut row = 0;
    for b in blocks {
        let len = b.y.nrows() - s;
        for j in 0..m {
            let dep: Vec<f64> = (s..s + len).map(|t| b.y[(t, j)]).collect();
            for (t, v) in fod(&dep).into_iter().enumerate() {
                y[(row + t, j)] = v;
            }
            for k in 1..=p {
                let lagged: Vec<f64> = (s..s + len).map(|t| b.y[(t - k, j)]).collect();
                for (t, v) in fod(&lagged).into_iter().enumerate() {
                    x[(row + t, (k - 1) * m + j)] = v;
                }
            }
        }
        for t in 0..len - 1 {
            for (li, l) in (lo..=hi).enumerate() {
                for j in 0..m {
                    z[(row + t, li * m + j)] = b.y[(s + t - l, j)];
                }
            }
        }
        row += len - 1;
    }

    let q = m * nz;
    let k = m * kx;
    if q < k {
        return Err(Error::InsufficientDepth(format!(
            "{q} moment conditions for {k} parameters; widen the instrument lag range"
        )));
    }
    if n <= nz {
        return Err(Error::InsufficientDepth(format!(
            "{n} transformed observations for {nz} instruments per equation"
        )));
    }

    let zz = z.transpose() * &z;
    let zx = z.transpose() * &x;
    let zy = z.transpose() * &y;
    let zz_inv = spd_inverse(&zz, "instrument cross-product matrix").map_err(|_| {
        Error::Singular("instrument cross-product matrix is singular; try fewer instrument lags".into())
    })?;

    // Step 1: equation-wise 2SLS, i.e. weighting I_m ⊗ (Z'Z)^{-1}.
    let xz_zzi = zx.transpose() * &zz_inv;
    let a1 = &xz_zzi * &zx;
    let a1_inv = spd_inverse(&a1, "first-step GMM matrix").map_err(|_| {
        Error::Collinear(lag_names(spec))
    })?;
    let b1 = &a1_inv * (&xz_zzi * &zy);
    let e1 = &y - &x * &b1;

    // Step 2: S = Σ_t (e_t ⊗ z_t)(e_t ⊗ z_t)'.
    let mut g = DMatrix::zeros(n, q);
    for t in 0..n {
        for eq in 0..m {
            let e = e1[(t, eq)];
            for l in 0..nz {
                g[(t, eq * nz + l)] = e * z[(t, l)];
            }
        }
    }
    let mut s_mat = g.transpose() * &g;
    symmetrize(&mut s_mat);
    let w = spd_inverse(&s_mat, "GMM weighting matrix").map_err(|_| {
        Error::Singular("GMM weighting matrix is singular; try fewer instrument lags".into())
    })?;

    // G = I_m ⊗ Z'X, h = vec(Z'Y).
    let mut gm = DMatrix::zeros(q, k);
    for eq in 0..m {
        gm.view_mut((eq * nz, eq * kx), (nz, kx)).copy_from(&zx);
    }
    let h = DVector::from_column_slice(zy.as_slice());
    let gw = gm.transpose() * &w;
    let mut info = &gw * &gm;
    symmetrize(&mut info);
    let mut cov = spd_inverse(&info, "second-step GMM matrix").map_err(|_| Error::Collinear(lag_names(spec)))?;
    symmetrize(&mut cov);
    let b2 = &cov * (&gw * &h);
    let gbar = &h - &gm * &b2;
    let j_stat = (gbar.transpose() * &w * &gbar)[(0, 0)].max(0.0);
    debug!("panel VAR GMM: n={n}, q={q}, k={k}, J={j_stat:.4}");

    let lags = unstack(&b2, m, p);
    finish(blocks, spec, lags, cov, j_stat, n, k, q)
}

fn fit_within(blocks: &[UnitBlock], spec: &PvarSpec) -> Result<PvarFit> {
    let m = spec.variables.len();
    let p = spec.lags;
    let s = spec.sample_start();
    let kx = m * p;
    let n: usize = blocks.iter().map(|b| b.y.nrows() - s).sum();
    let mut x = DMatrix::zeros(n, kx);
    let mut y = DMatrix::zeros(n, m);
    let mut row = 0;
    for b in blocks {
        let len = b.y.nrows() - s;
        for j in 0..m {
            let dep: Vec<f64> = (s..s + len).map(|t| b.y[(t, j)]).collect();
            let mu = dep.iter().sum::<f64>() / len as f64;
            for (t, v) in dep.iter().enumerate() {
                y[(row + t, j)] = v - mu;
            }
            for k in 1..=p {
                let lagged: Vec<f64> = (s..s + len).map(|t| b.y[(t - k, j)]).collect();
                let mu = lagged.iter().sum::<f64>() / len as f64;
                for (t, v) in lagged.iter().enumerate() {
                    x[(row + t, (k - 1) * m + j)] = v - mu;
                }
            }
        }
        row += len;
    }
    let k = m * kx;
    let dof = n as i64 - blocks.len() as i64 - kx as i64;
    if dof <= 0 {
        return Err(Error::InsufficientDepth(format!(
            "{n} observations across {} units for {kx} regressors per equation",
            blocks.len()
        )));
    }
    let names = lag_names(spec);
    let mut b = DVector::zeros(k);
    let mut resid = DMatrix::zeros(n, m);
    let mut xtx_inv = DMatrix::zeros(kx, kx);
    for eq in 0..m {
        let fit = ols(&x, &y.column(eq).into_owned(), Some(&names))?;
        b.rows_mut(eq * kx, kx).copy_from(&fit.coefficients);
        resid.set_column(eq, &fit.residuals);
        xtx_inv = fit.xtx_inv;
    }
    let sigma_ols = resid.transpose() * &resid / dof as f64;
    let mut cov = sigma_ols.kronecker(&xtx_inv);
    symmetrize(&mut cov);
    let lags = unstack(&b, m, p);
    finish(blocks, spec, lags, cov, 0.0, n, k, k)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    blocks: &[UnitBlock],
    spec: &PvarSpec,
    lags: Vec<DMatrix<f64>>,
    coef_cov: DMatrix<f64>,
    j_statistic: f64,
    n_obs: usize,
    n_params: usize,
    n_moments: usize,
) -> Result<PvarFit> {
    let m = spec.variables.len();
    let s = spec.sample_start();
    let mut intercepts = Vec::with_capacity(blocks.len());
    let mut residuals = Vec::with_capacity(blocks.len());
    let mut sigma = DMatrix::zeros(m, m);
    let mut n_level = 0usize;
    for b in blocks {
        let len = b.y.nrows() - s;
        let mut u = DMatrix::zeros(len, m);
        for t in 0..len {
            let mut fitted = DVector::zeros(m);
            for (k, a) in lags.iter().enumerate() {
                fitted += a * b.y.row(s + t - k - 1).transpose();
            }
            for j in 0..m {
                u[(t, j)] = b.y[(s + t, j)] - fitted[j];
            }
        }
        let c = DVector::from_iterator(m, (0..m).map(|j| u.column(j).mean()));
        for t in 0..len {
            for j in 0..m {
                u[(t, j)] -= c[j];
            }
        }
        sigma += u.transpose() * &u;
        n_level += len;
        intercepts.push(c);
        residuals.push(UnitResiduals {
            unit: b.name.clone(),
            first_period: b.first_period + s,
            values: u,
        });
    }
    let denom = n_level.saturating_sub(blocks.len()).max(1);
    sigma /= denom as f64;
    symmetrize(&mut sigma);
    let intercept = intercepts.iter().fold(DVector::zeros(m), |acc, c| acc + c) / blocks.len() as f64;
    let fixed_effects = blocks
        .iter()
        .zip(&intercepts)
        .map(|(b, c)| (b.name.clone(), c - &intercept))
        .collect();
    let fit = PvarFit {
        variables: spec.variables.clone(),
        transform: spec.transform,
        instrument_lags: match spec.transform {
            PvarTransform::ForwardOrthogonalDeviations => Some(spec.instrument_lags),
            PvarTransform::WithinDemean => None,
        },
        lags,
        intercept,
        fixed_effects,
        residuals,
        sigma,
        coef_cov,
        j_statistic,
        n_obs,
        n_params,
        n_moments,
        n_units: blocks.len(),
    };
    if !fit.stability().stable {
        warn!("estimated panel VAR is not stable: the largest companion modulus is at least 1");
    }
    Ok(fit)
}
