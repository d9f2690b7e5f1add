//! Panel ARDL in error-correction form: Pooled Mean Group and Mean Group.
//!
//! Per unit,
//! `Δy_t = φ (y_{t-1} - θ'x_t) + Σ_{j=1}^{p-1} γ_j Δy_{t-j} + Σ_{j=0}^{q-1} δ_j'Δx_{t-j} + μ + e_t`.
//! PMG restricts `θ` to be common and maximizes the Gaussian likelihood with
//! `φ_i`, the short-run terms and the error variance concentrated out.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ols, spd_inverse, symmetrize};
use crate::panel::PanelDataset;
use crate::stats::{mean, sample_sd};

const MAX_ITERATIONS: usize = 500;
const MAX_HALVINGS: usize = 30;
const THETA_TOL: f64 = 1e-8;

/// 5% lower critical bound (all regressors I(1)) of the error-correction
/// t-ratio with unrestricted intercept and no trend, indexed by the number
/// of long-run regressors 0..=10 (Pesaran, Shin and Smith, 2001).
pub const ECM_T_BOUND_5PCT: [f64; 11] = [
    -2.86, -3.22, -3.53, -3.78, -3.99, -4.19, -4.38, -4.57, -4.72, -4.88, -5.03,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArdlEstimator {
    #[default]
    Pmg,
    Mg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArdlSpec {
    pub dependent: String,
    pub regressors: Vec<String>,
    /// Lag order of `y`; `p - 1` lagged differences enter.
    pub p: usize,
    /// Per regressor, the number of current and lagged differences.
    pub q: Vec<usize>,
    pub estimator: ArdlEstimator,
}

impl ArdlSpec {
    /// ARDL(1, 1, ..., 1).
    pub fn new(dependent: &str, regressors: &[impl AsRef<str>]) -> Self {
        Self {
            dependent: dependent.to_string(),
            regressors: regressors.iter().map(|r| r.as_ref().to_string()).collect(),
            p: 1,
            q: vec![1; regressors.len()],
            estimator: ArdlEstimator::Pmg,
        }
    }

    pub fn with_lags(mut self, p: usize, q: Vec<usize>) -> Self {
        self.p = p;
        self.q = q;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.regressors.is_empty() {
            return Err(Error::Config("ARDL needs at least one long-run regressor".into()));
        }
        if self.p == 0 {
            return Err(Error::Config("ARDL lag order p must be at least 1".into()));
        }
        if self.q.len() != self.regressors.len() {
            return Err(Error::Config(format!(
                "{} regressor lag orders for {} regressors",
                self.q.len(),
                self.regressors.len()
            )));
        }
        let mut all = vec![&self.dependent];
        all.extend(&self.regressors);
        for (i, v) in all.iter().enumerate() {
            if all[..i].contains(v) {
                return Err(Error::Config(format!("variable '{v}' listed twice")));
            }
        }
        Ok(())
    }

    fn start(&self) -> usize {
        self.q.iter().copied().max().unwrap_or(0).max(self.p).max(1)
    }

    fn short_run_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..self.p).map(|j| format!("L{j}.d.{}", self.dependent)).collect();
        for (r, q) in self.regressors.iter().zip(&self.q) {
            for j in 0..*q {
                names.push(if j == 0 { format!("d.{r}") } else { format!("L{j}.d.{r}") });
            }
        }
        names
    }
}

/// Design pieces of one unit: `Δy`, `y_{t-1}`, levels `x_t`, and the
/// short-run block `W` (lagged differences then a constant).
#[derive(Debug, Clone)]
struct UnitData {
    unit: String,
    dy: DVector<f64>,
    y_lag: DVector<f64>,
    x: DMatrix<f64>,
    w: DMatrix<f64>,
}

fn unit_data(ds: &PanelDataset, unit: usize, spec: &ArdlSpec) -> Result<UnitData> {
    let name = &ds.units()[unit];
    let mut vars = vec![spec.dependent.clone()];
    vars.extend(spec.regressors.iter().cloned());
    let (_, block) = ds
        .joint_block(unit, &vars)?
        .ok_or_else(|| Error::in_unit(name, Error::NoObservations))?;
    let s = spec.start();
    let len = block.nrows();
    let k = spec.regressors.len();
    let n_short: usize = spec.p - 1 + spec.q.iter().sum::<usize>();
    let required = s + n_short + k + 3;
    if len < required {
        return Err(Error::in_unit(name, Error::SeriesTooShort { len, required }));
    }
    let n = len - s;
    let col = |j: usize, t: usize| block[(t, j)];
    let d = |j: usize, t: usize| block[(t, j)] - block[(t - 1, j)];
    let dy = DVector::from_iterator(n, (s..len).map(|t| d(0, t)));
    let y_lag = DVector::from_iterator(n, (s..len).map(|t| col(0, t - 1)));
    let x = DMatrix::from_fn(n, k, |r, j| col(j + 1, s + r));
    let mut w = DMatrix::zeros(n, n_short + 1);
    for r in 0..n {
        let t = s + r;
        let mut c = 0;
        for j in 1..spec.p {
            w[(r, c)] = d(0, t - j);
            c += 1;
        }
        for (ri, q) in spec.q.iter().enumerate() {
            for j in 0..*q {
                w[(r, c)] = d(ri + 1, t - j);
                c += 1;
            }
        }
        w[(r, c)] = 1.0;
    }
    Ok(UnitData {
        unit: name.clone(),
        dy,
        y_lag,
        x,
        w,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitArdlFit {
    pub unit: String,
    pub phi: f64,
    pub phi_se: f64,
    pub theta: Vec<f64>,
    pub theta_se: Vec<f64>,
    /// `(name, coefficient, standard error)` for the lagged differences.
    pub short_run: Vec<(String, f64, f64)>,
    pub intercept: f64,
    pub residual_variance: f64,
    pub n_obs: usize,
    /// `φ` outside `(-2, 0)` or its t-ratio above the 5% bound.
    pub non_converging: bool,
}

impl UnitArdlFit {
    pub fn phi_t(&self) -> f64 {
        self.phi / self.phi_se
    }
}

fn ecm_bound(k: usize) -> f64 {
    ECM_T_BOUND_5PCT[k.min(ECM_T_BOUND_5PCT.len() - 1)]
}

fn flag_non_converging(phi: f64, t_phi: f64, k: usize) -> bool {
    !(phi > -2.0 && phi < 0.0) || !(t_phi < ecm_bound(k))
}

fn fit_unit_data(data: &UnitData, spec: &ArdlSpec) -> Result<UnitArdlFit> {
    let n = data.dy.len();
    let k = data.x.ncols();
    let nw = data.w.ncols();
    let mut design = DMatrix::zeros(n, 1 + k + nw);
    design.set_column(0, &data.y_lag);
    design.view_mut((0, 1), (n, k)).copy_from(&data.x);
    design.view_mut((0, 1 + k), (n, nw)).copy_from(&data.w);
    let mut names = vec![format!("L1.{}", spec.dependent)];
    names.extend(spec.regressors.iter().cloned());
    names.extend(spec.short_run_names());
    names.push("constant".into());
    let fit = ols(&design, &data.dy, Some(&names)).map_err(|e| Error::in_unit(&data.unit, e))?;
    let se = fit.std_errors();
    let cov = &fit.xtx_inv * fit.sigma2();
    let phi = fit.coefficients[0];
    let mut theta = Vec::with_capacity(k);
    let mut theta_se = Vec::with_capacity(k);
    for j in 0..k {
        let beta = fit.coefficients[1 + j];
        theta.push(-beta / phi);
        // Delta method on θ = -β/φ.
        let gb = -1.0 / phi;
        let gp = beta / (phi * phi);
        let var = gb * gb * cov[(1 + j, 1 + j)] + gp * gp * cov[(0, 0)] + 2.0 * gb * gp * cov[(0, 1 + j)];
        theta_se.push(var.max(0.0).sqrt());
    }
    let short_run = spec
        .short_run_names()
        .into_iter()
        .enumerate()
        .map(|(j, name)| (name, fit.coefficients[1 + k + j], se[1 + k + j]))
        .collect();
    let t_phi = phi / se[0];
    Ok(UnitArdlFit {
        unit: data.unit.clone(),
        phi,
        phi_se: se[0],
        theta,
        theta_se,
        short_run,
        intercept: fit.coefficients[design.ncols() - 1],
        residual_variance: fit.sigma2(),
        n_obs: n,
        non_converging: flag_non_converging(phi, t_phi, k),
    })
}

/// Unrestricted single-unit ARDL fit; `unit` indexes `ds.units()`.
pub fn fit_unit_ardl(ds: &PanelDataset, unit: usize, spec: &ArdlSpec) -> Result<UnitArdlFit> {
    spec.validate()?;
    for v in std::iter::once(&spec.dependent).chain(&spec.regressors) {
        if !ds.has_variable(v) {
            return Err(Error::UnknownVariable(v.clone()));
        }
    }
    if unit >= ds.n_units() {
        return Err(Error::UnknownUnit(format!("#{unit}")));
    }
    let fit = fit_unit_data(&unit_data(ds, unit, spec)?, spec)?;
    if fit.non_converging {
        warn!(
            "unit '{}': non-converging unit (phi = {:.4}, t = {:.2})",
            fit.unit,
            fit.phi,
            fit.phi_t()
        );
    }
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgFit {
    pub regressors: Vec<String>,
    pub theta_mg: Vec<f64>,
    pub se: Vec<f64>,
    pub phi_mg: f64,
    pub phi_se: f64,
    pub per_unit: Vec<UnitArdlFit>,
    /// Units left out because their fit failed, with the reason.
    pub excluded: Vec<(String, String)>,
}

fn all_unit_data(ds: &PanelDataset, spec: &ArdlSpec) -> Result<Vec<Result<UnitData>>> {
    spec.validate()?;
    for v in std::iter::once(&spec.dependent).chain(&spec.regressors) {
        if !ds.has_variable(v) {
            return Err(Error::UnknownVariable(v.clone()));
        }
    }
    Ok((0..ds.n_units()).map(|u| unit_data(ds, u, spec)).collect())
}

pub fn fit_mg(ds: &PanelDataset, spec: &ArdlSpec) -> Result<MgFit> {
    if ds.n_units() < 2 {
        return Err(Error::Config("Mean Group needs at least two units".into()));
    }
    let data = all_unit_data(ds, spec)?;
    let results: Vec<Result<UnitArdlFit>> = data
        .into_par_iter()
        .map(|d| d.and_then(|d| fit_unit_data(&d, spec)))
        .collect();
    let mut per_unit = Vec::new();
    let mut excluded = Vec::new();
    for (u, r) in results.into_iter().enumerate() {
        match r {
            Ok(f) => {
                if f.non_converging {
                    warn!("unit '{}': non-converging unit (phi = {:.4})", f.unit, f.phi);
                }
                per_unit.push(f)
            }
            Err(e) => {
                warn!("unit '{}' excluded from Mean Group: {e}", ds.units()[u]);
                excluded.push((ds.units()[u].clone(), e.to_string()));
            }
        }
    }
    if per_unit.is_empty() {
        return Err(Error::Invalid("every unit's ARDL fit failed".into()));
    }
    let n = per_unit.len() as f64;
    let k = spec.regressors.len();
    let mut theta_mg = Vec::with_capacity(k);
    let mut se = Vec::with_capacity(k);
    for j in 0..k {
        let v: Vec<f64> = per_unit.iter().map(|f| f.theta[j]).collect();
        theta_mg.push(mean(&v));
        se.push(sample_sd(&v) / n.sqrt());
    }
    let phis: Vec<f64> = per_unit.iter().map(|f| f.phi).collect();
    Ok(MgFit {
        regressors: spec.regressors.clone(),
        theta_mg,
        se,
        phi_mg: mean(&phis),
        phi_se: sample_sd(&phis) / n.sqrt(),
        per_unit,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmgUnit {
    pub unit: String,
    pub phi: f64,
    pub phi_se: f64,
    pub short_run: Vec<(String, f64, f64)>,
    pub intercept: f64,
    pub residual_variance: f64,
    pub n_obs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmgFit {
    pub regressors: Vec<String>,
    pub theta: Vec<f64>,
    pub theta_se: Vec<f64>,
    pub units: Vec<PmgUnit>,
    /// Unweighted mean of the unit `φ_i`.
    pub pooled_phi: f64,
    /// Dispersion-based standard error of `pooled_phi`.
    pub pooled_phi_se: f64,
    /// `(name, mean, dispersion-based standard error)` across units.
    pub short_run_mean: Vec<(String, f64, f64)>,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Log-likelihood after each accepted step, starting at the MG value.
    pub log_likelihood_path: Vec<f64>,
    /// The Hessian at the optimum was not negative definite.
    pub saddle_suspected: bool,
}

/// Unit data with the short-run block partialled out.
struct Concentrated {
    n: f64,
    yh: DVector<f64>,
    ah: DVector<f64>,
    bh: DMatrix<f64>,
}

impl Concentrated {
    fn new(d: &UnitData) -> Result<Self> {
        let wtw = d.w.transpose() * &d.w;
        let wtw_inv = spd_inverse(&wtw, "short-run design").map_err(|_| {
            Error::in_unit(&d.unit, Error::Singular("short-run regressors are collinear".into()))
        })?;
        let proj = |v: &DMatrix<f64>| v - &d.w * (&wtw_inv * (d.w.transpose() * v));
        let yh = proj(&DMatrix::from_column_slice(d.dy.len(), 1, d.dy.as_slice()));
        let ah = proj(&DMatrix::from_column_slice(d.y_lag.len(), 1, d.y_lag.as_slice()));
        Ok(Self {
            n: d.dy.len() as f64,
            yh: yh.column(0).into_owned(),
            ah: ah.column(0).into_owned(),
            bh: proj(&d.x),
        })
    }

    /// `(log-likelihood, gradient, Hessian)` at `theta`.
    fn evaluate(&self, theta: &DVector<f64>, derivatives: bool) -> (f64, DVector<f64>, DMatrix<f64>) {
        let k = theta.len();
        let u = &self.ah - &self.bh * theta;
        let s = u.dot(&self.yh);
        let d = u.dot(&u);
        let phi = s / d;
        let ssr = (self.yh.dot(&self.yh) - s * s / d).max(f64::MIN_POSITIVE);
        let ll = -0.5 * self.n * ((2.0 * std::f64::consts::PI * ssr / self.n).ln() + 1.0);
        if !derivatives {
            return (ll, DVector::zeros(k), DMatrix::zeros(k, k));
        }
        let bty = self.bh.transpose() * &self.yh;
        let btu = self.bh.transpose() * &u;
        let g_ssr = (&bty - &btu * phi) * (2.0 * phi);
        let v = &bty - &btu * (2.0 * phi);
        let h_ssr = -(&v * v.transpose()) * (2.0 / d) + self.bh.transpose() * &self.bh * (2.0 * phi * phi);
        let grad = &g_ssr * (-0.5 * self.n / ssr);
        let hess = (h_ssr / ssr - &g_ssr * g_ssr.transpose() / (ssr * ssr)) * (-0.5 * self.n);
        (ll, grad, hess)
    }
}

fn total(units: &[Concentrated], theta: &DVector<f64>, derivatives: bool) -> (f64, DVector<f64>, DMatrix<f64>) {
    let k = theta.len();
    let mut ll = 0.0;
    let mut g = DVector::zeros(k);
    let mut h = DMatrix::zeros(k, k);
    for u in units {
        let (l, gu, hu) = u.evaluate(theta, derivatives);
        ll += l;
        g += gu;
        h += hu;
    }
    symmetrize(&mut h);
    (ll, g, h)
}

fn is_negative_definite(h: &DMatrix<f64>) -> bool {
    (-h).cholesky().is_some()
}

fn format_trajectory(path: &[DVector<f64>]) -> String {
    let tail = path.len().saturating_sub(5);
    path[tail..]
        .iter()
        .map(|t| {
            let parts: Vec<String> = t.iter().map(|v| format!("{v:.6}")).collect();
            format!("[{}]", parts.join(", "))
        })
        .collect::<Vec<_>>()
        .join(" -> ")
}

pub fn fit_pmg(ds: &PanelDataset, spec: &ArdlSpec) -> Result<PmgFit> {
    let data: Vec<UnitData> = all_unit_data(ds, spec)?.into_iter().collect::<Result<_>>()?;
    if data.is_empty() {
        return Err(Error::NoObservations);
    }
    let k = spec.regressors.len();

    // Start from the Mean Group estimate (the unit estimate when N = 1).
    let unit_fits: Vec<UnitArdlFit> = data
        .par_iter()
        .map(|d| fit_unit_data(d, spec))
        .collect::<Result<_>>()?;
    let theta0 = DVector::from_iterator(
        k,
        (0..k).map(|j| mean(&unit_fits.iter().map(|f| f.theta[j]).collect::<Vec<_>>())),
    );
    let conc: Vec<Concentrated> = data.iter().map(Concentrated::new).collect::<Result<_>>()?;

    let mut theta = theta0;
    let (mut ll, mut grad, mut hess) = total(&conc, &theta, true);
    let mut ll_path = vec![ll];
    let mut trajectory = vec![theta.clone()];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let newton = (-&hess).cholesky().map(|c| c.solve(&grad));
        let direction = match newton {
            Some(step) if step.dot(&grad) > 0.0 => step,
            _ => {
                // Steepest ascent scaled by the Hessian diagonal.
                let scale = hess.diagonal().iter().map(|v| v.abs()).fold(1e-12, f64::max);
                &grad / scale
            }
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = &theta + &direction * step;
            let (cll, _, _) = total(&conc, &cand, false);
            if cll.is_finite() && cll >= ll {
                accepted = Some(cand);
                break;
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            // No ascent even for a vanishing step: already at the optimum.
            converged = true;
            break;
        };
        let change = (&next - &theta).amax();
        theta = next;
        let (nll, ng, nh) = total(&conc, &theta, true);
        assert!(nll >= ll, "log-likelihood decreased from {ll} to {nll}");
        ll = nll;
        grad = ng;
        hess = nh;
        ll_path.push(ll);
        trajectory.push(theta.clone());
        debug!("PMG iteration {iterations}: loglik {ll:.8}, max step {change:e}");
        if change < THETA_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            trajectory: format_trajectory(&trajectory),
        });
    }

    let saddle_suspected = !is_negative_definite(&hess);
    if saddle_suspected {
        warn!("saddle point suspected: PMG Hessian is not negative definite at the optimum");
    }
    let theta_cov = spd_inverse(&(-&hess), "negative Hessian").unwrap_or_else(|_| {
        DMatrix::from_element(k, k, f64::NAN)
    });
    let theta_se: Vec<f64> = (0..k).map(|j| theta_cov[(j, j)].max(0.0).sqrt()).collect();

    // Back out the unit short-run parameters given θ.
    let names = spec.short_run_names();
    let mut units = Vec::with_capacity(data.len());
    for d in &data {
        let n = d.dy.len();
        let nw = d.w.ncols();
        let mut design = DMatrix::zeros(n, 1 + nw);
        design.set_column(0, &(&d.y_lag - &d.x * &theta));
        design.view_mut((0, 1), (n, nw)).copy_from(&d.w);
        let mut cols = vec!["ect".to_string()];
        cols.extend(names.iter().cloned());
        cols.push("constant".into());
        let fit = ols(&design, &d.dy, Some(&cols)).map_err(|e| Error::in_unit(&d.unit, e))?;
        let se = fit.std_errors();
        units.push(PmgUnit {
            unit: d.unit.clone(),
            phi: fit.coefficients[0],
            phi_se: se[0],
            short_run: names
                .iter()
                .enumerate()
                .map(|(j, nm)| (nm.clone(), fit.coefficients[1 + j], se[1 + j]))
                .collect(),
            intercept: fit.coefficients[nw],
            residual_variance: fit.ssr / n as f64,
            n_obs: n,
        });
    }
    for u in &units {
        if !(u.phi < 0.0) {
            warn!("unit '{}': PMG error-correction coefficient {:.4} is not negative", u.unit, u.phi);
        }
    }
    let nu = units.len() as f64;
    let phis: Vec<f64> = units.iter().map(|u| u.phi).collect();
    let short_run_mean = names
        .iter()
        .enumerate()
        .map(|(j, nm)| {
            let v: Vec<f64> = units.iter().map(|u| u.short_run[j].1).collect();
            (nm.clone(), mean(&v), sample_sd(&v) / nu.sqrt())
        })
        .collect();
    Ok(PmgFit {
        regressors: spec.regressors.clone(),
        theta: theta.iter().copied().collect(),
        theta_se,
        units,
        pooled_phi: mean(&phis),
        pooled_phi_se: sample_sd(&phis) / nu.sqrt(),
        short_run_mean,
        log_likelihood: ll,
        iterations,
        log_likelihood_path: ll_path,
        saddle_suspected,
    })
}

/// Months for a deviation to halve, `ln 0.5 / ln(1 + φ)`.
pub fn half_life(phi: f64) -> Result<f64> {
    if !(phi > -1.0 && phi < 0.0) {
        return Err(Error::NoStableHalfLife(phi));
    }
    Ok(0.5f64.ln() / (1.0 + phi).ln())
}
