//! Seeded data-generating processes with known parameters.
//!
//! Every dataset is drawn from a single ChaCha20 stream seeded by
//! [`DgpConfig::seed`], so a seed fixes the output bit for bit.

mod fixture;

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cholesky_lower;
use crate::panel::PanelDataset;
use crate::pvar::stability;
use crate::time::YearMonth;

pub use fixture::{sector_fixture, write_sector_fixture, SectorFixture, FIXTURE_COUNTRIES};

/// Name of the random source, written into every generated file header.
pub const GENERATOR: &str = "ChaCha20Rng (rand_chacha 0.9), rand_distr 0.5 StandardNormal";

pub const DEFAULT_BURN_IN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    PanelVar,
    CointegratedEcm,
    IndependentRandomWalks,
    WhiteNoise,
}

impl std::str::FromStr for DgpKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "panel_var" => Ok(DgpKind::PanelVar),
            "cointegrated_ecm" => Ok(DgpKind::CointegratedEcm),
            "independent_random_walks" => Ok(DgpKind::IndependentRandomWalks),
            "white_noise" => Ok(DgpKind::WhiteNoise),
            other => Err(format!(
                "unknown DGP kind '{other}', expected panel_var, cointegrated_ecm, \
                 independent_random_walks or white_noise"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum Innovations {
    #[default]
    Gaussian,
    /// Student t rescaled to unit variance; needs `dof > 2`.
    StudentT { dof: f64 },
}

/// Single-equation error correction for `y` against random-walk regressors:
/// `Δy_t = μ_i + φ_i (y_{t-1} - θ_i'x_{t-1}) + δ'Δx_t + u_t`.
///
/// Unit `i` of `N` gets `θ_i = θ + theta_spread·s_i` (every component) and
/// `φ_i = φ + phi_spread·s_i` with `s_i` evenly spaced on `[-1, 1]`, so a
/// nonzero spread in both makes adjustment speed covary with the long run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcmParams {
    pub theta: Vec<f64>,
    pub phi: f64,
    pub delta: Vec<f64>,
    pub sigma_u: f64,
    pub sigma_x: f64,
    #[serde(default)]
    pub theta_spread: f64,
    #[serde(default)]
    pub phi_spread: f64,
}

impl EcmParams {
    pub fn new(theta: Vec<f64>, phi: f64) -> Self {
        let k = theta.len();
        Self {
            theta,
            phi,
            delta: vec![0.0; k],
            sigma_u: 1.0,
            sigma_x: 1.0,
            theta_spread: 0.0,
            phi_spread: 0.0,
        }
    }

    fn spacing(i: usize, n: usize) -> f64 {
        if n <= 1 {
            0.0
        } else {
            -1.0 + 2.0 * i as f64 / (n - 1) as f64
        }
    }

    pub fn unit_theta(&self, i: usize, n: usize) -> Vec<f64> {
        let s = Self::spacing(i, n);
        self.theta.iter().map(|t| t + self.theta_spread * s).collect()
    }

    pub fn unit_phi(&self, i: usize, n: usize) -> f64 {
        self.phi + self.phi_spread * Self::spacing(i, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub kind: DgpKind,
    pub n_units: usize,
    pub n_periods: usize,
    pub seed: u64,
    /// Standard deviation of the unit intercepts.
    pub fixed_effect_scale: f64,
    pub variables: Vec<String>,
    /// `A_1..A_p` for [`DgpKind::PanelVar`].
    #[serde(skip)]
    pub var_lags: Vec<DMatrix<f64>>,
    /// Innovation covariance for the multivariate kinds.
    #[serde(skip)]
    pub innovation_cov: DMatrix<f64>,
    /// Allows a non-stable [`DgpKind::PanelVar`].
    pub unit_root: bool,
    pub ecm: Option<EcmParams>,
    pub innovations: Innovations,
    pub burn_in: usize,
    pub start: YearMonth,
}

fn default_names(prefix: &str, m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("{prefix}{i}")).collect()
}

fn default_start() -> YearMonth {
    YearMonth::new(2010, 1).expect("valid month")
}

impl DgpConfig {
    fn base(kind: DgpKind, variables: Vec<String>, n_units: usize, n_periods: usize, seed: u64) -> Self {
        let m = variables.len();
        Self {
            kind,
            n_units,
            n_periods,
            seed,
            fixed_effect_scale: 1.0,
            variables,
            var_lags: Vec::new(),
            innovation_cov: DMatrix::identity(m, m),
            unit_root: false,
            ecm: None,
            innovations: Innovations::Gaussian,
            burn_in: DEFAULT_BURN_IN,
            start: default_start(),
        }
    }

    /// Panel VAR with variables `y1..ym`.
    pub fn panel_var(
        lags: Vec<DMatrix<f64>>,
        innovation_cov: DMatrix<f64>,
        n_units: usize,
        n_periods: usize,
        seed: u64,
    ) -> Self {
        let m = innovation_cov.nrows();
        let mut cfg = Self::base(DgpKind::PanelVar, default_names("y", m), n_units, n_periods, seed);
        cfg.var_lags = lags;
        cfg.innovation_cov = innovation_cov;
        cfg
    }

    /// Error-correcting `y` against regressors `x1..xk`.
    pub fn cointegrated_ecm(params: EcmParams, n_units: usize, n_periods: usize, seed: u64) -> Self {
        let mut vars = vec!["y".to_string()];
        vars.extend(default_names("x", params.theta.len()));
        let mut cfg = Self::base(DgpKind::CointegratedEcm, vars, n_units, n_periods, seed);
        cfg.ecm = Some(params);
        cfg
    }

    /// Mutually independent random walks `y, x1..x(m-1)`.
    pub fn independent_random_walks(m: usize, n_units: usize, n_periods: usize, seed: u64) -> Self {
        let mut vars = vec!["y".to_string()];
        vars.extend(default_names("x", m.saturating_sub(1)));
        Self::base(DgpKind::IndependentRandomWalks, vars, n_units, n_periods, seed)
    }

    /// Unit mean plus white noise, variables `y, x1..`.
    pub fn white_noise(m: usize, n_units: usize, n_periods: usize, seed: u64) -> Self {
        let mut vars = vec!["y".to_string()];
        vars.extend(default_names("x", m.saturating_sub(1)));
        Self::base(DgpKind::WhiteNoise, vars, n_units, n_periods, seed)
    }

    pub fn with_variables(mut self, names: &[impl AsRef<str>]) -> Self {
        self.variables = names.iter().map(|n| n.as_ref().to_string()).collect();
        self
    }

    pub fn with_innovations(mut self, innovations: Innovations) -> Self {
        self.innovations = innovations;
        self
    }

    pub fn with_fixed_effect_scale(mut self, scale: f64) -> Self {
        self.fixed_effect_scale = scale;
        self
    }

    pub fn with_innovation_cov(mut self, cov: DMatrix<f64>) -> Self {
        self.innovation_cov = cov;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 || self.n_periods == 0 {
            return Err(Error::Config("need at least one unit and one period".into()));
        }
        if self.variables.is_empty() {
            return Err(Error::Config("no variables".into()));
        }
        if !(self.fixed_effect_scale.is_finite() && self.fixed_effect_scale >= 0.0) {
            return Err(Error::Config("fixed_effect_scale must be finite and non-negative".into()));
        }
        if let Innovations::StudentT { dof } = self.innovations {
            if !(dof > 2.0) {
                return Err(Error::Config(format!("Student t innovations need dof > 2, got {dof}")));
            }
        }
        let m = self.variables.len();
        match self.kind {
            DgpKind::PanelVar => {
                if self.var_lags.is_empty() {
                    return Err(Error::Config("panel_var needs at least one lag matrix".into()));
                }
                if self.var_lags.iter().any(|a| a.shape() != (m, m)) {
                    return Err(Error::Config(format!("lag matrices must be {m} x {m}")));
                }
                if !self.unit_root && !stability(&self.var_lags).stable {
                    return Err(Error::Config(
                        "panel_var parameters are not stable; set unit_root to allow this".into(),
                    ));
                }
            }
            DgpKind::CointegratedEcm => {
                let e = self
                    .ecm
                    .as_ref()
                    .ok_or_else(|| Error::Config("cointegrated_ecm needs ecm parameters".into()))?;
                if e.theta.is_empty() || e.delta.len() != e.theta.len() || m != e.theta.len() + 1 {
                    return Err(Error::Config(
                        "ecm theta and delta must have one entry per regressor".into(),
                    ));
                }
                for i in 0..self.n_units {
                    let phi = e.unit_phi(i, self.n_units);
                    if !(phi > -2.0 && phi < 0.0) {
                        return Err(Error::Config(format!(
                            "unit {i} error-correction speed {phi} is outside (-2, 0)"
                        )));
                    }
                }
            }
            DgpKind::IndependentRandomWalks | DgpKind::WhiteNoise => {}
        }
        if self.kind != DgpKind::CointegratedEcm && self.innovation_cov.shape() != (m, m) {
            return Err(Error::Config(format!("innovation covariance must be {m} x {m}")));
        }
        Ok(())
    }

    pub fn unit_names(&self) -> Vec<String> {
        (1..=self.n_units).map(|i| format!("u{i:02}")).collect()
    }
}

/// Known parameters of a generated panel, one value per row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthRow {
    pub parameter: String,
    /// Empty for parameters shared by all units.
    pub unit: String,
    pub value: f64,
}

struct Draws {
    rng: ChaCha20Rng,
    innovations: Innovations,
}

impl Draws {
    fn new(seed: u64, innovations: Innovations) -> Result<Self> {
        if let Innovations::StudentT { dof } = innovations {
            StudentT::new(dof).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            innovations,
        })
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Unit-variance innovation of the configured family.
    fn shock(&mut self) -> f64 {
        match self.innovations {
            Innovations::Gaussian => self.normal(),
            Innovations::StudentT { dof } => {
                let t: f64 = StudentT::new(dof).expect("validated").sample(&mut self.rng);
                t * ((dof - 2.0) / dof).sqrt()
            }
        }
    }

    fn vector(&mut self, chol: &DMatrix<f64>) -> DVector<f64> {
        let m = chol.nrows();
        let z = DVector::from_iterator(m, (0..m).map(|_| self.shock()));
        chol * z
    }
}

pub fn generate(cfg: &DgpConfig) -> Result<PanelDataset> {
    generate_with_truth(cfg).map(|(ds, _)| ds)
}

pub fn generate_with_truth(cfg: &DgpConfig) -> Result<(PanelDataset, Vec<TruthRow>)> {
    generate_inner(cfg, None)
}

/// Like [`generate`] for [`DgpKind::PanelVar`], but the pre-sample state
/// (`p` rows of `m` values, most recent last) replaces zeros.
pub fn generate_with_initial(cfg: &DgpConfig, initial: &DMatrix<f64>) -> Result<PanelDataset> {
    if cfg.kind != DgpKind::PanelVar {
        return Err(Error::Config("initial states apply to panel_var only".into()));
    }
    generate_inner(cfg, Some(initial)).map(|(ds, _)| ds)
}

fn generate_inner(cfg: &DgpConfig, initial: Option<&DMatrix<f64>>) -> Result<(PanelDataset, Vec<TruthRow>)> {
    cfg.validate()?;
    let mut draws = Draws::new(cfg.seed, cfg.innovations)?;
    let m = cfg.variables.len();
    let total = cfg.burn_in + cfg.n_periods;
    let units = cfg.unit_names();
    let mut cells = vec![vec![vec![None; cfg.n_periods]; cfg.n_units]; m];
    let mut truth = Vec::new();

    let mut store = |u: usize, t: usize, values: &[f64]| {
        if t >= cfg.burn_in {
            for (j, v) in values.iter().enumerate() {
                cells[j][u][t - cfg.burn_in] = Some(*v);
            }
        }
    };

    match cfg.kind {
        DgpKind::PanelVar => {
            let chol = cholesky_lower(&cfg.innovation_cov)?;
            let p = cfg.var_lags.len();
            for (k, a) in cfg.var_lags.iter().enumerate() {
                for i in 0..m {
                    for j in 0..m {
                        truth.push(TruthRow {
                            parameter: format!("A{}_{}_{}", k + 1, cfg.variables[i], cfg.variables[j]),
                            unit: String::new(),
                            value: a[(i, j)],
                        });
                    }
                }
            }
            push_cov(&mut truth, &cfg.variables, &cfg.innovation_cov);
            if let Some(init) = initial {
                if init.shape() != (p, m) {
                    return Err(Error::Config(format!("initial state must be {p} x {m}")));
                }
            }
            for u in 0..cfg.n_units {
                let alpha = DVector::from_iterator(m, (0..m).map(|_| cfg.fixed_effect_scale * draws.normal()));
                for j in 0..m {
                    truth.push(TruthRow {
                        parameter: format!("intercept_{}", cfg.variables[j]),
                        unit: units[u].clone(),
                        value: alpha[j],
                    });
                }
                // history[0] is the most recent value.
                let mut history: Vec<DVector<f64>> = (0..p)
                    .map(|k| match initial {
                        Some(init) => init.row(p - 1 - k).transpose(),
                        None => DVector::zeros(m),
                    })
                    .collect();
                for t in 0..total {
                    let mut y = &alpha + draws.vector(&chol);
                    for (k, a) in cfg.var_lags.iter().enumerate() {
                        y += a * &history[k];
                    }
                    store(u, t, y.as_slice());
                    history.rotate_right(1);
                    history[0] = y;
                }
            }
        }
        DgpKind::CointegratedEcm => {
            let e = cfg.ecm.as_ref().expect("validated");
            let k = e.theta.len();
            for u in 0..cfg.n_units {
                let theta = e.unit_theta(u, cfg.n_units);
                let phi = e.unit_phi(u, cfg.n_units);
                let mu = cfg.fixed_effect_scale * draws.normal();
                for (j, th) in theta.iter().enumerate() {
                    truth.push(TruthRow {
                        parameter: format!("theta_{}", cfg.variables[j + 1]),
                        unit: units[u].clone(),
                        value: *th,
                    });
                }
                truth.push(TruthRow {
                    parameter: "phi".into(),
                    unit: units[u].clone(),
                    value: phi,
                });
                truth.push(TruthRow {
                    parameter: "intercept".into(),
                    unit: units[u].clone(),
                    value: mu,
                });
                let mut x = vec![0.0; k];
                // Start on the long-run relation.
                let mut y = -mu / phi;
                for t in 0..total {
                    let dx: Vec<f64> = (0..k).map(|_| e.sigma_x * draws.shock()).collect();
                    let gap = y - theta.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
                    let dy = mu
                        + phi * gap
                        + e.delta.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>()
                        + e.sigma_u * draws.shock();
                    y += dy;
                    for (xi, d) in x.iter_mut().zip(&dx) {
                        *xi += d;
                    }
                    let mut row = vec![y];
                    row.extend_from_slice(&x);
                    store(u, t, &row);
                }
            }
            for (j, d) in e.delta.iter().enumerate() {
                truth.push(TruthRow {
                    parameter: format!("delta_{}", cfg.variables[j + 1]),
                    unit: String::new(),
                    value: *d,
                });
            }
        }
        DgpKind::IndependentRandomWalks | DgpKind::WhiteNoise => {
            let chol = cholesky_lower(&cfg.innovation_cov)?;
            push_cov(&mut truth, &cfg.variables, &cfg.innovation_cov);
            for u in 0..cfg.n_units {
                let alpha = DVector::from_iterator(m, (0..m).map(|_| cfg.fixed_effect_scale * draws.normal()));
                let mut level = alpha.clone();
                for t in 0..total {
                    let e = draws.vector(&chol);
                    let y = if cfg.kind == DgpKind::WhiteNoise {
                        &alpha + e
                    } else {
                        level += e;
                        level.clone()
                    };
                    store(u, t, y.as_slice());
                }
            }
        }
    }

    let vars = cfg.variables.iter().cloned().zip(cells).collect();
    let ds = PanelDataset::from_cells(units, cfg.start, cfg.n_periods, vars)?;
    Ok((ds, truth))
}

fn push_cov(truth: &mut Vec<TruthRow>, names: &[String], cov: &DMatrix<f64>) {
    for i in 0..names.len() {
        for j in 0..=i {
            truth.push(TruthRow {
                parameter: format!("cov_{}_{}", names[i], names[j]),
                unit: String::new(),
                value: cov[(i, j)],
            });
        }
    }
}

/// Writes the truth sidecar as `parameter,unit,value` after `# ` comments.
pub fn write_truth_csv(path: impl AsRef<Path>, cfg: &DgpConfig, truth: &[TruthRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for line in header_lines(cfg) {
        writeln!(w, "# {line}")?;
    }
    let mut cw = csv::Writer::from_writer(w);
    for row in truth {
        cw.serialize(row)?;
    }
    cw.flush()?;
    Ok(())
}

/// Writes the panel in long format with a provenance header.
pub fn write_simulated_panel(path: impl AsRef<Path>, cfg: &DgpConfig, ds: &PanelDataset) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for line in header_lines(cfg) {
        writeln!(w, "# {line}")?;
    }
    ds.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn header_lines(cfg: &DgpConfig) -> Vec<String> {
    vec![
        format!("generator: {GENERATOR}"),
        format!(
            "dgp: {:?}, units {}, periods {}, burn-in {}, seed {}, innovations {:?}",
            cfg.kind, cfg.n_units, cfg.n_periods, cfg.burn_in, cfg.seed, cfg.innovations
        ),
    ]
}

/// Uniform draw helper shared with the fixture generator.
fn uniform(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
