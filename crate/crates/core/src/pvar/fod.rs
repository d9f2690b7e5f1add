//! Forward orthogonal deviations (Helmert transform).

use crate::error::{Error, Result};
use crate::panel::PanelDataset;

/// `x*_t = c_t (x_t - mean(x_{t+1..T}))`, `c_t = sqrt((T-t)/(T-t+1))` with
/// `t` counted from 1. The output is one element shorter than the input.
pub fn fod(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return Vec::new();
    }
    let mut out = vec![0.0; n - 1];
    let mut tail_sum = 0.0;
    for t in (0..n - 1).rev() {
        tail_sum += x[t + 1];
        let remaining = (n - 1 - t) as f64;
        let c = (remaining / (remaining + 1.0)).sqrt();
        out[t] = c * (x[t] - tail_sum / remaining);
    }
    out
}

/// Applies [`fod`] per unit to each listed variable, returning a dataset
/// with only those variables. Each unit loses its last observation.
pub fn forward_orthogonal_deviations(
    ds: &PanelDataset,
    variables: &[impl AsRef<str>],
) -> Result<PanelDataset> {
    let mut vars = Vec::with_capacity(variables.len());
    for v in variables {
        let name = v.as_ref();
        let mut cells = Vec::with_capacity(ds.n_units());
        for u in 0..ds.n_units() {
            let (first, obs) = ds.observed(u, name)?;
            if obs.len() < 2 {
                return Err(Error::in_unit(
                    &ds.units()[u],
                    Error::InsufficientDepth(format!(
                        "'{name}' has {} observation(s); forward orthogonal deviations need 2",
                        obs.len()
                    )),
                ));
            }
            let mut col = vec![None; ds.n_periods()];
            for (i, x) in fod(&obs).into_iter().enumerate() {
                col[first + i] = Some(x);
            }
            cells.push(col);
        }
        vars.push((name.to_string(), cells));
    }
    PanelDataset::from_cells(ds.units().to_vec(), ds.start(), ds.n_periods(), vars)
}
