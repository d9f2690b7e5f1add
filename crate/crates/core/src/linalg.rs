//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on the QR diagonal below which a column is treated as
/// a linear combination of the columns before it.
const RANK_TOL: f64 = 1e-10;

/// Ordinary least squares fit.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    pub ssr: f64,
    /// `(X'X)^{-1}`.
    pub xtx_inv: DMatrix<f64>,
    pub n_obs: usize,
}

impl OlsFit {
    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }

    /// Residual variance with a degrees-of-freedom correction.
    pub fn sigma2(&self) -> f64 {
        let dof = self.n_obs.saturating_sub(self.n_params()).max(1);
        self.ssr / dof as f64
    }

    /// Classical standard errors.
    pub fn std_errors(&self) -> DVector<f64> {
        let s2 = self.sigma2();
        DVector::from_iterator(
            self.n_params(),
            (0..self.n_params()).map(|j| (s2 * self.xtx_inv[(j, j)]).max(0.0).sqrt()),
        )
    }
}

/// Least squares of `y` on the columns of `x` via Householder QR.
///
/// Columns that are (numerically) spanned by earlier columns produce
/// [`Error::Collinear`] naming them, using `names` when given.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, names: Option<&[String]>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::Invalid(format!(
            "design has {n} rows but response has {}",
            y.len()
        )));
    }
    if n < k {
        return Err(Error::InsufficientDepth(format!(
            "{n} observations for {k} regressors"
        )));
    }
    // Scale columns so the rank test is unit free.
    let norms: Vec<f64> = (0..k).map(|j| x.column(j).norm()).collect();
    let mut xs = x.clone();
    for (j, &nrm) in norms.iter().enumerate() {
        if nrm > 0.0 {
            xs.column_mut(j).scale_mut(1.0 / nrm);
        }
    }
    let qr = xs.clone().qr();
    let r = qr.r();
    let bad: Vec<usize> = (0..k)
        .filter(|&j| norms[j] == 0.0 || r[(j, j)].abs() < RANK_TOL)
        .collect();
    if !bad.is_empty() {
        let labels = bad
            .iter()
            .map(|&j| match names {
                Some(ns) if j < ns.len() => ns[j].clone(),
                _ => format!("column {j}"),
            })
            .collect();
        return Err(Error::Collinear(labels));
    }
    let qty = qr.q().transpose() * y;
    let bs = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve in OLS".into()))?;
    let coefficients = DVector::from_iterator(k, (0..k).map(|j| bs[j] / norms[j]));
    let residuals = y - x * &coefficients;
    let ssr = residuals.norm_squared();
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Singular("R inverse in OLS".into()))?;
    let mut xtx_inv = &r_inv * r_inv.transpose();
    for i in 0..k {
        for j in 0..k {
            xtx_inv[(i, j)] /= norms[i] * norms[j];
        }
    }
    Ok(OlsFit {
        coefficients,
        residuals,
        ssr,
        xtx_inv,
        n_obs: n,
    })
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))?;
    Ok(chol.inverse())
}

/// Lower Cholesky factor, or [`Error::NotPositiveDefinite`] with the
/// smallest eigenvalue.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match a.clone().cholesky() {
        Some(c) => Ok(c.l()),
        None => Err(Error::NotPositiveDefinite {
            min_eigenvalue: min_sym_eigenvalue(a),
        }),
    }
}

pub fn min_sym_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Symmetrize in place, removing rounding asymmetry.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_exact_line() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let fit = ols(&x, &y, None).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.ssr < 1e-20);
    }

    #[test]
    fn ols_names_collinear_column() {
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 2.0, 1.0, 1.0, 3.0, 1.0, 2.0, 4.0, 1.0, 5.0, 7.0],
        );
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let names = vec!["const".to_string(), "x".to_string(), "x_plus_2".to_string()];
        match ols(&x, &y, Some(&names)) {
            Err(Error::Collinear(cols)) => assert_eq!(cols, vec!["x_plus_2".to_string()]),
            other => panic!("expected collinearity error, got {other:?}"),
        }
    }

    #[test]
    fn xtx_inverse_matches_direct() {
        let x = DMatrix::from_row_slice(5, 2, &[1.0, 0.3, 1.0, -1.2, 1.0, 2.5, 1.0, 0.7, 1.0, 1.1]);
        let y = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.5, 0.4]);
        let fit = ols(&x, &y, None).unwrap();
        let direct = (x.transpose() * &x).try_inverse().unwrap();
        assert!((fit.xtx_inv - direct).abs().max() < 1e-12);
    }

    #[test]
    fn cholesky_reports_smallest_eigenvalue() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match cholesky_lower(&a) {
            Err(Error::NotPositiveDefinite { min_eigenvalue }) => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
