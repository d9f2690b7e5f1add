//! Companion-form stability of a VAR(p).

use nalgebra::DMatrix;
use serde::Serialize;

/// Stacked first-order form of `y_t = Σ A_k y_{t-k}`.
pub fn companion_matrix(lags: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = lags.len();
    let m = lags.first().map(|a| a.nrows()).unwrap_or(0);
    let mut c = DMatrix::zeros(m * p, m * p);
    for (k, a) in lags.iter().enumerate() {
        c.view_mut((0, k * m), (m, m)).copy_from(a);
    }
    for i in m..m * p {
        c[(i, i - m)] = 1.0;
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Sorted by decreasing modulus.
    pub eigenvalues: Vec<Eigenvalue>,
    /// All moduli strictly below one.
    pub stable: bool,
}

pub fn stability(lags: &[DMatrix<f64>]) -> StabilityReport {
    let c = companion_matrix(lags);
    let mut eigenvalues: Vec<Eigenvalue> = if c.nrows() == 0 {
        Vec::new()
    } else {
        c.complex_eigenvalues()
            .iter()
            .map(|z| Eigenvalue {
                re: z.re,
                im: z.im,
                modulus: z.norm(),
            })
            .collect()
    };
    eigenvalues.sort_by(|a, b| {
        b.modulus
            .total_cmp(&a.modulus)
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    let stable = eigenvalues.iter().all(|e| e.modulus < 1.0);
    StabilityReport {
        eigenvalues,
        stable,
    }
}
