//! Distribution helpers shared by the tests and estimators.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    Normal::standard().cdf(x)
}

/// Upper tail probability of a chi-square variate with `dof` degrees of freedom,
/// `1 - P(dof/2, x/2)` with `P` the regularized lower incomplete gamma.
pub fn chi2_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    ChiSquared::new(dof)
        .map(|d| d.sf(x))
        .unwrap_or(f64::NAN)
}

/// Two-sided normal p-value for a z-statistic.
pub fn two_sided_normal_p(z: f64) -> f64 {
    if !z.is_finite() {
        return if z.is_nan() { f64::NAN } else { 0.0 };
    }
    2.0 * (1.0 - norm_cdf(z.abs()))
}

/// Significance stars: `***` 1%, `**` 5%, `*` 10%.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

/// Empirical quantile of sorted data by linear interpolation between order
/// statistics (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form for even degrees of freedom: e^{-x/2} Σ_{k<dof/2} (x/2)^k / k!.
    fn chi2_sf_even(x: f64, dof: usize) -> f64 {
        let h = x / 2.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..dof / 2 {
            term *= h / k as f64;
            sum += term;
        }
        (-h).exp() * sum
    }

    #[test]
    fn chi2_matches_closed_form_for_even_dof() {
        for &dof in &[2usize, 4, 12, 16] {
            for &x in &[0.1, 1.0, 5.3, 10.5966, 25.0, 40.0] {
                let a = chi2_sf(x, dof as f64);
                let b = chi2_sf_even(x, dof);
                assert!(((a - b) / b).abs() < 1e-12, "dof {dof} x {x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn chi2_boundaries() {
        assert_eq!(chi2_sf(0.0, 4.0), 1.0);
        assert_eq!(chi2_sf(f64::INFINITY, 4.0), 0.0);
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.005), "***");
        assert_eq!(stars(0.03), "**");
        assert_eq!(stars(0.07), "*");
        assert_eq!(stars(0.2), "");
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
        assert!((quantile_sorted(&v, 0.05) - 1.2).abs() < 1e-12);
    }
}
