use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary least-squares line `y = slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: Option<f64>,
    pub n: usize,
}

/// `time = coefficient · n^exponent`, fitted in log-log space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub r_squared: Option<f64>,
    pub n: usize,
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::dim("ols", &[x.len()], &[y.len()]));
    }
    if x.len() < 2 {
        return Err(Error::Regression(format!("need at least 2 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Regression("non-finite input".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if sxx <= (scale * 1e-12).powi(2) * n {
        return Err(Error::Regression("all abscissae are equal".into()));
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared: (syy > 0.0).then(|| (sxy * sxy) / (sxx * syy)),
        n: x.len(),
    })
}

/// OLS of case MAE against each case's similarity to the reference design.
pub fn similarity_regression(mae: &[f64], similarity: &[f64]) -> Result<LinearFit> {
    ols(similarity, mae)
}

/// Fits `log t = log a + k log n`. Needs at least three distinct sizes
/// spanning two decades.
pub fn fit_power_law(sizes: &[usize], seconds: &[f64]) -> Result<PowerLawFit> {
    if sizes.len() != seconds.len() {
        return Err(Error::dim("fit_power_law", &[sizes.len()], &[seconds.len()]));
    }
    let mut distinct: Vec<usize> = sizes.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Regression(format!(
            "need at least 3 distinct node counts, got {}",
            distinct.len()
        )));
    }
    let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
    if lo == 0 || (hi as f64) < 100.0 * lo as f64 {
        return Err(Error::Regression(format!(
            "node counts {lo}..{hi} span less than two decades"
        )));
    }
    if let Some(t) = seconds.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::Regression(format!("timing {t} is not positive")));
    }
    let lx: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = seconds.iter().map(|t| t.ln()).collect();
    let fit = ols(&lx, &ly)?;
    Ok(PowerLawFit {
        exponent: fit.slope,
        coefficient: fit.intercept.exp(),
        r_squared: fit.r_squared,
        n: fit.n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovery() {
        let s = [0.0, 0.3, 1.1, 2.0, 2.7];
        let mae: Vec<f64> = s.iter().map(|v| 2.0 * v + 1.0).collect();
        let f = similarity_regression(&mae, &s).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-10);
        assert!((f.intercept - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_mae_has_zero_slope() {
        let f = similarity_regression(&[0.7; 4], &[0.1, 0.5, 0.9, 1.4]).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert_eq!(f.r_squared, None);
    }

    #[test]
    fn order_does_not_matter() {
        let a = similarity_regression(&[1.0, 4.0, 2.0, 3.5], &[0.1, 0.9, 0.4, 0.6]).unwrap();
        let b = similarity_regression(&[3.5, 2.0, 1.0, 4.0], &[0.6, 0.4, 0.1, 0.9]).unwrap();
        assert!((a.slope - b.slope).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(similarity_regression(&[1.0, 2.0], &[0.5, 0.5]), Err(Error::Regression(_))));
        assert!(similarity_regression(&[1.0], &[0.5]).is_err());
    }

    #[test]
    fn linear_timings_give_unit_exponent() {
        let n = [100, 1000, 10_000, 50_000];
        let t: Vec<f64> = n.iter().map(|&v| 3e-7 * v as f64).collect();
        let f = fit_power_law(&n, &t).unwrap();
        assert!((f.exponent - 1.0).abs() < 1e-6);
        let ms: Vec<f64> = t.iter().map(|v| v * 1e3).collect();
        let g = fit_power_law(&n, &ms).unwrap();
        assert!((g.exponent - f.exponent).abs() < 1e-12);
    }

    #[test]
    fn power_law_preconditions() {
        assert!(fit_power_law(&[100, 1000], &[1.0, 2.0]).is_err());
        assert!(fit_power_law(&[100, 200, 900], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_power_law(&[100, 1000, 10_000], &[1.0, 0.0, 3.0]).is_err());
    }
}
