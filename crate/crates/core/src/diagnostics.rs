//! Specification tests: BP LM poolability, Hausman, Breusch–Pagan/Cook–Weisberg
//! and White heteroskedasticity tests.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::estimators::{is_time_dummy, FitResult, CONSTANT};
use crate::linalg::{self, LinalgError};

const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DiagnosticError {
    #[error("poolability test needs at least 2 years, got {0}")]
    SingleYear(usize),
    #[error("fits share no comparable coefficients")]
    NoCommonCoefficients,
    #[error("auxiliary regression is rank deficient")]
    AuxRankDeficient,
    #[error("auxiliary regression needs n > {regressors} observations, got {n}")]
    TooFewObservations { n: usize, regressors: usize },
    #[error("residual count {residuals} does not match panel {countries}×{years}")]
    ShapeMismatch {
        residuals: usize,
        countries: usize,
        years: usize,
    },
    #[error("linear algebra: {0}")]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, DiagnosticError>;

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub verdict: String,
    /// Raised when the statistic needed a fallback (e.g. a pseudo-inverse).
    pub flagged: bool,
}

pub fn chi2_upper_tail(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df as f64).expect("positive df");
    (1.0 - dist.cdf(stat.max(0.0))).clamp(0.0, 1.0)
}

fn result(name: &str, statistic: f64, df: usize, reject: &str, keep: &str, flagged: bool) -> TestResult {
    let p_value = chi2_upper_tail(statistic, df);
    let verdict = if p_value < 0.05 { reject } else { keep };
    TestResult {
        name: name.to_string(),
        statistic,
        df,
        p_value,
        verdict: verdict.to_string(),
        flagged,
    }
}

/// Breusch–Pagan LM test that the country-effect variance is zero, computed
/// from pooled OLS residuals in country-major order.
pub fn bp_lm_poolability(residuals: &[f64], n_countries: usize, n_years: usize) -> Result<TestResult> {
    if n_years < 2 {
        return Err(DiagnosticError::SingleYear(n_years));
    }
    if residuals.len() != n_countries * n_years {
        return Err(DiagnosticError::ShapeMismatch {
            residuals: residuals.len(),
            countries: n_countries,
            years: n_years,
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for chunk in residuals.chunks(n_years) {
        let s: f64 = chunk.iter().sum();
        num += s * s;
        den += chunk.iter().map(|e| e * e).sum::<f64>();
    }
    let nt = (n_countries * n_years) as f64;
    let t = n_years as f64;
    let stat = if den > 0.0 {
        nt / (2.0 * (t - 1.0)) * (num / den - 1.0).powi(2)
    } else {
        0.0
    };
    Ok(result(
        "Breusch-Pagan LM (poolability)",
        stat,
        1,
        "reject poolability → prefer panel estimators",
        "cannot reject poolability → pooled OLS adequate",
        false,
    ))
}

/// Hausman test on the classical covariances of an FE and an RE fit,
/// comparing coefficients present in both except time dummies and the constant.
pub fn hausman(fe: &FitResult, re: &FitResult) -> Result<TestResult> {
    let common: Vec<(usize, usize)> = fe
        .names
        .iter()
        .enumerate()
        .filter(|(_, n)| n.as_str() != CONSTANT && !is_time_dummy(n))
        .filter_map(|(i, n)| re.index(n).map(|j| (i, j)))
        .collect();
    if common.is_empty() {
        return Err(DiagnosticError::NoCommonCoefficients);
    }
    let k = common.len();
    let db = DVector::from_fn(k, |a, _| fe.coefficients[common[a].0] - re.coefficients[common[a].1]);
    let dv = DMatrix::from_fn(k, k, |a, b| {
        fe.classical_vcov[(common[a].0, common[b].0)] - re.classical_vcov[(common[a].1, common[b].1)]
    });
    let dv = (&dv + dv.transpose()) * 0.5;
    hausman_from_parts(&db, &dv)
}

/// Hausman statistic from a coefficient difference and covariance difference.
pub fn hausman_from_parts(db: &DVector<f64>, dv: &DMatrix<f64>) -> Result<TestResult> {
    let k = db.len();
    let (stat, df, flagged) = match (linalg::is_psd(dv, PSD_TOL), linalg::spd_inverse(dv, PSD_TOL)) {
        (true, Ok(inv)) => ((db.transpose() * inv * db)[(0, 0)], k, false),
        _ => {
            let (pinv, kept) = linalg::positive_part_pinv(dv, PSD_TOL)?;
            log::warn!("Hausman covariance difference not positive definite; using pseudo-inverse");
            ((db.transpose() * pinv * db)[(0, 0)], kept, true)
        }
    };
    let mut r = result(
        "Hausman (FE vs RE)",
        stat.max(0.0),
        df,
        "reject RE consistency → prefer fixed effects",
        "cannot reject → random effects consistent and efficient",
        flagged,
    );
    if flagged {
        r.verdict.push_str(" [covariance difference not positive definite; pseudo-inverse used]");
    }
    Ok(r)
}

fn aux_r_squared(z: &DMatrix<f64>, target: &DVector<f64>) -> Result<(f64, f64)> {
    if !linalg::dependent_columns(z, 1e-10).is_empty() {
        return Err(DiagnosticError::AuxRankDeficient);
    }
    let m = target.mean();
    let tss: f64 = target.iter().map(|t| (t - m) * (t - m)).sum();
    if tss == 0.0 {
        return Ok((0.0, 0.0));
    }
    let (b, _) = linalg::qr_least_squares(z, target)?;
    let fitted = z * b;
    let ess: f64 = fitted.iter().map(|f| (f - m) * (f - m)).sum();
    Ok((ess, ess / tss))
}

/// Breusch–Pagan / Cook–Weisberg test against variance depending on the
/// fitted values.
pub fn bp_hettest(fit: &FitResult) -> Result<TestResult> {
    let n = fit.residuals.len();
    let sigma2 = fit.residuals.norm_squared() / n as f64;
    let stat = if sigma2 > 0.0 && n > 2 {
        let target = fit.residuals.map(|e| e * e / sigma2);
        let fitted = &fit.fitted;
        let spread = fitted.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - fitted.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if spread > 0.0 {
            let z = DMatrix::from_fn(n, 2, |r, c| if c == 0 { 1.0 } else { fitted[r] });
            aux_r_squared(&z, &target)?.0 / 2.0
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok(result(
        "Breusch-Pagan / Cook-Weisberg",
        stat,
        1,
        "reject constant variance → use robust standard errors",
        "cannot reject constant variance",
        false,
    ))
}

/// Auxiliary design of the White test: constant, regressors, squares and
/// cross-products, with exact duplicates (e.g. a squared dummy) and all-zero
/// columns removed.
pub fn white_design(x: &DMatrix<f64>, names: &[String]) -> DMatrix<f64> {
    let n = x.nrows();
    let base: Vec<usize> = (0..x.ncols()).filter(|&j| names.get(j).is_none_or(|s| s != CONSTANT)).collect();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut push = |v: DVector<f64>| {
        if v.iter().all(|&e| e == 0.0) {
            return;
        }
        // +0.0 and -0.0 compare equal
        let key: Vec<u64> = v.iter().map(|&e| (e + 0.0).to_bits()).collect();
        if seen.insert(key) {
            cols.push(v);
        }
    };
    push(DVector::from_element(n, 1.0));
    for &j in &base {
        push(x.column(j).into_owned());
    }
    for (a, &i) in base.iter().enumerate() {
        for &j in &base[a..] {
            push(x.column(i).component_mul(&x.column(j)));
        }
    }
    DMatrix::from_columns(&cols)
}

/// White's general heteroskedasticity test, `n·R²` of `e²` on the White
/// auxiliary design; df counts auxiliary regressors besides the constant.
pub fn white_test(fit: &FitResult, x: &DMatrix<f64>, names: &[String]) -> Result<TestResult> {
    let z = white_design(x, names);
    let n = z.nrows();
    if n <= z.ncols() {
        return Err(DiagnosticError::TooFewObservations { n, regressors: z.ncols() });
    }
    let target = fit.residuals.map(|e| e * e);
    let (_, r2) = aux_r_squared(&z, &target)?;
    Ok(result(
        "White",
        n as f64 * r2,
        z.ncols() - 1,
        "reject homoskedasticity → use robust standard errors",
        "cannot reject homoskedasticity",
        false,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lm_plug_in_cases() {
        // each country's residuals sum to zero, T = 2
        let e = [1.0, -1.0, 0.5, -0.5, 2.0, -2.0];
        let r = bp_lm_poolability(&e, 3, 2).unwrap();
        assert!((r.statistic - 3.0).abs() < 1e-12);
        // residuals constant within each country, T = 2
        let e = [1.0, 1.0, -0.3, -0.3, 2.0, 2.0, 0.1, 0.1];
        let r = bp_lm_poolability(&e, 4, 2).unwrap();
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert_eq!(r.df, 1);
        assert!(matches!(bp_lm_poolability(&[1.0, 2.0], 2, 1), Err(DiagnosticError::SingleYear(1))));
    }

    #[test]
    fn hausman_diagonal_closed_form() {
        let db = DVector::from_vec(vec![0.3, -0.2]);
        let dv = DMatrix::from_diagonal(&DVector::from_vec(vec![0.04, 0.01]));
        let r = hausman_from_parts(&db, &dv).unwrap();
        let expected = 0.09 / 0.04 + 0.04 / 0.01;
        assert!((r.statistic - expected).abs() < 1e-12);
        assert_eq!(r.df, 2);
        assert!(!r.flagged);
        let zero = hausman_from_parts(&DVector::zeros(2), &dv).unwrap();
        assert_eq!(zero.statistic, 0.0);
    }

    #[test]
    fn hausman_scale_invariance_and_flag() {
        let db = DVector::from_vec(vec![0.3, -0.2, 0.1]);
        let dv = DMatrix::from_row_slice(3, 3, &[0.05, 0.01, 0.0, 0.01, 0.02, 0.003, 0.0, 0.003, 0.01]);
        let a = hausman_from_parts(&db, &dv).unwrap().statistic;
        let c = 3.7;
        let b = hausman_from_parts(&(&db * c), &(&dv * (c * c))).unwrap().statistic;
        assert!((a - b).abs() < 1e-10 * a);

        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![0.04, -0.01]));
        let r = hausman_from_parts(&DVector::from_vec(vec![0.2, 0.2]), &bad).unwrap();
        assert!(r.flagged);
        assert_eq!(r.df, 1);
        assert!((r.statistic - 1.0).abs() < 1e-12);
    }

    #[test]
    fn white_deduplicates_binary_regressor() {
        let x = DMatrix::from_fn(10, 2, |r, c| if c == 1 { 1.0 } else { (r % 2) as f64 });
        let names = vec!["x".to_string(), CONSTANT.to_string()];
        let z = white_design(&x, &names);
        // constant and x only: x² = x and x·1 = x collapse
        assert_eq!(z.ncols(), 2);
    }

    #[test]
    fn chi2_tail_edges() {
        assert!((chi2_upper_tail(0.0, 3) - 1.0).abs() < 1e-15);
        assert!((chi2_upper_tail(3.841458820694124, 1) - 0.05).abs() < 1e-9);
    }
}
