//! Pooled OLS, fixed-effects (within) and random-effects (GLS) estimators
//! with classical, HC1 and country-clustered covariance matrices.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::panel::{PanelDataset, PanelError};

pub const CONSTANT: &str = "Constant";
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("design matrix is rank deficient; collinear columns: {0:?}")]
    RankDeficient(Vec<String>),
    #[error("regressors without within-country variation: {0:?}")]
    NoWithinVariation(Vec<String>),
    #[error("cluster-robust covariance needs at least 2 clusters, got {0}")]
    TooFewClusters(usize),
    #[error("regressor `{0}` requested twice")]
    DuplicateRegressor(String),
    #[error("outcome `{0}` cannot also be a regressor")]
    OutcomeAsRegressor(String),
    #[error("year dummies need at least 2 years")]
    TooFewYears,
    #[error("not enough degrees of freedom ({what})")]
    DegreesOfFreedom { what: &'static str },
    #[error("linear algebra: {0}")]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, EstimationError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    PooledOls,
    FixedEffects,
    RandomEffects,
}

impl Estimator {
    pub fn label(self) -> &'static str {
        match self {
            Estimator::PooledOls => "Pooled OLS",
            Estimator::FixedEffects => "Fixed Effects",
            Estimator::RandomEffects => "Random Effects",
        }
    }

    /// Covariance used when "robust" errors are requested.
    pub fn robust_kind(self) -> VcovKind {
        match self {
            Estimator::PooledOls => VcovKind::Hc1,
            Estimator::FixedEffects | Estimator::RandomEffects => VcovKind::ClusterCountry,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VcovKind {
    Classical,
    Hc1,
    ClusterCountry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RSquaredKind {
    Overall,
    Within,
}

impl RSquaredKind {
    pub fn label(self) -> &'static str {
        match self {
            RSquaredKind::Overall => "overall",
            RSquaredKind::Within => "within",
        }
    }
}

/// What to regress on what.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub outcome: String,
    pub regressors: Vec<String>,
    pub include_year_dummies: bool,
    pub include_constant: bool,
    pub estimator: Estimator,
    pub vcov: VcovKind,
}

impl DesignSpec {
    pub fn new(outcome: impl Into<String>, regressors: Vec<String>) -> Self {
        Self {
            outcome: outcome.into(),
            regressors,
            include_year_dummies: false,
            include_constant: true,
            estimator: Estimator::PooledOls,
            vcov: VcovKind::Classical,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.regressors {
            if *r == self.outcome {
                return Err(EstimationError::OutcomeAsRegressor(r.clone()));
            }
            if !seen.insert(r.as_str()) {
                return Err(EstimationError::DuplicateRegressor(r.clone()));
            }
        }
        Ok(())
    }
}

/// Numeric design: `y`, `X` (regressors, time dummies, constant last) and
/// the country of each row.
#[derive(Debug, Clone)]
pub struct Design {
    pub spec: DesignSpec,
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub groups: Vec<usize>,
    pub n_groups: usize,
    pub n_periods: usize,
}

impl Design {
    pub fn build(data: &PanelDataset, spec: &DesignSpec) -> Result<Self> {
        spec.validate()?;
        let n = data.n_rows();
        let t = data.n_years();
        let y = DVector::from_column_slice(data.column(&spec.outcome)?);
        let mut names: Vec<String> = spec.regressors.clone();
        let mut cols: Vec<Vec<f64>> = spec
            .regressors
            .iter()
            .map(|r| data.column(r).map(<[f64]>::to_vec))
            .collect::<std::result::Result<_, _>>()?;
        if spec.include_year_dummies {
            if t < 2 {
                return Err(EstimationError::TooFewYears);
            }
            for year in 1..t {
                names.push(time_dummy_name(data, year));
                cols.push((0..n).map(|r| if r % t == year { 1.0 } else { 0.0 }).collect());
            }
        }
        if spec.include_constant {
            names.push(CONSTANT.to_string());
            cols.push(vec![1.0; n]);
        }
        let x = DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]);
        Ok(Self {
            spec: spec.clone(),
            names,
            x,
            y,
            groups: (0..n).map(|r| data.country_of_row(r)).collect(),
            n_groups: data.n_countries(),
            n_periods: t,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    fn constant_index(&self) -> Option<usize> {
        self.names.iter().position(|n| n == CONSTANT)
    }
}

/// Name of the dummy for time index `t`: `YR<year>`, or `period = <label>`
/// for period-averaged panels.
pub fn time_dummy_name(data: &PanelDataset, t: usize) -> String {
    match data.period_labels() {
        Some(labels) => format!("period = {}", labels[t]),
        None => format!("YR{}", data.years()[t]),
    }
}

pub fn is_time_dummy(name: &str) -> bool {
    name.starts_with("YR") && name[2..].chars().all(|c| c.is_ascii_digit()) && name.len() > 2
        || name.starts_with("period = ")
}

/// Convenience: factors, then controls, then time dummies and the constant.
pub fn assemble_design(
    data: &PanelDataset,
    outcome: &str,
    factors: &[String],
    controls: &[String],
    year_dummies: bool,
) -> Result<Design> {
    let mut spec = DesignSpec::new(outcome, factors.iter().chain(controls).cloned().collect());
    spec.include_year_dummies = year_dummies;
    Design::build(data, &spec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceComponents {
    pub sigma_e2: f64,
    pub sigma_u2: f64,
    pub theta: f64,
    /// Set when the between-based estimate of σ_u² was negative and clamped.
    pub clamped: bool,
}

impl VarianceComponents {
    /// Components with θ derived from the two variances and panel length `t`.
    pub fn new(sigma_e2: f64, sigma_u2: f64, t: usize) -> Self {
        let theta = if sigma_e2 > 0.0 {
            1.0 - (sigma_e2 / (t as f64 * sigma_u2 + sigma_e2)).sqrt()
        } else {
            0.0
        };
        Self {
            sigma_e2,
            sigma_u2,
            theta,
            clamped: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub estimator: Estimator,
    pub names: Vec<String>,
    pub coefficients: DVector<f64>,
    pub vcov: DMatrix<f64>,
    pub vcov_kind: VcovKind,
    /// Homoskedastic covariance, kept for the Hausman test.
    pub classical_vcov: DMatrix<f64>,
    pub std_errors: Vec<f64>,
    /// Residuals of the regression actually run (within / quasi-demeaned
    /// for FE / RE).
    pub residuals: DVector<f64>,
    /// `X b` on the untransformed design.
    pub fitted: DVector<f64>,
    pub r_squared: f64,
    pub r_squared_kind: RSquaredKind,
    pub n_obs: usize,
    pub n_countries: usize,
    pub df_resid: usize,
    pub variance_components: Option<VarianceComponents>,
    /// Transformed regressors of the working regression.
    pub working_x: DMatrix<f64>,
    /// `(working_xᵀ working_x)⁻¹`.
    pub bread: DMatrix<f64>,
    pub groups: Vec<usize>,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.coefficients[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.std_errors[i])
    }

    /// Degrees of freedom for t-based inference under the current vcov.
    pub fn inference_df(&self) -> f64 {
        match self.vcov_kind {
            VcovKind::ClusterCountry => (self.n_countries.max(2) - 1) as f64,
            _ => self.df_resid.max(1) as f64,
        }
    }

    /// Two-sided p-value of coefficient `i` against zero.
    pub fn p_value(&self, i: usize) -> f64 {
        let se = self.std_errors[i];
        if !(se > 0.0) {
            return f64::NAN;
        }
        let t = (self.coefficients[i] / se).abs();
        let dist = StudentsT::new(0.0, 1.0, self.inference_df()).expect("positive df");
        (2.0 * (1.0 - dist.cdf(t))).clamp(0.0, 1.0)
    }

    pub fn ssr(&self) -> f64 {
        self.residuals.norm_squared()
    }
}

fn std_errors(v: &DMatrix<f64>) -> Vec<f64> {
    (0..v.nrows()).map(|i| v[(i, i)].max(0.0).sqrt()).collect()
}

fn check_rank(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let dep = linalg::dependent_columns(x, RANK_TOL);
    if dep.is_empty() {
        Ok(())
    } else {
        Err(EstimationError::RankDeficient(
            dep.into_iter().map(|j| names[j].clone()).collect(),
        ))
    }
}

struct Ols {
    b: DVector<f64>,
    resid: DVector<f64>,
    bread: DMatrix<f64>,
}

fn ols(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<Ols> {
    check_rank(x, names)?;
    let (b, bread) = linalg::qr_least_squares(x, y)?;
    let resid = y - x * &b;
    Ok(Ols { b, resid, bread })
}

fn centered_ss(y: &DVector<f64>) -> f64 {
    let m = y.mean();
    y.iter().map(|v| (v - m) * (v - m)).sum()
}

fn squared_correlation(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let (ma, mb) = (a.mean(), b.mean());
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa > 0.0 && sbb > 0.0 {
        sab * sab / (saa * sbb)
    } else {
        0.0
    }
}

/// Group means of every column, broadcast back to rows (balanced panels).
fn group_means(m: &DMatrix<f64>, groups: &[usize], n_groups: usize) -> DMatrix<f64> {
    let mut sums = DMatrix::zeros(n_groups, m.ncols());
    let mut counts = vec![0usize; n_groups];
    for (r, &g) in groups.iter().enumerate() {
        counts[g] += 1;
        for c in 0..m.ncols() {
            sums[(g, c)] += m[(r, c)];
        }
    }
    for g in 0..n_groups {
        if counts[g] > 0 {
            sums.row_mut(g).scale_mut(1.0 / counts[g] as f64);
        }
    }
    sums
}

fn broadcast(means: &DMatrix<f64>, groups: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(groups.len(), means.ncols(), |r, c| means[(groups[r], c)])
}

/// Subtracts country means from every column.
pub fn within_transform(m: &DMatrix<f64>, groups: &[usize], n_groups: usize) -> DMatrix<f64> {
    m - broadcast(&group_means(m, groups, n_groups), groups)
}

fn finish(
    design: &Design,
    estimator: Estimator,
    fit: Ols,
    classical: DMatrix<f64>,
    df_resid: usize,
    r_squared: f64,
    r_squared_kind: RSquaredKind,
    working_x: DMatrix<f64>,
    variance_components: Option<VarianceComponents>,
) -> FitResult {
    FitResult {
        estimator,
        names: design.names.clone(),
        fitted: &design.x * &fit.b,
        coefficients: fit.b,
        std_errors: std_errors(&classical),
        vcov: classical.clone(),
        vcov_kind: VcovKind::Classical,
        classical_vcov: classical,
        residuals: fit.resid,
        r_squared,
        r_squared_kind,
        n_obs: design.n_obs(),
        n_countries: design.n_groups,
        df_resid,
        variance_components,
        working_x,
        bread: fit.bread,
        groups: design.groups.clone(),
    }
}

pub fn pooled_ols(design: &Design) -> Result<FitResult> {
    let n = design.n_obs();
    let k = design.x.ncols();
    if n <= k {
        return Err(EstimationError::DegreesOfFreedom { what: "n ≤ k" });
    }
    let fit = ols(&design.x, &design.y, &design.names)?;
    let ssr = fit.resid.norm_squared();
    let sst = centered_ss(&design.y);
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 };
    let df = n - k;
    let classical = &fit.bread * (ssr / df as f64);
    Ok(finish(
        design,
        Estimator::PooledOls,
        fit,
        classical,
        df,
        r2,
        RSquaredKind::Overall,
        design.x.clone(),
        None,
    ))
}

/// Within estimator. The intercept is the grand mean of the country effects,
/// obtained by adding overall means back to the demeaned data.
pub fn fixed_effects(design: &Design) -> Result<FitResult> {
    let n = design.n_obs();
    let const_idx = design.constant_index();
    let slope_idx: Vec<usize> = (0..design.x.ncols()).filter(|&j| Some(j) != const_idx).collect();
    let xs = design.x.select_columns(&slope_idx);
    let xw = within_transform(&xs, &design.groups, design.n_groups);
    let stuck: Vec<String> = slope_idx
        .iter()
        .enumerate()
        .filter(|(c, _)| xw.column(*c).norm() <= RANK_TOL * xs.column(*c).norm().max(1.0))
        .map(|(_, &j)| design.names[j].clone())
        .collect();
    if !stuck.is_empty() {
        return Err(EstimationError::NoWithinVariation(stuck));
    }
    let k = slope_idx.len();
    let df = n
        .checked_sub(k + design.n_groups)
        .filter(|d| *d > 0)
        .ok_or(EstimationError::DegreesOfFreedom { what: "n − k − N ≤ 0" })?;

    let yw = within_transform(
        &DMatrix::from_column_slice(n, 1, design.y.as_slice()),
        &design.groups,
        design.n_groups,
    )
    .column(0)
    .into_owned();

    // working regression: demeaned data plus grand means, same column order
    let mut working = design.x.clone();
    let mut y_work = yw.clone();
    let ybar = design.y.mean();
    for (c, &j) in slope_idx.iter().enumerate() {
        let mean = xs.column(c).mean();
        for r in 0..n {
            working[(r, j)] = xw[(r, c)] + mean;
        }
    }
    if const_idx.is_some() {
        y_work.add_scalar_mut(ybar);
    }
    let fit = ols(&working, &y_work, &design.names)?;
    let ssr = fit.resid.norm_squared();
    let tss_within = yw.norm_squared();
    let r2 = if tss_within > 0.0 { 1.0 - ssr / tss_within } else { 0.0 };
    let classical = &fit.bread * (ssr / df as f64);
    Ok(finish(
        design,
        Estimator::FixedEffects,
        fit,
        classical,
        df,
        r2,
        RSquaredKind::Within,
        working,
        None,
    ))
}

/// Swamy–Arora variance components for a balanced panel.
pub fn swamy_arora(design: &Design) -> Result<VarianceComponents> {
    let n = design.n_obs();
    let ng = design.n_groups;
    let const_idx = design.constant_index();
    let slopes: Vec<usize> = (0..design.x.ncols()).filter(|&j| Some(j) != const_idx).collect();
    let xs = design.x.select_columns(&slopes);

    // within regression on columns that vary within countries
    let xw = within_transform(&xs, &design.groups, ng);
    let within_cols: Vec<usize> = (0..xs.ncols())
        .filter(|&c| xw.column(c).norm() > RANK_TOL * xs.column(c).norm().max(1.0))
        .collect();
    let yw = within_transform(
        &DMatrix::from_column_slice(n, 1, design.y.as_slice()),
        &design.groups,
        ng,
    )
    .column(0)
    .into_owned();
    let ssr_w = if within_cols.is_empty() {
        yw.norm_squared()
    } else {
        let xwk = xw.select_columns(&within_cols);
        let names: Vec<String> = within_cols.iter().map(|&c| design.names[slopes[c]].clone()).collect();
        ols(&xwk, &yw, &names)?.resid.norm_squared()
    };
    let df_w = n
        .checked_sub(ng + within_cols.len())
        .filter(|d| *d > 0)
        .ok_or(EstimationError::DegreesOfFreedom { what: "within regression" })?;
    let sigma_e2 = ssr_w / df_w as f64;

    // between regression on country means, keeping columns that vary across
    // countries
    let xb = group_means(&xs, &design.groups, ng);
    let yb = group_means(&DMatrix::from_column_slice(n, 1, design.y.as_slice()), &design.groups, ng)
        .column(0)
        .into_owned();
    let between_cols: Vec<usize> = (0..xb.ncols())
        .filter(|&c| {
            let col = xb.column(c);
            let m = col.mean();
            col.iter().map(|v| (v - m) * (v - m)).sum::<f64>().sqrt()
                > RANK_TOL * col.norm().max(1.0)
        })
        .collect();
    let mut xbk = DMatrix::from_element(ng, between_cols.len() + 1, 1.0);
    for (c, &j) in between_cols.iter().enumerate() {
        xbk.set_column(c, &xb.column(j));
    }
    let mut names: Vec<String> = between_cols.iter().map(|&c| design.names[slopes[c]].clone()).collect();
    names.push(CONSTANT.to_string());
    let df_b = ng
        .checked_sub(between_cols.len() + 1)
        .filter(|d| *d > 0)
        .ok_or(EstimationError::DegreesOfFreedom { what: "between regression" })?;
    let ssr_b = ols(&xbk, &yb, &names)?.resid.norm_squared();
    let sigma_b2 = ssr_b / df_b as f64;

    let raw_u2 = sigma_b2 - sigma_e2 / design.n_periods as f64;
    let clamped = raw_u2 < 0.0;
    if clamped {
        log::warn!("negative country-effect variance estimate {raw_u2:e} clamped to 0");
    }
    Ok(VarianceComponents {
        clamped,
        ..VarianceComponents::new(sigma_e2, raw_u2.max(0.0), design.n_periods)
    })
}

/// Random-effects GLS by quasi-demeaning with Swamy–Arora θ.
pub fn random_effects(design: &Design) -> Result<FitResult> {
    random_effects_with(design, swamy_arora(design)?)
}

/// Quasi-demeaned GLS with given variance components.
pub fn random_effects_with(design: &Design, vc: VarianceComponents) -> Result<FitResult> {
    let n = design.n_obs();
    let k = design.x.ncols();
    let xbar = broadcast(&group_means(&design.x, &design.groups, design.n_groups), &design.groups);
    let ybar = broadcast(
        &group_means(&DMatrix::from_column_slice(n, 1, design.y.as_slice()), &design.groups, design.n_groups),
        &design.groups,
    );
    let working = &design.x - &xbar * vc.theta;
    let y_work = &design.y - ybar.column(0) * vc.theta;
    let fit = ols(&working, &y_work, &design.names)?;
    let df = n
        .checked_sub(k)
        .filter(|d| *d > 0)
        .ok_or(EstimationError::DegreesOfFreedom { what: "n ≤ k" })?;
    let classical = &fit.bread * vc.sigma_e2;
    let fitted = &design.x * &fit.b;
    let r2 = squared_correlation(&design.y, &fitted);
    Ok(finish(
        design,
        Estimator::RandomEffects,
        fit,
        classical,
        df,
        r2,
        RSquaredKind::Overall,
        working,
        Some(vc),
    ))
}

/// Replaces the covariance matrix; coefficients are untouched.
pub fn robust_vcov(fit: &FitResult, kind: VcovKind) -> Result<FitResult> {
    let x = &fit.working_x;
    let e = &fit.residuals;
    let (n, k) = x.shape();
    let vcov = match kind {
        VcovKind::Classical => fit.classical_vcov.clone(),
        VcovKind::Hc1 => {
            let mut meat = DMatrix::zeros(k, k);
            for r in 0..n {
                let xi = x.row(r).transpose();
                meat += (e[r] * e[r]) * &xi * xi.transpose();
            }
            let scale = n as f64 / (n - k) as f64;
            &fit.bread * meat * &fit.bread * scale
        }
        VcovKind::ClusterCountry => {
            let g = fit.groups.iter().copied().max().map_or(0, |m| m + 1);
            let present: HashSet<usize> = fit.groups.iter().copied().collect();
            let n_clusters = present.len();
            if n_clusters < 2 {
                return Err(EstimationError::TooFewClusters(n_clusters));
            }
            let mut scores = DMatrix::zeros(g, k);
            for r in 0..n {
                for c in 0..k {
                    scores[(fit.groups[r], c)] += x[(r, c)] * e[r];
                }
            }
            let meat = scores.transpose() * &scores;
            let gf = n_clusters as f64;
            let scale = gf / (gf - 1.0) * (n as f64 - 1.0) / (n - k) as f64;
            &fit.bread * meat * &fit.bread * scale
        }
    };
    let vcov = (&vcov + vcov.transpose()) * 0.5;
    Ok(FitResult {
        std_errors: std_errors(&vcov),
        vcov,
        vcov_kind: kind,
        ..fit.clone()
    })
}

/// Runs the estimator named in the design's spec with its covariance choice.
pub fn estimate(design: &Design) -> Result<FitResult> {
    let fit = match design.spec.estimator {
        Estimator::PooledOls => pooled_ols(design)?,
        Estimator::FixedEffects => fixed_effects(design)?,
        Estimator::RandomEffects => random_effects(design)?,
    };
    match design.spec.vcov {
        VcovKind::Classical => Ok(fit),
        kind => robust_vcov(&fit, kind),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(nc: usize, t: usize, cols: &[(&str, Vec<f64>)]) -> PanelDataset {
        let mut p = PanelDataset::new(
            (0..nc).map(|i| format!("C{i}")).collect(),
            (0..t as i32).map(|y| 2005 + y).collect(),
        );
        for (name, v) in cols {
            p.insert_column(*name, v.clone()).unwrap();
        }
        p
    }

    #[test]
    fn exact_line_and_intercept_only() {
        let x: Vec<f64> = vec![1.0, 2.0, 4.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let p = panel(2, 2, &[("x", x), ("y", y)]);
        let fit = pooled_ols(&Design::build(&p, &DesignSpec::new("y", vec!["x".into()])).unwrap()).unwrap();
        assert!((fit.coefficient("x").unwrap() - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let p = panel(2, 2, &[("y", vec![3.0; 4])]);
        let fit = pooled_ols(&Design::build(&p, &DesignSpec::new("y", vec![])).unwrap()).unwrap();
        assert!((fit.coefficient(CONSTANT).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(fit.r_squared, 0.0);
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let x = vec![1.0, 2.0, 3.0, 5.0, 8.0, 1.0];
        let z: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let p = panel(2, 3, &[("x", x), ("z", z), ("y", vec![1.0, 0.0, 2.0, 1.0, 3.0, 2.0])]);
        let err = pooled_ols(&Design::build(&p, &DesignSpec::new("y", vec!["x".into(), "z".into()])).unwrap())
            .unwrap_err();
        assert!(matches!(err, EstimationError::RankDeficient(c) if c == vec!["z".to_string()]));
    }

    #[test]
    fn fe_exact_dgp_and_time_invariant_regressor() {
        let x = vec![0.3, 1.2, -0.7, 2.0, 0.1, 0.9, -1.5, 0.4, 1.1];
        let alpha = [5.0, -2.0, 0.5];
        let y: Vec<f64> = x.iter().enumerate().map(|(r, v)| alpha[r / 3] + v).collect();
        let inv: Vec<f64> = (0..9).map(|r| (r / 3) as f64).collect();
        let p = panel(3, 3, &[("x", x), ("y", y), ("inv", inv)]);
        let fit = fixed_effects(&Design::build(&p, &DesignSpec::new("y", vec!["x".into()])).unwrap()).unwrap();
        assert!((fit.coefficient("x").unwrap() - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.r_squared_kind, RSquaredKind::Within);

        let err = fixed_effects(&Design::build(&p, &DesignSpec::new("y", vec!["x".into(), "inv".into()])).unwrap())
            .unwrap_err();
        assert!(matches!(err, EstimationError::NoWithinVariation(c) if c == vec!["inv".to_string()]));
    }

    #[test]
    fn design_validation() {
        let p = panel(2, 2, &[("x", vec![1.0; 4]), ("y", vec![1.0; 4])]);
        assert!(matches!(
            Design::build(&p, &DesignSpec::new("y", vec!["x".into(), "x".into()])),
            Err(EstimationError::DuplicateRegressor(_))
        ));
        assert!(matches!(
            Design::build(&p, &DesignSpec::new("y", vec!["y".into()])),
            Err(EstimationError::OutcomeAsRegressor(_))
        ));
        assert!(matches!(
            Design::build(&p, &DesignSpec::new("y", vec!["w".into()])),
            Err(EstimationError::Panel(PanelError::MissingColumn(_)))
        ));
        let mut spec = DesignSpec::new("y", vec!["x".into()]);
        spec.include_year_dummies = true;
        let d = Design::build(&p, &spec).unwrap();
        assert_eq!(d.names, vec!["x", "YR2006", "Constant"]);
        spec.include_year_dummies = false;
        assert_eq!(Design::build(&p, &spec).unwrap().names, vec!["x", "Constant"]);
    }

    #[test]
    fn time_dummy_names() {
        assert!(is_time_dummy("YR2006"));
        assert!(is_time_dummy("period = 2010-15"));
        assert!(!is_time_dummy("YR"));
        assert!(!is_time_dummy("yr_growth"));
    }

    #[test]
    fn cluster_needs_two_groups() {
        let x = vec![1.0, 2.0, 4.0];
        let y = vec![1.0, 3.0, 2.0];
        let p = panel(1, 3, &[("x", x), ("y", y)]);
        let fit = pooled_ols(&Design::build(&p, &DesignSpec::new("y", vec!["x".into()])).unwrap()).unwrap();
        assert!(matches!(
            robust_vcov(&fit, VcovKind::ClusterCountry),
            Err(EstimationError::TooFewClusters(1))
        ));
    }
}
