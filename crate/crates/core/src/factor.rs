//! Principal-component factor analysis with varimax rotation.
//!
//! The chain for one block of variables is
//! `correlation_matrix → pca_extract → retain_factors → varimax_rotate →
//! factor_scores`. [`run_cfa`] runs it once per capacity group, [`run_efa`]
//! once over all variables.

use std::collections::HashSet;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::panel::{self, PanelDataset, PanelError};

/// Loadings at or above this magnitude are flagged as "high" in reports.
pub const HIGH_LOADING: f64 = 0.4;
/// Kaiser criterion: keep factors whose eigenvalue is strictly above this.
pub const EIGEN_THRESHOLD: f64 = 1.0;

const VARIMAX_TOL: f64 = 1e-12;
const VARIMAX_MAX_SWEEPS: usize = 500;
const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FactorError {
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("variable `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("at least {needed} variables are required, got {got}")]
    TooFewVariables { needed: usize, got: usize },
    #[error("eigendecomposition failed: {0}")]
    EigenFailure(LinalgError),
    #[error("no eigenvalue exceeds {threshold} (largest {largest})")]
    NoFactorRetained { threshold: f64, largest: f64 },
    #[error("correlation matrix is singular (smallest eigenvalue {0:e})")]
    SingularCorrelation(f64),
    #[error("group `{0}` has no variables")]
    EmptyGroup(String),
    #[error("variable `{0}` appears in more than one group")]
    OverlappingGroups(String),
    #[error("model variable `{0}` is missing from the data")]
    MissingVariable(String),
}

pub type Result<T> = std::result::Result<T, FactorError>;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub codes: Vec<String>,
    pub values: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.codes.len()
    }

    /// Correlation matrix from explicit values (symmetric, unit diagonal).
    pub fn from_values(codes: Vec<String>, values: DMatrix<f64>) -> Self {
        Self { codes, values }
    }
}

/// Standardized data matrix (n×p) of the listed columns.
fn standardized_matrix(data: &PanelDataset, codes: &[String]) -> Result<DMatrix<f64>> {
    let n = data.n_rows();
    let mut z = DMatrix::zeros(n, codes.len());
    for (j, code) in codes.iter().enumerate() {
        let col = data
            .column(code)
            .map_err(|_| FactorError::MissingVariable(code.clone()))?;
        let zs = panel::zscores(code, col).map_err(|e| match e {
            PanelError::ZeroVariance(c) => FactorError::ZeroVariance(c),
            other => FactorError::Panel(other),
        })?;
        z.set_column(j, &nalgebra::DVector::from_vec(zs));
    }
    Ok(z)
}

/// Pearson correlations over all pooled rows.
pub fn correlation_matrix(data: &PanelDataset, codes: &[String]) -> Result<CorrelationMatrix> {
    if codes.is_empty() {
        return Err(FactorError::TooFewVariables { needed: 1, got: 0 });
    }
    let z = standardized_matrix(data, codes)?;
    let n = z.nrows() as f64;
    let mut r = z.transpose() * &z / (n - 1.0);
    let p = codes.len();
    for i in 0..p {
        r[(i, i)] = 1.0;
        for j in 0..i {
            let v = (0.5 * (r[(i, j)] + r[(j, i)])).clamp(-1.0, 1.0);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(CorrelationMatrix {
        codes: codes.to_vec(),
        values: r,
    })
}

/// Result of one factor analysis.
#[derive(Debug, Clone)]
pub struct FactorModel {
    pub codes: Vec<String>,
    /// All p eigenvalues of the correlation matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// p×m loadings before rotation (column j = eigenvector·√eigenvalue).
    pub unrotated: DMatrix<f64>,
    /// p×m loadings after rotation: `unrotated · rotation`.
    pub loadings: DMatrix<f64>,
    /// m×m orthogonal rotation.
    pub rotation: DMatrix<f64>,
    /// Number of eigenvalues above the retention threshold.
    pub retained: usize,
    pub names: Vec<String>,
    pub correlation: CorrelationMatrix,
}

impl FactorModel {
    pub fn n_factors(&self) -> usize {
        self.loadings.ncols()
    }

    /// Row sums of squared loadings.
    pub fn communalities(&self) -> Vec<f64> {
        self.loadings.row_iter().map(|r| r.norm_squared()).collect()
    }

    /// `(k, eigenvalue)` pairs for a scree plot.
    pub fn scree(&self) -> Vec<(usize, f64)> {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &v)| (i + 1, v))
            .collect()
    }

    /// Index of the variable by code.
    pub fn variable_index(&self, code: &str) -> Option<usize> {
        self.codes.iter().position(|c| c == code)
    }
}

fn count_retained(eigenvalues: &[f64], threshold: f64) -> usize {
    // a lone variable is its own factor; its eigenvalue is exactly one
    if eigenvalues.len() == 1 {
        return 1;
    }
    eigenvalues.iter().filter(|&&v| v > threshold).count()
}

/// Principal-component extraction of all p components.
pub fn pca_extract(corr: &CorrelationMatrix) -> Result<FactorModel> {
    let p = corr.dim();
    let eig = linalg::jacobi_eigen(&corr.values).map_err(FactorError::EigenFailure)?;
    let mut loadings = DMatrix::zeros(p, p);
    for j in 0..p {
        let scale = eig.values[j].max(0.0).sqrt();
        let mut col = eig.vectors.column(j) * scale;
        if dominant_sign(col.as_slice()) < 0.0 {
            col = -col;
        }
        loadings.set_column(j, &col);
    }
    Ok(FactorModel {
        codes: corr.codes.clone(),
        retained: count_retained(&eig.values, EIGEN_THRESHOLD),
        eigenvalues: eig.values,
        rotation: DMatrix::identity(p, p),
        unrotated: loadings.clone(),
        loadings,
        names: (1..=p).map(|j| format!("factor{j}")).collect(),
        correlation: corr.clone(),
    })
}

/// Sign of the largest-magnitude entry (first one wins ties).
fn dominant_sign(values: &[f64]) -> f64 {
    let mut best = 0.0_f64;
    for &v in values {
        if v.abs() > best.abs() {
            best = v;
        }
    }
    if best < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Keeps the factors whose eigenvalue exceeds `threshold`.
pub fn retain_factors(model: &FactorModel, threshold: f64) -> Result<FactorModel> {
    let m = count_retained(&model.eigenvalues, threshold);
    if m == 0 {
        return Err(FactorError::NoFactorRetained {
            threshold,
            largest: model.eigenvalues.first().copied().unwrap_or(0.0),
        });
    }
    let unrotated = model.unrotated.columns(0, m).into_owned();
    Ok(FactorModel {
        retained: m,
        loadings: unrotated.clone(),
        unrotated,
        rotation: DMatrix::identity(m, m),
        names: model.names.iter().take(m).cloned().collect(),
        ..model.clone()
    })
}

/// Raw varimax criterion: summed column variances of squared loadings.
pub fn varimax_criterion(loadings: &DMatrix<f64>) -> f64 {
    let p = loadings.nrows() as f64;
    loadings
        .column_iter()
        .map(|c| {
            let s2: f64 = c.iter().map(|v| v * v).sum();
            let s4: f64 = c.iter().map(|v| v.powi(4)).sum();
            s4 / p - (s2 / p).powi(2)
        })
        .sum()
}

/// Rows scaled to unit length (Kaiser normalization); zero rows untouched.
pub fn kaiser_normalize(loadings: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let h: Vec<f64> = loadings.row_iter().map(|r| r.norm()).collect();
    let mut out = loadings.clone();
    for (i, &hi) in h.iter().enumerate() {
        if hi > 0.0 {
            out.row_mut(i).scale_mut(1.0 / hi);
        }
    }
    (out, h)
}

fn rotate_pair(m: &mut DMatrix<f64>, j: usize, k: usize, cos: f64, sin: f64) {
    for i in 0..m.nrows() {
        let x = m[(i, j)];
        let y = m[(i, k)];
        m[(i, j)] = cos * x + sin * y;
        m[(i, k)] = -sin * x + cos * y;
    }
}

/// Orthogonal varimax rotation with Kaiser row normalization, by pairwise
/// planar rotations. Output columns are ordered by descending sum of squared
/// loadings and each column's largest-magnitude loading is positive.
pub fn varimax_rotate(model: &FactorModel) -> FactorModel {
    let m = model.unrotated.ncols();
    if m < 2 {
        let mut out = model.clone();
        out.loadings = model.unrotated.clone();
        out.rotation = DMatrix::identity(m, m);
        return out;
    }
    let (mut a, _) = kaiser_normalize(&model.unrotated);
    let p = a.nrows() as f64;
    let mut t = DMatrix::<f64>::identity(m, m);
    let mut crit = varimax_criterion(&a);
    for _ in 0..VARIMAX_MAX_SWEEPS {
        for j in 0..m - 1 {
            for k in j + 1..m {
                let (mut sa, mut sb, mut sc, mut sd) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..a.nrows() {
                    let (x, y) = (a[(i, j)], a[(i, k)]);
                    let u = x * x - y * y;
                    let v = 2.0 * x * y;
                    sa += u;
                    sb += v;
                    sc += u * u - v * v;
                    sd += 2.0 * u * v;
                }
                let num = sd - 2.0 * sa * sb / p;
                let den = sc - (sa * sa - sb * sb) / p;
                let phi = num.atan2(den) / 4.0;
                if phi.abs() < 1e-15 {
                    continue;
                }
                let (sin, cos) = phi.sin_cos();
                rotate_pair(&mut a, j, k, cos, sin);
                rotate_pair(&mut t, j, k, cos, sin);
            }
        }
        let next = varimax_criterion(&a);
        let improved = next - crit;
        crit = next;
        if improved < VARIMAX_TOL {
            break;
        }
    }

    // canonical column order and signs, folded into the rotation
    let mut rotated = &model.unrotated * &t;
    let mut order: Vec<usize> = (0..m).collect();
    let ss: Vec<f64> = rotated.column_iter().map(|c| c.norm_squared()).collect();
    order.sort_by(|&x, &y| ss[y].total_cmp(&ss[x]).then(x.cmp(&y)));
    let mut perm = DMatrix::zeros(m, m);
    for (new, &old) in order.iter().enumerate() {
        perm[(old, new)] = dominant_sign(rotated.column(old).as_slice());
    }
    t *= &perm;
    rotated = &model.unrotated * &t;

    FactorModel {
        loadings: rotated,
        rotation: t,
        ..model.clone()
    }
}

/// Names a factor and points at the variable that identifies it.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorName {
    pub id: String,
    pub anchor: Option<String>,
}

impl FactorName {
    pub fn anchored(id: impl Into<String>, anchor: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            anchor: Some(anchor.into()),
        }
    }
}

/// Assigns names to rotated factors. Each anchored name claims the factor
/// on which its anchor variable loads most strongly (strongest anchors
/// first) and orients it so the anchor loading is positive. Named factors
/// come first in `names` order; unclaimed factors follow as
/// `<prefix><j>`.
pub fn label_factors(model: &FactorModel, names: &[FactorName], prefix: &str) -> FactorModel {
    let m = model.loadings.ncols();
    let mut claims: Vec<(usize, usize, f64)> = Vec::new(); // (name idx, anchor row, strength)
    for (ni, name) in names.iter().enumerate() {
        if let Some(row) = name.anchor.as_deref().and_then(|a| model.variable_index(a)) {
            let best = model.loadings.row(row).iter().fold(0.0_f64, |b, v| b.max(v.abs()));
            claims.push((ni, row, best));
        }
    }
    claims.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));

    let mut taken = vec![false; m];
    let mut assigned: Vec<(usize, usize, f64)> = Vec::new(); // (name idx, column, sign)
    for (ni, row, _) in claims {
        let col = (0..m)
            .filter(|&c| !taken[c])
            .max_by(|&x, &y| {
                model.loadings[(row, x)]
                    .abs()
                    .total_cmp(&model.loadings[(row, y)].abs())
                    .then(y.cmp(&x))
            });
        if let Some(c) = col {
            taken[c] = true;
            let sign = if model.loadings[(row, c)] < 0.0 { -1.0 } else { 1.0 };
            assigned.push((ni, c, sign));
        }
    }
    assigned.sort_by_key(|a| a.0);

    let mut perm = DMatrix::zeros(m, m);
    let mut out_names = Vec::with_capacity(m);
    let mut slot = 0;
    for &(ni, c, sign) in &assigned {
        perm[(c, slot)] = sign;
        out_names.push(names[ni].id.clone());
        slot += 1;
    }
    let mut generic = 1;
    for c in (0..m).filter(|&c| !taken[c]) {
        perm[(c, slot)] = dominant_sign(model.loadings.column(c).as_slice());
        let mut name = format!("{prefix}{generic}");
        while out_names.contains(&name) || names.iter().any(|n| n.id == name) {
            generic += 1;
            name = format!("{prefix}{generic}");
        }
        out_names.push(name);
        generic += 1;
        slot += 1;
    }
    let rotation = &model.rotation * &perm;
    FactorModel {
        loadings: &model.unrotated * &rotation,
        rotation,
        names: out_names,
        ..model.clone()
    }
}

/// Per-observation factor scores (n×m), columns named after the factors.
#[derive(Debug, Clone)]
pub struct FactorScores {
    pub names: Vec<String>,
    pub scores: DMatrix<f64>,
}

impl FactorScores {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.scores.column(j).iter().copied().collect())
    }

    /// Copies every score column into the panel (replacing same-named ones).
    pub fn attach(&self, data: &PanelDataset) -> std::result::Result<PanelDataset, PanelError> {
        let mut out = data.clone();
        for (j, name) in self.names.iter().enumerate() {
            out = out.with_column(name.clone(), self.scores.column(j).iter().copied().collect())?;
        }
        Ok(out)
    }

    /// Column-wise concatenation.
    pub fn concat(parts: &[&FactorScores]) -> FactorScores {
        let n = parts.first().map(|p| p.scores.nrows()).unwrap_or(0);
        let m: usize = parts.iter().map(|p| p.scores.ncols()).sum();
        let mut scores = DMatrix::zeros(n, m);
        let mut names = Vec::with_capacity(m);
        let mut at = 0;
        for p in parts {
            scores.columns_mut(at, p.scores.ncols()).copy_from(&p.scores);
            at += p.scores.ncols();
            names.extend(p.names.iter().cloned());
        }
        FactorScores { names, scores }
    }
}

/// Regression-method scores `Z R⁻¹ Λ`, each column rescaled to unit SD.
pub fn factor_scores(data: &PanelDataset, model: &FactorModel) -> Result<FactorScores> {
    let z = standardized_matrix(data, &model.codes)?;
    let r_inv = linalg::spd_inverse(&model.correlation.values, SINGULAR_TOL).map_err(|e| match e {
        LinalgError::Singular(v) => FactorError::SingularCorrelation(v),
        other => FactorError::EigenFailure(other),
    })?;
    let weights = r_inv * &model.loadings;
    let mut scores = z * weights;
    for mut col in scores.column_iter_mut() {
        let v: Vec<f64> = col.iter().copied().collect();
        let m = panel::mean(&v);
        let sd = panel::sample_sd(&v);
        for x in col.iter_mut() {
            *x = if sd > 0.0 { (*x - m) / sd } else { 0.0 };
        }
    }
    Ok(FactorScores {
        names: model.names.clone(),
        scores,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmoResult {
    pub overall: f64,
    /// `(code, measure of sampling adequacy)` in variable order.
    pub per_variable: Vec<(String, f64)>,
}

/// Kaiser-Meyer-Olkin sampling adequacy from anti-image partial correlations.
pub fn kmo(corr: &CorrelationMatrix) -> Result<KmoResult> {
    let p = corr.dim();
    if p < 2 {
        return Err(FactorError::TooFewVariables { needed: 2, got: p });
    }
    let s = linalg::spd_inverse(&corr.values, SINGULAR_TOL).map_err(|e| match e {
        LinalgError::Singular(v) => FactorError::SingularCorrelation(v),
        other => FactorError::EigenFailure(other),
    })?;
    let r = &corr.values;
    let mut r2_row = vec![0.0; p];
    let mut q2_row = vec![0.0; p];
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            let q = -s[(i, j)] / (s[(i, i)] * s[(j, j)]).sqrt();
            r2_row[i] += r[(i, j)] * r[(i, j)];
            q2_row[i] += q * q;
        }
    }
    let ratio = |r2: f64, q2: f64| if r2 + q2 > 0.0 { r2 / (r2 + q2) } else { 0.0 };
    let r2: f64 = r2_row.iter().sum();
    let q2: f64 = q2_row.iter().sum();
    Ok(KmoResult {
        overall: ratio(r2, q2),
        per_variable: corr
            .codes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), ratio(r2_row[i], q2_row[i])))
            .collect(),
    })
}

/// A block of variables analysed together, with optional factor names.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGroup {
    pub name: String,
    pub codes: Vec<String>,
    pub factor_names: Vec<FactorName>,
}

#[derive(Debug, Clone)]
pub struct GroupAnalysis {
    pub group: String,
    pub model: FactorModel,
    pub scores: FactorScores,
}

/// Full chain for one block of variables.
pub fn analyse(data: &PanelDataset, group: &FactorGroup, prefix: &str) -> Result<GroupAnalysis> {
    if group.codes.is_empty() {
        return Err(FactorError::EmptyGroup(group.name.clone()));
    }
    let corr = correlation_matrix(data, &group.codes)?;
    let extracted = pca_extract(&corr)?;
    let kept = retain_factors(&extracted, EIGEN_THRESHOLD)?;
    let rotated = varimax_rotate(&kept);
    let model = label_factors(&rotated, &group.factor_names, prefix);
    let scores = factor_scores(data, &model)?;
    Ok(GroupAnalysis {
        group: group.name.clone(),
        model,
        scores,
    })
}

fn generic_prefix(name: &str) -> String {
    let slug: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    format!("{}_f", slug.trim_matches('_'))
}

/// One factor analysis per group. Groups must be non-empty and disjoint.
pub fn run_cfa(data: &PanelDataset, groups: &[FactorGroup]) -> Result<Vec<GroupAnalysis>> {
    let mut seen = HashSet::new();
    for g in groups {
        if g.codes.is_empty() {
            return Err(FactorError::EmptyGroup(g.name.clone()));
        }
        for c in &g.codes {
            if !seen.insert(c.as_str()) {
                return Err(FactorError::OverlappingGroups(c.clone()));
            }
        }
    }
    groups
        .iter()
        .map(|g| analyse(data, g, &generic_prefix(&g.name)))
        .collect()
}

/// A single exploratory analysis over all listed variables.
pub fn run_efa(data: &PanelDataset, codes: &[String], names: &[FactorName]) -> Result<GroupAnalysis> {
    let group = FactorGroup {
        name: "efa".to_string(),
        codes: codes.to_vec(),
        factor_names: names.to_vec(),
    };
    analyse(data, &group, "efa_f")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr2(r: f64) -> CorrelationMatrix {
        CorrelationMatrix::from_values(
            vec!["a".into(), "b".into()],
            DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0]),
        )
    }

    #[test]
    fn two_by_two_eigenpairs() {
        let m = pca_extract(&corr2(0.5)).unwrap();
        assert!((m.eigenvalues[0] - 1.5).abs() < 1e-12);
        assert!((m.eigenvalues[1] - 0.5).abs() < 1e-12);
        assert_eq!(m.retained, 1);
    }

    #[test]
    fn identity_retains_nothing() {
        let c = CorrelationMatrix::from_values(
            (0..4).map(|i| format!("v{i}")).collect(),
            DMatrix::identity(4, 4),
        );
        let m = pca_extract(&c).unwrap();
        assert!(m.eigenvalues.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(m.retained, 0);
        assert!(matches!(
            retain_factors(&m, EIGEN_THRESHOLD),
            Err(FactorError::NoFactorRetained { .. })
        ));
    }

    #[test]
    fn retention_counts() {
        let mut m = pca_extract(&corr2(0.5)).unwrap();
        m.eigenvalues = vec![2.9, 0.8, 0.7, 0.4, 0.2];
        assert_eq!(count_retained(&m.eigenvalues, 1.0), 1);
        assert_eq!(count_retained(&[3.1, 1.4, 1.2, 0.9, 0.6], 1.0), 3);
    }

    #[test]
    fn eigen_sign_convention() {
        let m = pca_extract(&corr2(-0.3)).unwrap();
        for c in m.unrotated.column_iter() {
            assert!(dominant_sign(c.as_slice()) > 0.0);
        }
    }

    #[test]
    fn kmo_two_variables_is_half() {
        for r in [0.1, 0.5, -0.7, 0.95] {
            let k = kmo(&corr2(r)).unwrap();
            assert!((k.overall - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn varimax_single_factor_is_identity() {
        let mut m = retain_factors(&pca_extract(&corr2(0.6)).unwrap(), 1.0).unwrap();
        m = varimax_rotate(&m);
        assert_eq!(m.rotation, DMatrix::identity(1, 1));
        assert_eq!(m.loadings, m.unrotated);
    }

    #[test]
    fn labelling_orients_anchor_positive() {
        let mut m = pca_extract(&corr2(0.5)).unwrap();
        m.unrotated = DMatrix::from_row_slice(2, 2, &[-0.9, 0.1, 0.1, 0.8]);
        m.loadings = m.unrotated.clone();
        let named = label_factors(
            &m,
            &[FactorName::anchored("second", "b"), FactorName::anchored("first", "a")],
            "f",
        );
        assert_eq!(named.names, vec!["second".to_string(), "first".to_string()]);
        assert!(named.loadings[(1, 0)] > 0.0);
        assert!(named.loadings[(0, 1)] > 0.0);
        let rrt = &named.rotation * named.rotation.transpose();
        assert!((rrt - DMatrix::identity(2, 2)).abs().max() < 1e-15);
    }

    #[test]
    fn overlapping_and_empty_groups_rejected() {
        let data = PanelDataset::new(vec!["A".into()], vec![1]);
        let g = |name: &str, codes: &[&str]| FactorGroup {
            name: name.into(),
            codes: codes.iter().map(|c| c.to_string()).collect(),
            factor_names: vec![],
        };
        assert!(matches!(
            run_cfa(&data, &[g("a", &["x", "y"]), g("b", &["y"])]),
            Err(FactorError::OverlappingGroups(c)) if c == "y"
        ));
        assert!(matches!(run_cfa(&data, &[g("a", &[])]), Err(FactorError::EmptyGroup(_))));
    }
}
