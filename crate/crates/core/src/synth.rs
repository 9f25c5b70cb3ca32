//! Seeded synthetic panels with known structure.
//!
//! All randomness flows through [`SynthRng`], a ChaCha8 stream seeded from a
//! `u64`. ChaCha8 output is specified independently of platform and word
//! size, so a seed reproduces the same dataset everywhere.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::layout::{self, CAPACITIES, CLUSTER_FACTORS, CONTROLS, OUTCOME, REGRESSION_ORDER};
use crate::panel::PanelDataset;

pub struct SynthRng(ChaCha8Rng);

impl SynthRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.random()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.0);
    }
}

pub fn country_codes(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("C{:03}", i + 1)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_countries: usize,
    pub n_years: usize,
    pub first_year: i32,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(n_countries: usize, n_years: usize, seed: u64) -> Self {
        Self {
            n_countries,
            n_years,
            first_year: 2005,
            seed,
        }
    }

    fn empty_panel(&self) -> PanelDataset {
        PanelDataset::new(
            country_codes(self.n_countries),
            (0..self.n_years as i32).map(|t| self.first_year + t).collect(),
        )
    }
}

/// Linear factor model `X = F Λᵀ + noise` with named variables.
#[derive(Debug, Clone)]
pub struct FactorPlan {
    pub codes: Vec<String>,
    /// p×m true loadings.
    pub loadings: DMatrix<f64>,
    pub noise_sd: f64,
}

impl FactorPlan {
    /// Disjoint blocks: variable `j` of block `b` loads `loading` on factor `b`
    /// only. Codes are `v01`, `v02`, ...
    pub fn blocks(sizes: &[usize], loading: f64, noise_sd: f64) -> Self {
        let p: usize = sizes.iter().sum();
        let mut l = DMatrix::zeros(p, sizes.len());
        let mut row = 0;
        for (b, &s) in sizes.iter().enumerate() {
            for _ in 0..s {
                l[(row, b)] = loading;
                row += 1;
            }
        }
        Self {
            codes: (1..=p).map(|j| format!("v{j:02}")).collect(),
            loadings: l,
            noise_sd,
        }
    }

    /// Index of the largest-|loading| factor for each variable.
    pub fn supports(&self) -> Vec<usize> {
        (0..self.loadings.nrows())
            .map(|i| {
                let row = self.loadings.row(i);
                (0..row.len())
                    .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()))
                    .unwrap_or(0)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FactorPanel {
    pub data: PanelDataset,
    /// n×m latent factor draws.
    pub factors: DMatrix<f64>,
    pub supports: Vec<usize>,
}

pub fn gen_factor_panel(spec: &SynthSpec, plan: &FactorPlan) -> FactorPanel {
    let mut rng = SynthRng::new(spec.seed);
    let n = spec.n_countries * spec.n_years;
    let (p, m) = plan.loadings.shape();
    let f = DMatrix::from_fn(n, m, |_, _| rng.normal());
    let mut x = &f * plan.loadings.transpose();
    for v in x.iter_mut() {
        *v += plan.noise_sd * rng.normal();
    }
    let mut data = spec.empty_panel();
    for j in 0..p {
        data.insert_column(plan.codes[j].clone(), x.column(j).iter().copied().collect())
            .expect("fresh column");
    }
    FactorPanel {
        data,
        factors: f,
        supports: plan.supports(),
    }
}

/// `y_it = α_i + x_it·β + e_it` with optional correlation between the
/// regressors and the country effect.
#[derive(Debug, Clone)]
pub struct PanelPlan {
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub sigma_u: f64,
    pub sigma_e: f64,
    /// Loading of each regressor on the country effect; 0 keeps the
    /// regressors exogenous to α_i.
    pub x_effect_loading: f64,
    /// Multiplies the error SD of observation `r` by `1 + hetero·|x_r1|`.
    pub hetero: f64,
}

impl PanelPlan {
    pub fn new(beta: Vec<f64>, sigma_u: f64, sigma_e: f64) -> Self {
        Self {
            beta,
            intercept: 1.0,
            sigma_u,
            sigma_e,
            x_effect_loading: 0.0,
            hetero: 0.0,
        }
    }
}

/// Columns `y`, `x1`..`xk` (and the true country effect under `alpha`).
pub fn gen_fe_panel(spec: &SynthSpec, plan: &PanelPlan) -> PanelDataset {
    let mut rng = SynthRng::new(spec.seed);
    let (nc, t) = (spec.n_countries, spec.n_years);
    let k = plan.beta.len();
    let alpha: Vec<f64> = (0..nc).map(|_| plan.sigma_u * rng.normal()).collect();
    let mut xs = vec![Vec::with_capacity(nc * t); k];
    let mut y = Vec::with_capacity(nc * t);
    let mut a_col = Vec::with_capacity(nc * t);
    for &a in &alpha {
        // unit-scale contribution of the effect so the loading is comparable
        let a_unit = if plan.sigma_u > 0.0 { a / plan.sigma_u } else { 0.0 };
        let country_shift: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
        for _ in 0..t {
            let mut yi = plan.intercept + a;
            let mut first = 0.0;
            for j in 0..k {
                let x = 0.5 * country_shift[j] + rng.normal() + plan.x_effect_loading * a_unit;
                if j == 0 {
                    first = x;
                }
                yi += plan.beta[j] * x;
                xs[j].push(x);
            }
            yi += plan.sigma_e * (1.0 + plan.hetero * first.abs()) * rng.normal();
            y.push(yi);
            a_col.push(a);
        }
    }
    let mut data = spec.empty_panel();
    data.insert_column("y", y).expect("fresh column");
    for (j, x) in xs.into_iter().enumerate() {
        data.insert_column(format!("x{}", j + 1), x).expect("fresh column");
    }
    data.insert_column("alpha", a_col).expect("fresh column");
    data
}

#[derive(Debug, Clone)]
pub struct ClusterPlan {
    pub sizes: Vec<usize>,
    pub dim: usize,
    /// Distance between any two blob centres, in units of `within_sd`.
    pub separation: f64,
    pub within_sd: f64,
}

/// Vertices of a regular simplex with unit edge length: `k` points in
/// `max(k − 1, 1)` dimensions, centred at the origin.
pub fn simplex_vertices(k: usize) -> Vec<Vec<f64>> {
    if k <= 1 {
        return vec![vec![0.0]; k];
    }
    // centred standard basis of R^k, expressed in an orthonormal basis of the
    // sum-zero hyperplane (Helmert contrasts)
    let basis: Vec<Vec<f64>> = (1..k)
        .map(|j| {
            let norm = ((j * (j + 1)) as f64).sqrt();
            (0..k)
                .map(|i| match i.cmp(&j) {
                    std::cmp::Ordering::Less => 1.0 / norm,
                    std::cmp::Ordering::Equal => -(j as f64) / norm,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect();
    let scale = 1.0 / 2f64.sqrt();
    (0..k)
        .map(|v| basis.iter().map(|b| b[v] * scale).collect())
        .collect()
}

/// Blob centres: an equidistant simplex when `dim ≥ k − 1`, otherwise
/// points spread along the first axis with the same spacing.
fn blob_centres(k: usize, dim: usize, edge: f64) -> Vec<Vec<f64>> {
    if k <= 1 {
        return vec![vec![0.0; dim]; k];
    }
    if dim + 1 >= k {
        simplex_vertices(k)
            .into_iter()
            .map(|v| {
                let mut c = vec![0.0; dim];
                for (slot, x) in c.iter_mut().zip(v) {
                    *slot = x * edge;
                }
                c
            })
            .collect()
    } else {
        (0..k)
            .map(|j| {
                let mut c = vec![0.0; dim];
                c[0] = j as f64 * edge;
                c
            })
            .collect()
    }
}

/// Gaussian blobs; returns the points (rows) and the true 0-based labels.
/// Row order is shuffled so labels are interleaved.
pub fn gen_clusters(plan: &ClusterPlan, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
    let mut rng = SynthRng::new(seed);
    let k = plan.sizes.len();
    let centres = blob_centres(k, plan.dim, plan.separation * plan.within_sd);
    let mut labels: Vec<usize> = plan
        .sizes
        .iter()
        .enumerate()
        .flat_map(|(j, &s)| std::iter::repeat_n(j, s))
        .collect();
    rng.shuffle(&mut labels);
    let n = labels.len();
    let mut points = DMatrix::zeros(n, plan.dim);
    for (r, &l) in labels.iter().enumerate() {
        for d in 0..plan.dim {
            points[(r, d)] = centres[l][d] + plan.within_sd * rng.normal();
        }
    }
    (points, labels)
}

/// Knobs for the full reference-shaped synthetic panel.
#[derive(Debug, Clone)]
pub struct ReferencePlan {
    pub spec: SynthSpec,
    /// Idiosyncratic noise SD of each standardized indicator.
    pub noise_sd: f64,
    /// Cluster sizes for the four clustering factors.
    pub cluster_sizes: Vec<usize>,
    /// Blob separation in units of the within-country annual SD.
    pub separation: f64,
    /// Planted coefficients, aligned with [`REGRESSION_ORDER`].
    pub beta: Vec<f64>,
    /// Planted coefficients of the standardized controls.
    pub gamma: Vec<f64>,
    pub sigma_u: f64,
    pub sigma_e: f64,
}

impl ReferencePlan {
    pub fn new(seed: u64) -> Self {
        Self {
            spec: SynthSpec::new(82, 15, seed),
            noise_sd: 0.2,
            cluster_sizes: vec![11, 13, 12, 30, 16],
            separation: 10.0,
            beta: vec![
                0.09, 0.10, 0.05, 0.06, -0.05, 0.05, 0.05, -0.05, 0.05, -0.05, 0.05, -0.05, -0.05,
            ],
            gamma: vec![0.03, -0.04, 0.05, 0.03, 0.06, -0.03, -0.05, 0.03],
            sigma_u: 0.5,
            sigma_e: 0.02,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReferencePanel {
    pub data: PanelDataset,
    /// Country index → true cluster (0-based, in `cluster_sizes` order).
    pub cluster_labels: Vec<usize>,
    /// `(factor id, β)` in regression order.
    pub beta: Vec<(String, f64)>,
    pub gamma: Vec<(String, f64)>,
}

/// Panel with the reference column layout: 47 capacity indicators built on
/// 13 latent factors (one block per capacity), 8 controls and GDP per capita.
pub fn gen_reference_panel(plan: &ReferencePlan) -> ReferencePanel {
    let spec = &plan.spec;
    let mut rng = SynthRng::new(spec.seed);
    let (nc, t) = (spec.n_countries, spec.n_years);
    let n = nc * t;

    // cluster membership of countries
    let mut labels: Vec<usize> = plan
        .cluster_sizes
        .iter()
        .enumerate()
        .flat_map(|(j, &s)| std::iter::repeat_n(j, s))
        .collect();
    labels.resize(nc, plan.cluster_sizes.len().saturating_sub(1));
    labels.truncate(nc);
    rng.shuffle(&mut labels);
    let centres = blob_centres(plan.cluster_sizes.len(), CLUSTER_FACTORS.len(), plan.separation);

    // latent factors, keyed by factor id
    let mut latent: Vec<(&str, Vec<f64>)> = Vec::new();
    for cap in CAPACITIES.iter() {
        for f in cap.factors {
            let cluster_dim = CLUSTER_FACTORS.iter().position(|c| *c == f.id);
            let mut v = Vec::with_capacity(n);
            for label in labels.iter().take(nc) {
                let level = match cluster_dim {
                    Some(d) => centres[*label][d],
                    None => 0.7 * rng.normal(),
                };
                for _ in 0..t {
                    v.push(level + rng.normal());
                }
            }
            standardize_in_place(&mut v);
            latent.push((f.id, v));
        }
    }

    let mut data = spec.empty_panel();
    for cap in CAPACITIES.iter() {
        for f in cap.factors {
            let fv = &latent.iter().find(|(id, _)| *id == f.id).expect("latent").1;
            for entry in f.block {
                let (sign, code) = match entry.strip_prefix('-') {
                    Some(c) => (-1.0, c),
                    None => (1.0, *entry),
                };
                let (loc, scale) = layout::raw_scale(code);
                let col = fv
                    .iter()
                    .map(|x| loc + scale * (sign * x + plan.noise_sd * rng.normal()))
                    .collect();
                data.insert_column(code, col).expect("fresh column");
            }
        }
    }

    let mut controls_std = Vec::new();
    for code in CONTROLS {
        let mut z = Vec::with_capacity(n);
        for _ in 0..nc {
            let level = rng.normal();
            for _ in 0..t {
                z.push(level + rng.normal());
            }
        }
        standardize_in_place(&mut z);
        let (loc, scale) = layout::raw_scale(code);
        data.insert_column(code, z.iter().map(|v| loc + scale * v).collect())
            .expect("fresh column");
        controls_std.push(z);
    }

    let alpha: Vec<f64> = (0..nc).map(|_| plan.sigma_u * rng.normal()).collect();
    let mut log_y = Vec::with_capacity(n);
    for r in 0..n {
        let (i, year) = (r / t, r % t);
        let mut v = 7.24 + alpha[i] + 0.01 * year as f64;
        for (id, b) in REGRESSION_ORDER.iter().zip(&plan.beta) {
            let fv = &latent.iter().find(|(fid, _)| fid == id).expect("latent").1;
            v += b * fv[r];
        }
        for (z, g) in controls_std.iter().zip(&plan.gamma) {
            v += g * z[r];
        }
        v += plan.sigma_e * rng.normal();
        log_y.push(v);
    }
    data.insert_column(OUTCOME, log_y.iter().map(|v| v.exp()).collect())
        .expect("fresh column");

    ReferencePanel {
        data,
        cluster_labels: labels,
        beta: REGRESSION_ORDER
            .iter()
            .zip(&plan.beta)
            .map(|(id, b)| (id.to_string(), *b))
            .collect(),
        gamma: CONTROLS
            .iter()
            .zip(&plan.gamma)
            .map(|(c, g)| (c.to_string(), *g))
            .collect(),
    }
}

fn standardize_in_place(v: &mut [f64]) {
    let m = crate::panel::mean(v);
    let sd = crate::panel::sample_sd(v);
    for x in v.iter_mut() {
        *x = (*x - m) / sd;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_panel() {
        let spec = SynthSpec::new(5, 4, 42);
        let plan = FactorPlan::blocks(&[2, 3], 1.0, 0.1);
        let a = gen_factor_panel(&spec, &plan);
        let b = gen_factor_panel(&spec, &plan);
        assert_eq!(a.data, b.data);
        let c = gen_factor_panel(&SynthSpec::new(5, 4, 43), &plan);
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn noise_moments_converge() {
        let spec = SynthSpec::new(100, 20, 7);
        let plan = FactorPlan {
            codes: vec!["e".into()],
            loadings: DMatrix::zeros(1, 1),
            noise_sd: 2.0,
        };
        let p = gen_factor_panel(&spec, &plan);
        let e = p.data.column("e").unwrap();
        let n = e.len() as f64;
        assert!(crate::panel::mean(e).abs() < 3.0 * 2.0 / n.sqrt());
        assert!((crate::panel::sample_sd(e) - 2.0).abs() < 3.0 * 2.0 / n.sqrt());
    }

    #[test]
    fn simplex_is_equidistant() {
        for k in 2..7 {
            let v = simplex_vertices(k);
            for a in 0..k {
                for b in a + 1..k {
                    let d: f64 = v[a].iter().zip(&v[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                    assert!((d - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cluster_sizes_and_labels() {
        let plan = ClusterPlan {
            sizes: vec![11, 13, 12, 30, 16],
            dim: 4,
            separation: 10.0,
            within_sd: 1.0,
        };
        let (pts, labels) = gen_clusters(&plan, 3);
        assert_eq!(pts.shape(), (82, 4));
        for (j, &s) in plan.sizes.iter().enumerate() {
            assert_eq!(labels.iter().filter(|&&l| l == j).count(), s);
        }
    }

    #[test]
    fn reference_shape() {
        let p = gen_reference_panel(&ReferencePlan::new(1));
        assert_eq!(p.data.n_rows(), 1230);
        assert_eq!(p.data.column_names().len(), 56);
        assert!(p.data.column(OUTCOME).unwrap().iter().all(|v| *v > 0.0));
    }
}
