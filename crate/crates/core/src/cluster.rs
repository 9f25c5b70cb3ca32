//! K-means (Lloyd) with seeded restarts, elbow diagnostics and per-cluster
//! summaries.

use std::collections::HashMap;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::synth::SynthRng;

pub const MAX_ITERATIONS: usize = 300;
pub const STAGE_LABELS: [&str; 5] = ["leading", "walking", "creeping", "crawling", "sleeping"];

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("k must be between 1 and the number of points ({n}), got {k}")]
    TooManyClusters { k: usize, n: usize },
    #[error("only {distinct} distinct points for k = {k}")]
    DegenerateInput { k: usize, distinct: usize },
    #[error("points matrix has no columns")]
    NoDimensions,
    #[error("empty WSS series")]
    EmptySeries,
    #[error("need k_max ≥ 2 and restarts ≥ 1")]
    BadSweep,
    #[error("{what} has {got} rows, expected {expected}")]
    LengthMismatch {
        what: String,
        got: usize,
        expected: usize,
    },
}

pub type Result<T> = std::result::Result<T, ClusterError>;

/// A k-means solution. `assignments` holds 0-based cluster ids; reports
/// print them 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSolution {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: DMatrix<f64>,
    pub wss: f64,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    /// WSS after each Lloyd iteration.
    pub wss_trace: Vec<f64>,
}

impl ClusterSolution {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }
}

fn sq_dist(points: &DMatrix<f64>, r: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    (0..points.ncols())
        .map(|j| {
            let d = points[(r, j)] - centroids[(c, j)];
            d * d
        })
        .sum()
}

/// Sum of squared distances of every point to its cluster mean.
pub fn wss_of(points: &DMatrix<f64>, assignments: &[usize], k: usize) -> f64 {
    let c = centroids_of(points, assignments, k);
    (0..points.nrows()).map(|r| sq_dist(points, r, &c, assignments[r])).sum()
}

/// Total sum of squares around the grand mean.
pub fn total_ss(points: &DMatrix<f64>) -> f64 {
    wss_of(points, &vec![0; points.nrows()], 1)
}

fn centroids_of(points: &DMatrix<f64>, assignments: &[usize], k: usize) -> DMatrix<f64> {
    let d = points.ncols();
    let mut c = DMatrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (r, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for j in 0..d {
            c[(a, j)] += points[(r, j)];
        }
    }
    for a in 0..k {
        if counts[a] > 0 {
            c.row_mut(a).scale_mut(1.0 / counts[a] as f64);
        }
    }
    c
}

fn distinct_rows(points: &DMatrix<f64>) -> Vec<usize> {
    let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
    let mut out = Vec::new();
    for r in 0..points.nrows() {
        let key: Vec<u64> = points.row(r).iter().map(|v| (v + 0.0).to_bits()).collect();
        if seen.insert(key, ()).is_none() {
            out.push(r);
        }
    }
    out
}

fn validate(points: &DMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    let n = points.nrows();
    if points.ncols() == 0 {
        return Err(ClusterError::NoDimensions);
    }
    if k == 0 || k > n {
        return Err(ClusterError::TooManyClusters { k, n });
    }
    let distinct = distinct_rows(points);
    if distinct.len() < k {
        return Err(ClusterError::DegenerateInput {
            k,
            distinct: distinct.len(),
        });
    }
    Ok(distinct)
}

fn assign(points: &DMatrix<f64>, centroids: &DMatrix<f64>) -> Vec<usize> {
    (0..points.nrows())
        .map(|r| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..centroids.nrows() {
                let d = sq_dist(points, r, centroids, c);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Gives every empty cluster the point farthest from its own centroid.
fn repair_empty(points: &DMatrix<f64>, centroids: &DMatrix<f64>, assignments: &mut [usize], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let far = (0..points.nrows())
            .filter(|&r| counts[assignments[r]] > 1)
            .max_by(|&a, &b| {
                sq_dist(points, a, centroids, assignments[a])
                    .total_cmp(&sq_dist(points, b, centroids, assignments[b]))
                    .then(b.cmp(&a))
            })
            .expect("k ≤ n guarantees a donor cluster");
        assignments[far] = empty;
    }
}

/// Single-point transfers that lower WSS, applied after Lloyd has settled.
/// Moving x from a (size n_a) to b changes WSS by
/// n_b/(n_b+1)·‖x−c_b‖² − n_a/(n_a−1)·‖x−c_a‖².
fn transfer_pass(points: &DMatrix<f64>, assignments: &mut [usize], centroids: &mut DMatrix<f64>, k: usize) -> bool {
    let d = points.ncols();
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    let mut moved = false;
    for r in 0..points.nrows() {
        let a = assignments[r];
        if sizes[a] < 2 {
            continue;
        }
        let na = sizes[a] as f64;
        let remove = na / (na - 1.0) * sq_dist(points, r, centroids, a);
        let mut best: Option<(usize, f64)> = None;
        for b in (0..k).filter(|&b| b != a) {
            let nb = sizes[b] as f64;
            let add = nb / (nb + 1.0) * sq_dist(points, r, centroids, b);
            if best.is_none_or(|(_, v)| add < v) {
                best = Some((b, add));
            }
        }
        let Some((b, add)) = best else { continue };
        if add < remove - 1e-12 * remove.max(1.0) {
            let nb = sizes[b] as f64;
            for j in 0..d {
                let x = points[(r, j)];
                centroids[(a, j)] = (centroids[(a, j)] * na - x) / (na - 1.0);
                centroids[(b, j)] = (centroids[(b, j)] * nb + x) / (nb + 1.0);
            }
            sizes[a] -= 1;
            sizes[b] += 1;
            assignments[r] = b;
            moved = true;
        }
    }
    moved
}

fn lloyd(points: &DMatrix<f64>, mut centroids: DMatrix<f64>, seed: u64) -> ClusterSolution {
    let k = centroids.nrows();
    let mut assignments: Vec<usize> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut wss_trace = Vec::new();
    let total = |c: &DMatrix<f64>, a: &[usize]| -> f64 {
        (0..points.nrows()).map(|r| sq_dist(points, r, c, a[r])).sum()
    };
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut next = assign(points, &centroids);
        repair_empty(points, &centroids, &mut next, k);
        let stable = next == assignments;
        assignments = next;
        centroids = centroids_of(points, &assignments, k);
        wss_trace.push(total(&centroids, &assignments));
        if stable {
            if !transfer_pass(points, &mut assignments, &mut centroids, k) {
                converged = true;
                break;
            }
            centroids = centroids_of(points, &assignments, k);
            wss_trace.push(total(&centroids, &assignments));
        }
    }
    let wss = *wss_trace.last().expect("at least one iteration");
    ClusterSolution {
        k,
        assignments,
        centroids,
        wss,
        seed,
        iterations,
        converged,
        wss_trace,
    }
}

/// One Lloyd run (with single-point transfer refinement) started from `k` distinct points drawn with `seed`.
pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<ClusterSolution> {
    let mut distinct = validate(points, k)?;
    let mut rng = SynthRng::new(seed);
    rng.shuffle(&mut distinct);
    let init = DMatrix::from_fn(k, points.ncols(), |c, j| points[(distinct[c], j)]);
    Ok(lloyd(points, init, seed))
}

/// Seed of restart `r` derived from a base seed.
pub fn restart_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add((r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Lowest-WSS solution over `restarts` seeded runs (first wins ties).
pub fn kmeans_best(points: &DMatrix<f64>, k: usize, seed: u64, restarts: usize) -> Result<ClusterSolution> {
    let mut best: Option<ClusterSolution> = None;
    for r in 0..restarts.max(1) {
        let sol = kmeans(points, k, restart_seed(seed, r))?;
        if best.as_ref().is_none_or(|b| sol.wss < b.wss) {
            best = Some(sol);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElbowRow {
    pub k: usize,
    pub wss: f64,
    pub log_wss: f64,
    pub eta2: f64,
    /// Undefined for the first row.
    pub pre: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElbowTable {
    pub rows: Vec<ElbowRow>,
    pub tss: f64,
}

impl ElbowTable {
    /// k with the largest proportional reduction in WSS.
    pub fn largest_pre_k(&self) -> Option<usize> {
        self.rows
            .iter()
            .filter_map(|r| r.pre.map(|p| (r.k, p)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(k, _)| k)
    }
}

/// Elbow diagnostics from a WSS series for k = 1, 2, ….
pub fn diagnostics_from_wss(wss: &[f64], tss: f64) -> Result<ElbowTable> {
    if wss.is_empty() {
        return Err(ClusterError::EmptySeries);
    }
    let rows = wss
        .iter()
        .enumerate()
        .map(|(i, &w)| ElbowRow {
            k: i + 1,
            wss: w,
            log_wss: w.ln(),
            eta2: 1.0 - w / tss,
            pre: (i > 0).then(|| (wss[i - 1] - w) / wss[i - 1]),
        })
        .collect();
    Ok(ElbowTable { rows, tss })
}

/// Solves k = 1..=k_max with best-of-restarts. Each k also gets one run
/// started from the (k−1) centroids plus the worst-fitted point, so WSS
/// never increases with k.
pub fn elbow_sweep(
    points: &DMatrix<f64>,
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> Result<(ElbowTable, Vec<ClusterSolution>)> {
    if k_max < 2 || restarts == 0 {
        return Err(ClusterError::BadSweep);
    }
    let mut solutions: Vec<ClusterSolution> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut best = kmeans_best(points, k, seed, restarts)?;
        if let Some(prev) = solutions.last() {
            let far = (0..points.nrows())
                .max_by(|&a, &b| {
                    sq_dist(points, a, &prev.centroids, prev.assignments[a])
                        .total_cmp(&sq_dist(points, b, &prev.centroids, prev.assignments[b]))
                        .then(b.cmp(&a))
                })
                .expect("non-empty");
            if sq_dist(points, far, &prev.centroids, prev.assignments[far]) > 0.0 {
                let mut init = prev.centroids.clone().insert_row(k - 1, 0.0);
                init.row_mut(k - 1).copy_from(&points.row(far));
                let warm = lloyd(points, init, seed);
                if warm.wss < best.wss {
                    best = warm;
                }
            }
        }
        solutions.push(best);
    }
    let wss: Vec<f64> = solutions.iter().map(|s| s.wss).collect();
    let table = diagnostics_from_wss(&wss, total_ss(points))?;
    Ok((table, solutions))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorStat {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    /// 0-based id in the solution.
    pub id: usize,
    pub label: Option<String>,
    pub members: Vec<usize>,
    pub factors: Vec<FactorStat>,
    pub total_score: f64,
    /// Means of the extra columns (e.g. log GDP per capita), same order as
    /// `ClusterSummary::extra_names`.
    pub extras: Vec<f64>,
}

impl ClusterStats {
    pub fn n(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    pub factor_names: Vec<String>,
    pub extra_names: Vec<String>,
    /// Ordered by descending total score.
    pub clusters: Vec<ClusterStats>,
}

pub fn total_score(factor_means: &[f64]) -> f64 {
    factor_means.iter().sum()
}

fn stat(values: &[f64]) -> FactorStat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    FactorStat {
        mean,
        sd,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Per-cluster statistics. Stage labels are attached when there are exactly
/// five clusters.
pub fn cluster_summary(
    solution: &ClusterSolution,
    points: &DMatrix<f64>,
    factor_names: &[String],
    extras: &[(String, Vec<f64>)],
) -> Result<ClusterSummary> {
    let n = points.nrows();
    if solution.assignments.len() != n {
        return Err(ClusterError::LengthMismatch {
            what: "assignments".into(),
            got: solution.assignments.len(),
            expected: n,
        });
    }
    for (name, v) in extras {
        if v.len() != n {
            return Err(ClusterError::LengthMismatch {
                what: name.clone(),
                got: v.len(),
                expected: n,
            });
        }
    }
    let mut clusters: Vec<ClusterStats> = (0..solution.k)
        .map(|id| {
            let members: Vec<usize> = (0..n).filter(|&r| solution.assignments[r] == id).collect();
            let factors: Vec<FactorStat> = (0..points.ncols())
                .map(|j| stat(&members.iter().map(|&r| points[(r, j)]).collect::<Vec<_>>()))
                .collect();
            let means: Vec<f64> = factors.iter().map(|f| f.mean).collect();
            let extras = extras
                .iter()
                .map(|(_, v)| members.iter().map(|&r| v[r]).sum::<f64>() / members.len() as f64)
                .collect();
            ClusterStats {
                id,
                label: None,
                members,
                total_score: total_score(&means),
                factors,
                extras,
            }
        })
        .filter(|c| !c.members.is_empty())
        .collect();
    clusters.sort_by(|a, b| b.total_score.total_cmp(&a.total_score).then(a.id.cmp(&b.id)));
    if clusters.len() == STAGE_LABELS.len() {
        for (c, l) in clusters.iter_mut().zip(STAGE_LABELS) {
            c.label = Some(l.to_string());
        }
    }
    Ok(ClusterSummary {
        factor_names: factor_names.to_vec(),
        extra_names: extras.iter().map(|(n, _)| n.clone()).collect(),
        clusters,
    })
}

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut ra: HashMap<usize, u64> = HashMap::new();
    let mut rb: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let c2 = |m: u64| (m * m.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.values().map(|&m| c2(m)).sum();
    let sa: f64 = ra.values().map(|&m| c2(m)).sum();
    let sb: f64 = rb.values().map(|&m| c2(m)).sum();
    let expected = sa * sb / c2(n as u64);
    let max = (sa + sb) / 2.0;
    if (max - expected).abs() < f64::EPSILON {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
