use panelcap_core::factor::{
    analyse, correlation_matrix, factor_scores, kmo, pca_extract, retain_factors, run_cfa, run_efa,
    varimax_criterion, varimax_rotate, CorrelationMatrix, FactorError, FactorGroup, FactorModel,
    FactorName, EIGEN_THRESHOLD,
};
use panelcap_core::layout::{self, CAPACITIES, REGRESSION_ORDER};
use panelcap_core::panel::PanelDataset;
use panelcap_core::synth::{gen_factor_panel, gen_reference_panel, FactorPlan, ReferencePlan, SynthRng, SynthSpec};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn codes(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("v{j:02}")).collect()
}

fn random_panel(nc: usize, t: usize, p: usize, seed: u64) -> PanelDataset {
    let mut rng = SynthRng::new(seed);
    let mut data = PanelDataset::new(
        (0..nc).map(|i| format!("C{i:02}")).collect(),
        (0..t as i32).map(|y| 2005 + y).collect(),
    );
    let common: Vec<f64> = (0..nc * t).map(|_| rng.normal()).collect();
    for (j, c) in codes(p).into_iter().enumerate() {
        let w = 0.3 + 0.15 * j as f64;
        data.insert_column(c, common.iter().map(|f| w * f + rng.normal()).collect()).unwrap();
    }
    data
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0);
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0);
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (n - 1.0);
    cov / (vx * vy).sqrt()
}

fn model_from_loadings(l: DMatrix<f64>) -> FactorModel {
    let (p, m) = l.shape();
    let r = &l * l.transpose();
    FactorModel {
        codes: codes(p),
        eigenvalues: vec![1.0; p],
        unrotated: l.clone(),
        loadings: l,
        rotation: DMatrix::identity(m, m),
        retained: m,
        names: (1..=m).map(|j| format!("f{j}")).collect(),
        correlation: CorrelationMatrix::from_values(codes(p), r),
    }
}

fn normalized(l: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = l.clone();
    for mut row in out.row_iter_mut() {
        let h = row.norm();
        if h > 0.0 {
            row /= h;
        }
    }
    out
}

fn plane_rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Distance between two loading matrices after the best column permutation
/// and sign flips (two columns only).
fn signed_perm_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for perm in [[0usize, 1], [1, 0]] {
        let mut total = 0.0_f64;
        for (j, &pj) in perm.iter().enumerate() {
            let pos = (a.column(j) - b.column(pj)).amax();
            let neg = (a.column(j) + b.column(pj)).amax();
            total = total.max(pos.min(neg));
        }
        best = best.min(total);
    }
    best
}

#[test]
fn correlation_matches_pearson_oracle() {
    let data = random_panel(6, 5, 5, 11);
    let cs = codes(5);
    let corr = correlation_matrix(&data, &cs).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let oracle = pearson(data.column(&cs[i]).unwrap(), data.column(&cs[j]).unwrap());
            assert!((corr.values[(i, j)] - oracle).abs() < 1e-12);
        }
    }
}

#[test]
fn correlation_affine_cases() {
    let mut data = random_panel(3, 4, 1, 5);
    let x: Vec<f64> = data.column("v01").unwrap().to_vec();
    data.insert_column("a", x.iter().map(|v| 2.0 * v + 3.0).collect()).unwrap();
    data.insert_column("n", x.iter().map(|v| -v).collect()).unwrap();
    let c = correlation_matrix(&data, &["v01".into(), "a".into(), "n".into()]).unwrap();
    assert!((c.values[(0, 1)] - 1.0).abs() < 1e-12);
    assert!((c.values[(0, 2)] + 1.0).abs() < 1e-12);
}

#[test]
fn eigen_identity_and_trace() {
    let data = random_panel(8, 6, 6, 3);
    let corr = correlation_matrix(&data, &codes(6)).unwrap();
    let m = pca_extract(&corr).unwrap();
    let rebuilt = &m.unrotated * m.unrotated.transpose();
    assert!((rebuilt - &corr.values).amax() < 1e-8);
    let trace: f64 = m.eigenvalues.iter().sum();
    assert!((trace - 6.0).abs() < 1e-8);
    for (j, ev) in m.eigenvalues.iter().enumerate() {
        assert!((m.unrotated.column(j).norm_squared() - ev).abs() < 1e-8);
    }
    assert!(m.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn exact_orthonormal_model_recovers_column_norms() {
    // noise-free model with orthogonal loading columns: eigenvalues are the
    // squared column norms
    let plan = FactorPlan::blocks(&[3, 2], 1.0, 0.0);
    let fp = gen_factor_panel(&SynthSpec::new(20, 10, 4), &plan);
    let corr = correlation_matrix(&fp.data, &plan.codes).unwrap();
    // standardized variables within a block are identical, so the block
    // eigenvalue equals the block size
    let m = pca_extract(&corr).unwrap();
    assert!((m.eigenvalues[0] - 3.0).abs() < 0.1);
    assert!((m.eigenvalues[1] - 2.0).abs() < 0.1);
}

#[test]
fn block_diagonal_loadings_are_already_simple() {
    let l = DMatrix::from_row_slice(
        5,
        2,
        &[0.9, 0.0, 0.8, 0.0, 0.7, 0.0, 0.0, 0.85, 0.0, 0.6],
    );
    let rotated = varimax_rotate(&model_from_loadings(l.clone()));
    assert!(signed_perm_distance(&rotated.loadings, &l) < 1e-6);
    let t = &rotated.rotation;
    let abs_t = t.map(f64::abs);
    let id_like = (abs_t.clone() - DMatrix::identity(2, 2)).amax().min(
        (abs_t - DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).amax(),
    );
    assert!(id_like < 1e-6);
}

#[test]
fn mixed_two_factor_matches_angle_grid_search() {
    let simple = DMatrix::from_row_slice(
        6,
        2,
        &[0.85, 0.10, 0.80, 0.05, 0.70, 0.20, 0.15, 0.90, 0.05, 0.75, 0.10, 0.60],
    );
    let mixed = &simple * plane_rotation(std::f64::consts::FRAC_PI_4);
    let rotated = varimax_rotate(&model_from_loadings(mixed.clone()));

    // brute force: maximize the normalized criterion over the rotation angle
    let norm = normalized(&mixed);
    let crit = |th: f64| varimax_criterion(&(&norm * plane_rotation(th)));
    let steps = 20_000;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut best = (0.0, f64::NEG_INFINITY);
    for s in 0..steps {
        let th = half_pi * s as f64 / steps as f64;
        let c = crit(th);
        if c > best.1 {
            best = (th, c);
        }
    }
    let (mut lo, mut hi) = (best.0 - half_pi / steps as f64, best.0 + half_pi / steps as f64);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if crit(m1) < crit(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let theta = 0.5 * (lo + hi);
    let oracle = &mixed * plane_rotation(theta);
    assert!(signed_perm_distance(&rotated.loadings, &oracle) < 1e-6);
    assert!((varimax_criterion(&normalized(&rotated.loadings)) - crit(theta)).abs() < 1e-10);
}

#[test]
fn kmo_matches_cofactor_oracle() {
    let r = 0.5;
    let m = DMatrix::from_row_slice(3, 3, &[1.0, r, r, r, 1.0, r, r, r, 1.0]);
    let k = kmo(&CorrelationMatrix::from_values(codes(3), m.clone())).unwrap();
    // cofactor inverse of the equicorrelated 3×3 matrix
    let det = 1.0 + 2.0 * r * r * r - 3.0 * r * r;
    let diag = (1.0 - r * r) / det;
    let off = (r * r - r) / det;
    let q = -off / diag;
    let oracle = (6.0 * r * r) / (6.0 * r * r + 6.0 * q * q);
    assert!((k.overall - oracle).abs() < 1e-10);
    for (_, v) in &k.per_variable {
        assert!((v - oracle).abs() < 1e-10);
    }
}

#[test]
fn kmo_grows_with_shared_correlation() {
    let equi = |r: f64| {
        let mut m = DMatrix::from_element(4, 4, r);
        m.fill_diagonal(1.0);
        kmo(&CorrelationMatrix::from_values(codes(4), m)).unwrap().overall
    };
    let mut prev = 0.0;
    for r in [0.1, 0.2, 0.35, 0.5, 0.65, 0.8] {
        let v = equi(r);
        assert!(v >= prev - 1e-12, "KMO dropped at r = {r}");
        assert!((0.0..=1.0).contains(&v));
        prev = v;
    }
}

#[test]
fn kmo_duplicated_variable_is_singular() {
    let mut data = random_panel(4, 5, 2, 9);
    let v = data.column("v01").unwrap().to_vec();
    data.insert_column("dup", v).unwrap();
    let corr = correlation_matrix(&data, &["v01".into(), "v02".into(), "dup".into()]).unwrap();
    assert!(matches!(kmo(&corr), Err(FactorError::SingularCorrelation(_))));
}

#[test]
fn single_variable_group_scores_equal_zscores() {
    let data = random_panel(5, 4, 1, 21);
    let g = FactorGroup {
        name: "solo".into(),
        codes: vec!["v01".into()],
        factor_names: vec![],
    };
    let a = &run_cfa(&data, &[g]).unwrap()[0];
    let z = panelcap_core::panel::zscores("v01", data.column("v01").unwrap()).unwrap();
    let s = a.scores.scores.column(0);
    for (x, y) in s.iter().zip(&z) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn identity_like_data_retains_nothing() {
    let plan = FactorPlan::blocks(&[1, 1, 1, 1], 0.0, 1.0);
    let fp = gen_factor_panel(&SynthSpec::new(2, 2, 0), &plan);
    // mutually orthogonal, mean-zero contrasts: correlation is the identity
    let mut data = fp.data.clone();
    let cs = codes(3);
    let contrasts = [
        vec![1.0, -1.0, 1.0, -1.0],
        vec![1.0, 1.0, -1.0, -1.0],
        vec![1.0, -1.0, -1.0, 1.0],
    ];
    for (c, v) in cs.iter().zip(contrasts) {
        data = data.with_column(c.clone(), v).unwrap();
    }
    let err = run_efa(&data, &cs, &[]).unwrap_err();
    assert!(matches!(err, FactorError::NoFactorRetained { .. }));
}

#[test]
fn scale_invariance() {
    let data = random_panel(6, 8, 4, 17);
    let cs = codes(4);
    let g = FactorGroup {
        name: "g".into(),
        codes: cs.clone(),
        factor_names: vec![],
    };
    let base = analyse(&data, &g, "f").unwrap();
    let scaled_col: Vec<f64> = data.column("v02").unwrap().iter().map(|v| v * 7.3).collect();
    let scaled = data.with_column("v02", scaled_col).unwrap();
    let other = analyse(&scaled, &g, "f").unwrap();
    assert!((&base.model.loadings - &other.model.loadings).amax() < 1e-10);
    assert!((&base.scores.scores - &other.scores.scores).amax() < 1e-10);
}

#[test]
fn efa_on_one_group_equals_cfa() {
    let data = random_panel(6, 8, 5, 23);
    let cs = codes(5);
    let g = FactorGroup {
        name: "g".into(),
        codes: cs.clone(),
        factor_names: vec![],
    };
    let cfa = &run_cfa(&data, &[g]).unwrap()[0];
    let efa = run_efa(&data, &cs, &[]).unwrap();
    assert_eq!(cfa.model.loadings, efa.model.loadings);
    assert_eq!(cfa.scores.scores, efa.scores.scores);
}

fn check_analysis(model: &FactorModel, scores: &DMatrix<f64>) {
    let m = model.n_factors();
    let tt = model.rotation.transpose() * &model.rotation;
    assert!((tt - DMatrix::identity(m, m)).amax() < 1e-10);
    let before: Vec<f64> = model.unrotated.row_iter().map(|r| r.norm_squared()).collect();
    for (a, b) in model.communalities().iter().zip(before) {
        assert!((a - b).abs() < 1e-10);
    }
    let n = scores.nrows() as f64;
    for j in 0..m {
        let c = scores.column(j);
        let mean = c.sum() / n;
        let sd = (c.map(|v| (v - mean).powi(2)).sum() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 1e-8);
        assert!((sd - 1.0).abs() < 1e-8);
        for k in j + 1..m {
            let r = pearson(c.as_slice(), scores.column(k).as_slice());
            assert!(r.abs() < 1e-8, "score correlation {r}");
        }
    }
}

#[test]
fn reference_layout_recovers_thirteen_factors() {
    let reference = gen_reference_panel(&ReferencePlan::new(2024));
    let groups: Vec<FactorGroup> = CAPACITIES
        .iter()
        .map(|c| FactorGroup {
            name: c.name.to_string(),
            codes: c.variables().iter().map(|s| s.to_string()).collect(),
            factor_names: c.factors.iter().map(|f| FactorName::anchored(f.id, f.anchor)).collect(),
        })
        .collect();
    let runs = run_cfa(&reference.data, &groups).unwrap();
    let total: usize = runs.iter().map(|a| a.model.n_factors()).sum();
    assert_eq!(total, 13);
    let per: Vec<usize> = runs.iter().map(|a| a.model.n_factors()).collect();
    assert_eq!(per, vec![3, 4, 2, 2, 1, 1]);
    let mut names: Vec<String> = runs.iter().flat_map(|a| a.model.names.clone()).collect();
    names.sort();
    let mut expected: Vec<String> = REGRESSION_ORDER.iter().map(|s| s.to_string()).collect();
    expected.sort();
    assert_eq!(names, expected);
    for a in &runs {
        check_analysis(&a.model, &a.scores.scores);
        for (j, name) in a.model.names.iter().enumerate() {
            let def = layout::factor_def(name).unwrap();
            let block: Vec<&str> = def.block.iter().map(|v| v.trim_start_matches('-')).collect();
            let col = a.model.loadings.column(j);
            let top = (0..col.len()).max_by(|&x, &y| col[x].abs().total_cmp(&col[y].abs())).unwrap();
            assert!(block.contains(&a.model.codes[top].as_str()), "{name}: top variable {}", a.model.codes[top]);
        }
    }
}

#[test]
fn twelve_block_plan_recovers_twelve_factors() {
    let sizes = [5, 4, 4, 4, 4, 4, 4, 4, 4, 4, 3, 3];
    let plan = FactorPlan::blocks(&sizes, 0.8, 0.1);
    let fp = gen_factor_panel(&SynthSpec::new(82, 15, 12), &plan);
    let efa = run_efa(&fp.data, &plan.codes, &[]).unwrap();
    assert_eq!(efa.model.n_factors(), 12);
    check_analysis(&efa.model, &efa.scores.scores);
    // every recovered factor's high loadings cover exactly one planted block
    for j in 0..12 {
        let col = efa.model.loadings.column(j);
        let high: Vec<usize> = (0..col.len()).filter(|&i| col[i].abs() >= 0.4).collect();
        let blocks: std::collections::BTreeSet<usize> = high.iter().map(|&i| fp.supports[i]).collect();
        assert_eq!(blocks.len(), 1);
        let b = *blocks.iter().next().unwrap();
        assert_eq!(high.len(), sizes[b]);
    }
}

#[test]
fn retention_threshold_is_strict() {
    let data = random_panel(6, 8, 4, 29);
    let corr = correlation_matrix(&data, &codes(4)).unwrap();
    let m = pca_extract(&corr).unwrap();
    let kept = retain_factors(&m, EIGEN_THRESHOLD).unwrap();
    assert_eq!(kept.n_factors(), m.eigenvalues.iter().filter(|&&v| v > 1.0).count());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rotation_and_score_invariants(seed in any::<u64>(), p in 3usize..7, nc in 4usize..9) {
        let data = random_panel(nc, 6, p, seed);
        let g = FactorGroup { name: "g".into(), codes: codes(p), factor_names: vec![] };
        match analyse(&data, &g, "f") {
            Ok(a) => check_analysis(&a.model, &a.scores.scores),
            Err(FactorError::NoFactorRetained { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn scores_are_deterministic(seed in any::<u64>()) {
        let data = random_panel(5, 5, 4, seed);
        let g = FactorGroup { name: "g".into(), codes: codes(4), factor_names: vec![] };
        if let (Ok(a), Ok(b)) = (analyse(&data, &g, "f"), analyse(&data, &g, "f")) {
            prop_assert_eq!(&a.scores.scores, &b.scores.scores);
            let again = factor_scores(&data, &a.model).unwrap();
            prop_assert_eq!(&again.scores, &b.scores.scores);
        }
    }
}
