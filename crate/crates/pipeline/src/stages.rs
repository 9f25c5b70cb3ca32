//! The pipeline stages. Each stage computes in memory and returns the files
//! it would write; the caller decides what reaches disk.

use panelcap_core::cluster::{cluster_summary, elbow_sweep, kmeans_best, ClusterSolution, ClusterSummary, ElbowTable};
use panelcap_core::diagnostics::{bp_hettest, bp_lm_poolability, hausman, white_test, TestResult};
use panelcap_core::estimators::{
    fixed_effects, pooled_ols, random_effects, robust_vcov, Design, DesignSpec, Estimator, FitResult,
};
use panelcap_core::factor::{self, FactorGroup, FactorName, FactorScores, GroupAnalysis, KmoResult, EIGEN_THRESHOLD};
use panelcap_core::panel::{self, PanelDataset, YearWindow};
use panelcap_core::report::{self, RegressionTable};
use panelcap_core::svg;
use nalgebra::DMatrix;

use crate::config::{efa_names, FactorMode, PipelineConfig, SeKind};
use crate::error::Result;
use crate::output::Artifact;

/// Loaded input: the raw panel and the panel after schema transforms.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub raw: PanelDataset,
    pub data: PanelDataset,
}

pub fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    s.split('_').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("_")
}

fn panel_csv(data: &PanelDataset) -> Result<String> {
    let mut buf = Vec::new();
    panel::write_csv(data, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

// ------------------------------------------------------------------ ingest

pub fn load(cfg: &PipelineConfig) -> Result<Prepared> {
    let schema = cfg.schema();
    let raw = panel::load_csv(&cfg.input, &schema)?;
    log::info!(
        "loaded {} rows ({} countries × {} years) from {}",
        raw.n_rows(),
        raw.n_countries(),
        raw.n_years(),
        cfg.input.display()
    );
    let data = panel::apply_transforms(&raw, &schema)?;
    Ok(Prepared { raw, data })
}

pub fn ingest_artifacts(p: &Prepared) -> Vec<Artifact> {
    let raw = &p.raw;
    let years = raw.years();
    let validation = format!(
        "item,value\nrows,{}\ncountries,{}\nyears,{}\nfirst_year,{}\nlast_year,{}\ncolumns,{}\nbalanced,yes\n",
        raw.n_rows(),
        raw.n_countries(),
        raw.n_years(),
        years.first().copied().unwrap_or_default(),
        years.last().copied().unwrap_or_default(),
        raw.column_names().len(),
    );
    let rows = panel::describe(raw);
    vec![
        Artifact::new("describe.csv", report::describe_csv(&rows)),
        Artifact::new("describe.md", report::describe_markdown(&rows)),
        Artifact::new("validation.csv", validation),
    ]
}

// ------------------------------------------------------------------ factors

#[derive(Debug, Clone)]
pub struct FactorStage {
    pub mode: FactorMode,
    pub analyses: Vec<GroupAnalysis>,
    pub kmo: Vec<(String, KmoResult)>,
    pub scores: FactorScores,
    /// Transformed panel with the score columns attached.
    pub data: PanelDataset,
}

impl FactorStage {
    pub fn factor_names(&self) -> &[String] {
        &self.scores.names
    }
}

pub fn groups(cfg: &PipelineConfig) -> Vec<FactorGroup> {
    cfg.capacities
        .iter()
        .map(|c| FactorGroup {
            name: c.name.clone(),
            codes: c.variables.clone(),
            factor_names: c
                .factors
                .iter()
                .map(|f| FactorName::anchored(f.id.clone(), f.anchor.clone()))
                .collect(),
        })
        .collect()
}

pub fn run_factors(cfg: &PipelineConfig, p: &Prepared, mode: FactorMode) -> Result<FactorStage> {
    let (analyses, kmo_inputs): (Vec<GroupAnalysis>, Vec<(String, Vec<String>)>) = match mode {
        FactorMode::Cfa => {
            let groups = groups(cfg);
            let a = factor::run_cfa(&p.data, &groups)?;
            (a, groups.into_iter().map(|g| (g.name, g.codes)).collect())
        }
        FactorMode::Efa => {
            let codes = cfg.capacity_variables();
            let a = factor::run_efa(&p.data, &codes, &efa_names(cfg))?;
            (vec![a], vec![("efa".to_string(), codes)])
        }
    };
    let mut kmo = Vec::new();
    for (name, codes) in kmo_inputs.iter().filter(|(_, c)| c.len() > 1) {
        let corr = factor::correlation_matrix(&p.data, codes)?;
        kmo.push((name.clone(), factor::kmo(&corr)?));
    }
    let parts: Vec<&FactorScores> = analyses.iter().map(|a| &a.scores).collect();
    let scores = FactorScores::concat(&parts);
    let data = scores.attach(&p.data)?;
    for a in &analyses {
        log::info!("{}: {} factor(s) retained", a.group, a.model.n_factors());
    }
    Ok(FactorStage {
        mode,
        analyses,
        kmo,
        scores,
        data,
    })
}

pub fn factor_artifacts(stage: &FactorStage, p: &Prepared) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    for a in &stage.analyses {
        let s = slug(&a.group);
        out.push(Artifact::new(format!("factors/loadings_{s}.csv"), report::loadings_csv(&a.model)));
        out.push(Artifact::new(format!("factors/loadings_{s}.md"), report::loadings_markdown(&a.model)));
        out.push(Artifact::new(format!("factors/scree_{s}.csv"), report::scree_csv(&a.model)));
        out.push(Artifact::new(
            format!("factors/scree_{s}.svg"),
            svg::scree_svg(&format!("Scree plot: {}", a.group), &a.model.eigenvalues, EIGEN_THRESHOLD),
        ));
    }
    out.push(Artifact::new("factors/kmo.csv", report::kmo_csv(&stage.kmo)));
    let mut scores = PanelDataset::new(p.data.countries().to_vec(), p.data.years().to_vec());
    for name in &stage.scores.names {
        scores.insert_column(name.clone(), stage.scores.column(name).expect("own column"))?;
    }
    out.push(Artifact::new("scores.csv", panel_csv(&scores)?));
    Ok(out)
}

// ------------------------------------------------------------------ regress

/// One specification of the three-estimator table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegressOptions {
    pub mode: FactorMode,
    pub se: SeKind,
    pub controls: bool,
    pub year_dummies: bool,
}

impl RegressOptions {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        Self {
            mode: cfg.estimation.mode,
            se: cfg.estimation.se,
            controls: cfg.estimation.controls,
            year_dummies: cfg.estimation.year_dummies,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegressStage {
    pub table: RegressionTable,
    pub design: Design,
    /// Fits with classical covariances (Pooled OLS, RE, FE).
    pub classical: [FitResult; 3],
}

impl RegressStage {
    pub fn fit(&self, e: Estimator) -> &FitResult {
        &self.table.columns.iter().find(|(_, f)| f.estimator == e).expect("all three estimators").1
    }
}

pub fn regress(
    cfg: &PipelineConfig,
    data: &PanelDataset,
    factors: &[String],
    opts: RegressOptions,
    title: &str,
) -> Result<RegressStage> {
    let mut regressors = factors.to_vec();
    if opts.controls {
        regressors.extend(cfg.control_codes());
    }
    let mut spec = DesignSpec::new(cfg.outcome_column(), regressors);
    spec.include_year_dummies = opts.year_dummies;
    let design = Design::build(data, &spec)?;
    let classical = [pooled_ols(&design)?, random_effects(&design)?, fixed_effects(&design)?];
    let columns = classical
        .iter()
        .map(|f| {
            let fit = match opts.se {
                SeKind::Classical => f.clone(),
                SeKind::Robust => robust_vcov(f, f.estimator.robust_kind())?,
            };
            Ok((f.estimator.label().to_string(), fit))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegressStage {
        table: RegressionTable {
            title: title.to_string(),
            columns,
            controls: opts.controls,
            year_effects: opts.year_dummies,
        },
        design,
        classical,
    })
}

fn not_computed(name: &str, err: impl std::fmt::Display) -> TestResult {
    log::warn!("{name} not computed: {err}");
    TestResult {
        name: name.to_string(),
        statistic: f64::NAN,
        df: 0,
        p_value: f64::NAN,
        verdict: format!("not computed: {err}"),
        flagged: true,
    }
}

/// Poolability, Hausman and heteroskedasticity tests for a regress stage.
/// A test that cannot be computed is reported as such instead of failing
/// the whole stage.
pub fn diagnostics(stage: &RegressStage, data: &PanelDataset) -> Vec<TestResult> {
    let [ols, re, fe] = &stage.classical;
    let mut tests = Vec::new();
    tests.push(
        bp_lm_poolability(ols.residuals.as_slice(), data.n_countries(), data.n_years())
            .unwrap_or_else(|e| not_computed("Breusch-Pagan LM (poolability)", e)),
    );
    tests.push(hausman(fe, re).unwrap_or_else(|e| not_computed("Hausman (FE vs RE)", e)));
    tests.push(bp_hettest(ols).unwrap_or_else(|e| not_computed("Breusch-Pagan / Cook-Weisberg", e)));
    tests.push(
        white_test(ols, &stage.design.x, &stage.design.names).unwrap_or_else(|e| not_computed("White", e)),
    );
    tests
}

pub fn regress_artifacts(stage: &RegressStage, tests: &[TestResult]) -> Vec<Artifact> {
    vec![
        Artifact::new("regression.csv", stage.table.to_csv()),
        Artifact::new("regression.md", stage.table.to_markdown()),
        Artifact::new("diagnostics.csv", report::diagnostics_csv(tests)),
        Artifact::new("diagnostics.md", report::diagnostics_markdown(tests)),
    ]
}

// ------------------------------------------------------------------ cluster

#[derive(Debug, Clone)]
pub struct ClusterStage {
    pub countries: Vec<String>,
    pub factor_names: Vec<String>,
    pub points: DMatrix<f64>,
    pub elbow: ElbowTable,
    pub solution: ClusterSolution,
    pub summary: ClusterSummary,
}

/// Per-country means of `codes` over an inclusive year window.
pub fn window_means(data: &PanelDataset, codes: &[String], window: [i32; 2]) -> Result<DMatrix<f64>> {
    let refs: Vec<&str> = codes.iter().map(String::as_str).collect();
    let avg = panel::period_average(&data.select(&refs)?, &[YearWindow::new(window[0], window[1])])?;
    let cols = codes
        .iter()
        .map(|c| avg.column(c).map(<[f64]>::to_vec))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(DMatrix::from_fn(avg.n_rows(), codes.len(), |r, j| cols[j][r]))
}

pub fn cluster(cfg: &PipelineConfig, factors: &FactorStage, seed: u64) -> Result<ClusterStage> {
    let c = &cfg.clustering;
    let data = &factors.data;
    let points = window_means(data, &c.factors, c.window)?;
    let (elbow, sols) = elbow_sweep(&points, c.k_max, seed, c.restarts)?;
    let solution = match sols.get(c.k - 1) {
        Some(s) => s.clone(),
        None => kmeans_best(&points, c.k, seed, c.restarts)?,
    };
    let mut extra_codes = vec![cfg.outcome_column()];
    extra_codes.extend(cfg.growth.iter().cloned());
    let extra_means = window_means(data, &extra_codes, c.window)?;
    let extras: Vec<(String, Vec<f64>)> = extra_codes
        .iter()
        .enumerate()
        .map(|(j, code)| (code.clone(), extra_means.column(j).iter().copied().collect()))
        .collect();
    let summary = cluster_summary(&solution, &points, &c.factors, &extras)?;
    log::info!(
        "k-means: k = {}, wss = {:.6}, largest PRE at k = {:?}",
        c.k,
        solution.wss,
        elbow.largest_pre_k()
    );
    Ok(ClusterStage {
        countries: data.countries().to_vec(),
        factor_names: c.factors.clone(),
        points,
        elbow,
        solution,
        summary,
    })
}

pub fn cluster_artifacts(stage: &ClusterStage) -> Vec<Artifact> {
    let mut out = vec![
        Artifact::new("cluster/elbow.csv", report::elbow_csv(&stage.elbow)),
        Artifact::new("cluster/elbow.md", report::elbow_markdown(&stage.elbow)),
        Artifact::new("cluster/elbow.svg", svg::elbow_svg("Elbow diagnostics", &stage.elbow)),
        Artifact::new("cluster/membership.csv", report::membership_csv(&stage.summary, &stage.countries)),
        Artifact::new("cluster/summary.csv", report::cluster_summary_csv(&stage.summary)),
        Artifact::new("cluster/summary.md", report::cluster_summary_markdown(&stage.summary)),
    ];
    if stage.points.ncols() >= 2 {
        let x: Vec<f64> = stage.points.column(0).iter().copied().collect();
        let y: Vec<f64> = stage.points.column(1).iter().copied().collect();
        out.push(Artifact::new(
            "cluster/scatter.svg",
            svg::scatter_svg(
                "Country clusters",
                &stage.factor_names[0],
                &stage.factor_names[1],
                &x,
                &y,
                &stage.solution.assignments,
                &stage.countries,
            ),
        ));
    }
    out
}

// ------------------------------------------------------------------ sensitivity

#[derive(Debug, Clone)]
pub struct SensitivityCell {
    pub file: String,
    pub options: RegressOptions,
    pub period_average: bool,
    pub table: RegressionTable,
}

fn levels<T: Copy + PartialEq>(base: T, other: T, vary: bool) -> Vec<T> {
    if vary && other != base {
        vec![base, other]
    } else {
        vec![base]
    }
}

fn cell_name(o: &RegressOptions) -> String {
    let mode = match o.mode {
        FactorMode::Cfa => "cfa",
        FactorMode::Efa => "efa",
    };
    let se = match o.se {
        SeKind::Robust => "robust",
        SeKind::Classical => "classical",
    };
    let ctrl = if o.controls { "controls" } else { "nocontrols" };
    let yr = if o.year_dummies { "year" } else { "noyear" };
    format!("{mode}_{se}_{ctrl}_{yr}")
}

/// The robustness grid: every combination of the enabled toggles, plus the
/// period-averaged panel with period dummies.
pub fn sensitivity(
    cfg: &PipelineConfig,
    p: &Prepared,
    cfa: &FactorStage,
    efa: Option<&FactorStage>,
) -> Result<Vec<SensitivityCell>> {
    let s = &cfg.sensitivity;
    let base = RegressOptions::from_config(cfg);
    let other_mode = match base.mode {
        FactorMode::Cfa => FactorMode::Efa,
        FactorMode::Efa => FactorMode::Cfa,
    };
    let other_se = match base.se {
        SeKind::Robust => SeKind::Classical,
        SeKind::Classical => SeKind::Robust,
    };
    let stage_for = |mode: FactorMode| -> Result<std::borrow::Cow<'_, FactorStage>> {
        Ok(match (mode, efa) {
            (FactorMode::Cfa, _) => std::borrow::Cow::Borrowed(cfa),
            (FactorMode::Efa, Some(e)) => std::borrow::Cow::Borrowed(e),
            (FactorMode::Efa, None) => std::borrow::Cow::Owned(run_factors(cfg, p, FactorMode::Efa)?),
        })
    };
    let mut cells = Vec::new();
    for mode in levels(base.mode, other_mode, s.efa) {
        let stage = stage_for(mode)?;
        for se in levels(base.se, other_se, s.classical_se) {
            for controls in levels(base.controls, !base.controls, s.no_controls) {
                for year_dummies in levels(base.year_dummies, !base.year_dummies, s.no_year_dummies) {
                    let options = RegressOptions {
                        mode,
                        se,
                        controls,
                        year_dummies,
                    };
                    let name = cell_name(&options);
                    let r = regress(cfg, &stage.data, stage.factor_names(), options, &name)?;
                    cells.push(SensitivityCell {
                        file: format!("sensitivity/{name}.csv"),
                        options,
                        period_average: false,
                        table: r.table,
                    });
                }
            }
        }
    }
    if s.period_average {
        let stage = stage_for(base.mode)?;
        let averaged = panel::period_average(&stage.data, &cfg.windows())?;
        let options = RegressOptions {
            year_dummies: true,
            ..base
        };
        let title = "period averages with period dummies";
        let r = regress(cfg, &averaged, stage.factor_names(), options, title)?;
        cells.push(SensitivityCell {
            file: "sensitivity/period_average.csv".to_string(),
            options,
            period_average: true,
            table: r.table,
        });
    }
    Ok(cells)
}

pub fn sensitivity_artifacts(cells: &[SensitivityCell]) -> Vec<Artifact> {
    let mut index = String::from("file,factors,standard_errors,controls,time_effects,panel\n");
    let mut out = Vec::new();
    for c in cells {
        let o = &c.options;
        index.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.file.trim_start_matches("sensitivity/"),
            if o.mode == FactorMode::Cfa { "CFA" } else { "EFA" },
            if o.se == SeKind::Robust { "robust" } else { "classical" },
            if o.controls { "YES" } else { "NO" },
            match (c.period_average, o.year_dummies) {
                (true, _) => "period",
                (false, true) => "year",
                (false, false) => "none",
            },
            if c.period_average { "period-averaged" } else { "annual" },
        ));
        out.push(Artifact::new(c.file.clone(), c.table.to_csv()));
    }
    out.push(Artifact::new("sensitivity/index.csv", index));
    out
}

// ------------------------------------------------------------------ report

/// Everything the full pipeline computes.
pub struct FullRun {
    pub prepared: Prepared,
    pub factors: FactorStage,
    pub regress: RegressStage,
    pub tests: Vec<TestResult>,
    pub cluster: ClusterStage,
    pub sensitivity: Vec<SensitivityCell>,
}

pub fn run_all(cfg: &PipelineConfig, seed: u64) -> Result<FullRun> {
    let prepared = load(cfg)?;
    let base = RegressOptions::from_config(cfg);
    let cfa = run_factors(cfg, &prepared, FactorMode::Cfa)?;
    let efa = if cfg.sensitivity.efa || base.mode == FactorMode::Efa {
        Some(run_factors(cfg, &prepared, FactorMode::Efa)?)
    } else {
        None
    };
    let main = match base.mode {
        FactorMode::Cfa => &cfa,
        FactorMode::Efa => efa.as_ref().expect("efa computed"),
    };
    let regress_stage = regress(cfg, &main.data, main.factor_names(), base, "Capacity factors and GDP per capita")?;
    let tests = diagnostics(&regress_stage, &main.data);
    let cluster_stage = cluster(cfg, &cfa, seed)?;
    let sensitivity = sensitivity(cfg, &prepared, &cfa, efa.as_ref())?;
    let factors = match base.mode {
        FactorMode::Cfa => cfa,
        FactorMode::Efa => efa.expect("efa computed"),
    };
    Ok(FullRun {
        prepared,
        factors,
        regress: regress_stage,
        tests,
        cluster: cluster_stage,
        sensitivity,
    })
}

/// All tables of a full run in one markdown document.
pub fn report_markdown(run: &FullRun) -> String {
    let mut doc = String::from("# Capacity factor pipeline report\n\n");
    doc.push_str("## Descriptive statistics\n\n");
    doc.push_str(&report::describe_markdown(&panel::describe(&run.prepared.raw)));
    doc.push_str("\n## Factor loadings\n\n");
    for a in &run.factors.analyses {
        doc.push_str(&format!("### {}\n\n{}\n", a.group, report::loadings_markdown(&a.model)));
    }
    doc.push_str("## Regression\n\n");
    doc.push_str(&run.regress.table.to_markdown());
    doc.push_str("\n## Specification tests\n\n");
    doc.push_str(&report::diagnostics_markdown(&run.tests));
    doc.push_str("\n## Elbow diagnostics\n\n");
    doc.push_str(&report::elbow_markdown(&run.cluster.elbow));
    doc.push_str("\n## Cluster summary\n\n");
    doc.push_str(&report::cluster_summary_markdown(&run.cluster.summary));
    doc.push_str("\n## Sensitivity\n\n");
    for c in &run.sensitivity {
        doc.push_str(&c.table.to_markdown());
        doc.push('\n');
    }
    doc
}

pub fn all_artifacts(run: &FullRun) -> Result<Vec<Artifact>> {
    let mut out = ingest_artifacts(&run.prepared);
    out.extend(factor_artifacts(&run.factors, &run.prepared)?);
    out.extend(regress_artifacts(&run.regress, &run.tests));
    out.extend(cluster_artifacts(&run.cluster));
    out.extend(sensitivity_artifacts(&run.sensitivity));
    out.push(Artifact::new("report.md", report_markdown(run)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("Technological Capacity"), "technological_capacity");
        assert_eq!(slug("  Public  policy (x) "), "public_policy_x");
    }

    #[test]
    fn grid_levels() {
        assert_eq!(levels(true, false, true), vec![true, false]);
        assert_eq!(levels(true, false, false), vec![true]);
        assert_eq!(levels(1, 1, true), vec![1]);
    }

    #[test]
    fn cell_names_are_distinct() {
        let mut names = std::collections::HashSet::new();
        for mode in [FactorMode::Cfa, FactorMode::Efa] {
            for se in [SeKind::Robust, SeKind::Classical] {
                for controls in [true, false] {
                    for year_dummies in [true, false] {
                        names.insert(cell_name(&RegressOptions {
                            mode,
                            se,
                            controls,
                            year_dummies,
                        }));
                    }
                }
            }
        }
        assert_eq!(names.len(), 16);
    }
}
