//! CSV and markdown renderings of every result table.

use std::fmt::Write;

use crate::cluster::{ClusterSummary, ElbowTable};
use crate::diagnostics::TestResult;
use crate::estimators::{FitResult, VcovKind};
use crate::factor::{FactorModel, KmoResult, HIGH_LOADING};
use crate::panel::SummaryRow;

pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn md_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn md_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = md_row(header);
    out.push_str(&md_row(&vec!["---".to_string(); header.len()]));
    for r in rows {
        out.push_str(&md_row(r));
    }
    out
}

fn csv_table(header: &[String], rows: &[Vec<String>]) -> String {
    let line = |r: &[String]| r.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",") + "\n";
    let mut out = line(header);
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

// ---------------------------------------------------------------- describe

fn describe_rows(rows: &[SummaryRow]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = strings(&["variable", "n", "mean", "sd", "min", "max"]);
    let body = rows
        .iter()
        .map(|r| {
            vec![
                r.code.clone(),
                r.n.to_string(),
                format!("{:.4}", r.mean),
                format!("{:.4}", r.sd),
                format!("{:.4}", r.min),
                format!("{:.4}", r.max),
            ]
        })
        .collect();
    (header, body)
}

pub fn describe_csv(rows: &[SummaryRow]) -> String {
    let (h, b) = describe_rows(rows);
    csv_table(&h, &b)
}

pub fn describe_markdown(rows: &[SummaryRow]) -> String {
    let (h, b) = describe_rows(rows);
    md_table(&h, &b)
}

// ---------------------------------------------------------------- factors

fn loading_rows(model: &FactorModel, bold: bool) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["variable".to_string()];
    header.extend(model.names.iter().cloned());
    header.push("uniqueness".into());
    let comm = model.communalities();
    let mut body: Vec<Vec<String>> = model
        .codes
        .iter()
        .enumerate()
        .map(|(i, code)| {
            let mut row = vec![code.clone()];
            for j in 0..model.n_factors() {
                let l = model.loadings[(i, j)];
                let cell = format!("{l:.4}");
                row.push(if bold && l.abs() >= HIGH_LOADING { format!("**{cell}**") } else { cell });
            }
            row.push(format!("{:.4}", 1.0 - comm[i]));
            row
        })
        .collect();
    let mut ss = vec!["sum of squares".to_string()];
    for j in 0..model.n_factors() {
        ss.push(format!("{:.4}", model.loadings.column(j).norm_squared()));
    }
    ss.push(String::new());
    body.push(ss);
    (header, body)
}

/// Rotated loadings with uniqueness and per-factor sums of squares.
pub fn loadings_csv(model: &FactorModel) -> String {
    let (h, b) = loading_rows(model, false);
    csv_table(&h, &b)
}

/// As [`loadings_csv`], with high loadings in bold.
pub fn loadings_markdown(model: &FactorModel) -> String {
    let (h, b) = loading_rows(model, true);
    md_table(&h, &b)
}

pub fn scree_csv(model: &FactorModel) -> String {
    let mut out = String::from("number,eigenvalue\n");
    for (k, e) in model.scree() {
        let _ = writeln!(out, "{k},{e}");
    }
    out
}

fn kmo_rows(group: &str, kmo: &KmoResult) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = kmo
        .per_variable
        .iter()
        .map(|(c, v)| vec![group.to_string(), c.clone(), format!("{v:.4}")])
        .collect();
    rows.push(vec![group.to_string(), "overall".into(), format!("{:.4}", kmo.overall)]);
    rows
}

/// One block per group: per-variable KMO and the overall value.
pub fn kmo_csv(entries: &[(String, KmoResult)]) -> String {
    let rows: Vec<Vec<String>> = entries.iter().flat_map(|(g, k)| kmo_rows(g, k)).collect();
    csv_table(&strings(&["group", "variable", "kmo"]), &rows)
}

// ---------------------------------------------------------------- regression

/// Side-by-side regression columns in the layout of a journal results table.
#[derive(Debug, Clone)]
pub struct RegressionTable {
    pub title: String,
    pub columns: Vec<(String, FitResult)>,
    pub controls: bool,
    pub year_effects: bool,
}

impl RegressionTable {
    fn row_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for (_, fit) in &self.columns {
            for n in &fit.names {
                if !names.contains(n) {
                    names.push(n.clone());
                }
            }
        }
        // constant always last
        if let Some(pos) = names.iter().position(|n| n == crate::estimators::CONSTANT) {
            let c = names.remove(pos);
            names.push(c);
        }
        names
    }

    fn robust(&self) -> bool {
        self.columns.iter().any(|(_, f)| f.vcov_kind != VcovKind::Classical)
    }

    fn yes_no(b: bool) -> String {
        if b { "YES" } else { "NO" }.to_string()
    }

    fn cells(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let mut header = vec!["variable".to_string()];
        header.extend(self.columns.iter().map(|(h, _)| h.clone()));
        let mut rows = Vec::new();
        for name in self.row_names() {
            let mut coef = vec![name.clone()];
            let mut se = vec![String::new()];
            for (_, fit) in &self.columns {
                match fit.index(&name) {
                    Some(i) => {
                        coef.push(format!("{:.4}{}", fit.coefficients[i], stars(fit.p_value(i))));
                        se.push(format!("({:.4})", fit.std_errors[i]));
                    }
                    None => {
                        coef.push(String::new());
                        se.push(String::new());
                    }
                }
            }
            rows.push(coef);
            rows.push(se);
        }
        let footer = |label: &str, f: &dyn Fn(&FitResult) -> String| {
            let mut r = vec![label.to_string()];
            r.extend(self.columns.iter().map(|(_, fit)| f(fit)));
            r
        };
        rows.push(footer("Controls", &|_| Self::yes_no(self.controls)));
        rows.push(footer("Year Effects", &|_| Self::yes_no(self.year_effects)));
        rows.push(footer("Country Fixed Effects", &|f| {
            Self::yes_no(f.estimator == crate::estimators::Estimator::FixedEffects)
        }));
        rows.push(footer("Observations", &|f| f.n_obs.to_string()));
        rows.push(footer("Number of countries", &|f| f.n_countries.to_string()));
        rows.push(footer("R-squared", &|f| format!("{:.3}", f.r_squared)));
        rows.push(footer("R-squared kind", &|f| f.r_squared_kind.label().to_string()));
        rows.push(footer("Standard errors", &|f| {
            match f.vcov_kind {
                VcovKind::Classical => "classical",
                VcovKind::Hc1 => "HC1",
                VcovKind::ClusterCountry => "clustered by country",
            }
            .to_string()
        }));
        (header, rows)
    }

    pub fn note(&self) -> String {
        let se = if self.robust() { "Robust standard errors" } else { "Standard errors" };
        format!("{se} in parentheses. *** p<0.01, ** p<0.05, * p<0.1")
    }

    pub fn to_csv(&self) -> String {
        let (h, b) = self.cells();
        csv_table(&h, &b)
    }

    pub fn to_markdown(&self) -> String {
        let (h, b) = self.cells();
        format!("### {}\n\n{}\n{}\n", self.title, md_table(&h, &b), self.note())
    }
}

// ---------------------------------------------------------------- diagnostics

fn diag_rows(tests: &[TestResult]) -> Vec<Vec<String>> {
    tests
        .iter()
        .map(|t| {
            vec![
                t.name.clone(),
                format!("{:.4}", t.statistic),
                t.df.to_string(),
                format!("{:.4}", t.p_value),
                t.verdict.clone(),
            ]
        })
        .collect()
}

const DIAG_HEADER: [&str; 5] = ["test", "statistic", "df", "p_value", "verdict"];

pub fn diagnostics_csv(tests: &[TestResult]) -> String {
    csv_table(&strings(&DIAG_HEADER), &diag_rows(tests))
}

pub fn diagnostics_markdown(tests: &[TestResult]) -> String {
    md_table(&strings(&DIAG_HEADER), &diag_rows(tests))
}

// ---------------------------------------------------------------- clusters

fn elbow_rows(table: &ElbowTable) -> Vec<Vec<String>> {
    table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                format!("{:.8}", r.wss),
                format!("{:.8}", r.log_wss),
                format!("{:.8}", r.eta2),
                r.pre.map_or(".".to_string(), |p| format!("{p:.8}")),
            ]
        })
        .collect()
}

const ELBOW_HEADER: [&str; 5] = ["k", "WSS", "log(WSS)", "eta-squared", "PRE"];

/// Elbow table; PRE of the first row is printed as `.`.
pub fn elbow_csv(table: &ElbowTable) -> String {
    csv_table(&strings(&ELBOW_HEADER), &elbow_rows(table))
}

pub fn elbow_markdown(table: &ElbowTable) -> String {
    md_table(&strings(&ELBOW_HEADER), &elbow_rows(table))
}

fn cluster_name(c: &crate::cluster::ClusterStats) -> String {
    c.label.clone().unwrap_or_else(|| format!("cluster {}", c.id + 1))
}

/// Cluster → member list, in summary order.
pub fn membership_csv(summary: &ClusterSummary, countries: &[String]) -> String {
    let rows: Vec<Vec<String>> = summary
        .clusters
        .iter()
        .map(|c| {
            vec![
                (c.id + 1).to_string(),
                cluster_name(c),
                c.n().to_string(),
                c.members.iter().map(|&m| countries[m].clone()).collect::<Vec<_>>().join(" "),
            ]
        })
        .collect();
    csv_table(&strings(&["cluster", "label", "n", "countries"]), &rows)
}

fn summary_cells(summary: &ClusterSummary) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = strings(&["cluster", "label", "n"]);
    for f in &summary.factor_names {
        for s in ["mean", "sd", "min", "max"] {
            header.push(format!("{f}_{s}"));
        }
    }
    header.push("total_score".into());
    header.extend(summary.extra_names.iter().map(|e| format!("{e}_mean")));
    let rows = summary
        .clusters
        .iter()
        .map(|c| {
            let mut r = vec![(c.id + 1).to_string(), cluster_name(c), c.n().to_string()];
            for f in &c.factors {
                r.extend([f.mean, f.sd, f.min, f.max].iter().map(|v| format!("{v:.4}")));
            }
            r.push(format!("{:.4}", c.total_score));
            r.extend(c.extras.iter().map(|v| format!("{v:.4}")));
            r
        })
        .collect();
    (header, rows)
}

pub fn cluster_summary_csv(summary: &ClusterSummary) -> String {
    let (h, b) = summary_cells(summary);
    csv_table(&h, &b)
}

pub fn cluster_summary_markdown(summary: &ClusterSummary) -> String {
    let mut header = strings(&["cluster", "n"]);
    header.extend(summary.factor_names.iter().cloned());
    header.push("total".into());
    header.extend(summary.extra_names.iter().cloned());
    let rows: Vec<Vec<String>> = summary
        .clusters
        .iter()
        .map(|c| {
            let mut r = vec![cluster_name(c), c.n().to_string()];
            r.extend(c.factors.iter().map(|f| format!("{:.3}", f.mean)));
            r.push(format!("{:.3}", c.total_score));
            r.extend(c.extras.iter().map(|v| format!("{v:.3}")));
            r
        })
        .collect();
    md_table(&header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::diagnostics_from_wss;

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.009), "***");
        assert_eq!(stars(0.01), "**");
        assert_eq!(stars(0.049), "**");
        assert_eq!(stars(0.05), "*");
        assert_eq!(stars(0.1), "");
    }

    #[test]
    fn elbow_header_and_undefined_pre() {
        let t = diagnostics_from_wss(&[4.0, 2.0], 4.0).unwrap();
        let csv = elbow_csv(&t);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("k,WSS,log(WSS),eta-squared,PRE"));
        assert!(lines.next().unwrap().ends_with(",."));
        assert!(lines.next().unwrap().ends_with(",0.50000000"));
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
