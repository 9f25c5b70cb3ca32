//! Balanced country-year panel: loading, validation, transforms and
//! descriptive statistics.
//!
//! Rows are always stored country-major, year-minor: row `i * T + t` holds
//! country `i` in year `t`. Everything downstream relies on this layout.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

pub const COUNTRY_COLUMN: &str = "countrycode";
pub const YEAR_COLUMN: &str = "timecode";

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unbalanced panel: no row for country `{country}` in {year}")]
    UnbalancedPanel { country: String, year: i32 },
    #[error("non-numeric cell in column `{column}` at line {line}: {value:?}")]
    NonNumericCell {
        column: String,
        line: u64,
        value: String,
    },
    #[error("duplicate row for country `{country}` in {year}")]
    DuplicateRow { country: String, year: i32 },
    #[error("column `{column}` has a non-positive value {value} ({country}, {year})")]
    NonPositiveValue {
        column: String,
        country: String,
        year: i32,
        value: f64,
    },
    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("empty averaging window {0}..={1}")]
    EmptyWindow(i32, i32),
    #[error("window {0}..={1} is outside the panel years")]
    YearOutOfRange(i32, i32),
    #[error("column `{0}` already exists")]
    DuplicateColumn(String),
    #[error("column `{column}` has length {len}, expected {expected}")]
    LengthMismatch {
        column: String,
        len: usize,
        expected: usize,
    },
    #[error("panel has no rows")]
    Empty,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PanelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Capacity,
    Control,
    Outcome,
    Identifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transform {
    None,
    Log,
    Standardize,
    LogThenStandardize,
}

/// Declared role of one input column.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableMeta {
    pub code: String,
    pub role: Role,
    pub capacity_group: Option<String>,
    pub transform: Transform,
}

impl VariableMeta {
    pub fn new(code: impl Into<String>, role: Role) -> Self {
        Self {
            code: code.into(),
            role,
            capacity_group: None,
            transform: Transform::None,
        }
    }

    pub fn capacity(code: impl Into<String>, group: impl Into<String>) -> Self {
        Self {
            capacity_group: Some(group.into()),
            ..Self::new(code, Role::Capacity)
        }
    }
}

/// An aggregation window over panel years, both ends inclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YearWindow {
    pub start: i32,
    pub end: i32,
    pub label: String,
}

impl YearWindow {
    /// Window labelled `start-yy`, e.g. `2015-19`.
    pub fn new(start: i32, end: i32) -> Self {
        Self {
            start,
            end,
            label: format!("{start}-{:02}", end.rem_euclid(100)),
        }
    }

    pub fn labelled(start: i32, end: i32, label: impl Into<String>) -> Self {
        Self {
            start,
            end,
            label: label.into(),
        }
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }
}

/// The five-year windows used for period averaging; labels follow the
/// `2005-10 / 2010-15 / 2015-19` convention.
pub fn default_windows() -> Vec<YearWindow> {
    vec![
        YearWindow::labelled(2005, 2009, "2005-10"),
        YearWindow::labelled(2010, 2014, "2010-15"),
        YearWindow::labelled(2015, 2019, "2015-19"),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub code: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

/// Balanced country×year table of numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    countries: Vec<String>,
    years: Vec<i32>,
    /// Optional display label per time point (period-averaged panels).
    period_labels: Option<Vec<String>>,
    columns: BTreeMap<String, Vec<f64>>,
    /// Column insertion order, used for output.
    order: Vec<String>,
}

impl PanelDataset {
    /// Builds a panel from already-ordered data. Countries and years are
    /// sorted; the column vectors must follow the matching country-major
    /// layout.
    pub fn new(countries: Vec<String>, years: Vec<i32>) -> Self {
        Self {
            countries,
            years,
            period_labels: None,
            columns: BTreeMap::new(),
            order: Vec::new(),
        }
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn period_labels(&self) -> Option<&[String]> {
        self.period_labels.as_deref()
    }

    /// Label for time index `t`: the period label when present, else the year.
    pub fn time_label(&self, t: usize) -> String {
        match &self.period_labels {
            Some(labels) => labels[t].clone(),
            None => self.years[t].to_string(),
        }
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn n_rows(&self) -> usize {
        self.countries.len() * self.years.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.order
    }

    pub fn has_column(&self, code: &str) -> bool {
        self.columns.contains_key(code)
    }

    pub fn column(&self, code: &str) -> Result<&[f64]> {
        self.columns
            .get(code)
            .map(Vec::as_slice)
            .ok_or_else(|| PanelError::MissingColumn(code.to_string()))
    }

    pub fn country_of_row(&self, row: usize) -> usize {
        row / self.years.len()
    }

    pub fn year_of_row(&self, row: usize) -> usize {
        row % self.years.len()
    }

    /// Adds a column, failing if the code is taken or the length is wrong.
    pub fn insert_column(&mut self, code: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let code = code.into();
        if self.columns.contains_key(&code) {
            return Err(PanelError::DuplicateColumn(code));
        }
        if values.len() != self.n_rows() {
            return Err(PanelError::LengthMismatch {
                column: code,
                len: values.len(),
                expected: self.n_rows(),
            });
        }
        self.order.push(code.clone());
        self.columns.insert(code, values);
        Ok(())
    }

    /// Returns a copy with the column added (or replaced).
    pub fn with_column(&self, code: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let code = code.into();
        let mut out = self.clone();
        if out.columns.contains_key(&code) {
            if values.len() != out.n_rows() {
                return Err(PanelError::LengthMismatch {
                    column: code,
                    len: values.len(),
                    expected: out.n_rows(),
                });
            }
            out.columns.insert(code, values);
        } else {
            out.insert_column(code, values)?;
        }
        Ok(out)
    }

    /// Keeps only the listed columns, in the listed order.
    pub fn select(&self, codes: &[&str]) -> Result<Self> {
        let mut out = Self {
            countries: self.countries.clone(),
            years: self.years.clone(),
            period_labels: self.period_labels.clone(),
            columns: BTreeMap::new(),
            order: Vec::new(),
        };
        for code in codes {
            out.insert_column(*code, self.column(code)?.to_vec())?;
        }
        Ok(out)
    }

    /// Per-country values of a column, one slice per country.
    pub fn by_country<'a>(&'a self, code: &str) -> Result<impl Iterator<Item = &'a [f64]> + 'a> {
        let t = self.n_years();
        Ok(self.column(code)?.chunks(t))
    }
}

fn parse_number(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a panel from CSV. Only the schema's columns are kept (identifier
/// roles are skipped since they are the key columns themselves).
pub fn load_csv(path: impl AsRef<Path>, schema: &[VariableMeta]) -> Result<PanelDataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &[VariableMeta]) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index_of = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PanelError::MissingColumn(name.to_string()))
    };
    let country_idx = index_of(COUNTRY_COLUMN)?;
    let year_idx = index_of(YEAR_COLUMN)?;
    let wanted: Vec<&VariableMeta> = schema
        .iter()
        .filter(|m| m.role != Role::Identifier)
        .collect();
    let col_idx = wanted
        .iter()
        .map(|m| index_of(&m.code))
        .collect::<Result<Vec<_>>>()?;

    let mut rows: HashMap<(String, i32), Vec<f64>> = HashMap::new();
    let mut countries = BTreeSet::new();
    let mut years = BTreeSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let country = record.get(country_idx).unwrap_or("").to_string();
        let year_raw = record.get(year_idx).unwrap_or("");
        let year: i32 = year_raw
            .trim()
            .parse()
            .map_err(|_| PanelError::NonNumericCell {
                column: YEAR_COLUMN.to_string(),
                line,
                value: year_raw.to_string(),
            })?;
        let mut values = Vec::with_capacity(col_idx.len());
        for (meta, &idx) in wanted.iter().zip(&col_idx) {
            let raw = record.get(idx).unwrap_or("");
            let v = parse_number(raw).ok_or_else(|| PanelError::NonNumericCell {
                column: meta.code.clone(),
                line,
                value: raw.to_string(),
            })?;
            values.push(v);
        }
        countries.insert(country.clone());
        years.insert(year);
        if rows.insert((country.clone(), year), values).is_some() {
            return Err(PanelError::DuplicateRow { country, year });
        }
    }
    if rows.is_empty() {
        return Err(PanelError::Empty);
    }

    let countries: Vec<String> = countries.into_iter().collect();
    let years: Vec<i32> = years.into_iter().collect();
    let mut data: Vec<Vec<f64>> = vec![Vec::with_capacity(rows.len()); wanted.len()];
    for c in &countries {
        for &y in &years {
            let row = rows
                .get(&(c.clone(), y))
                .ok_or_else(|| PanelError::UnbalancedPanel {
                    country: c.clone(),
                    year: y,
                })?;
            for (col, &v) in data.iter_mut().zip(row) {
                col.push(v);
            }
        }
    }
    let mut panel = PanelDataset::new(countries, years);
    for (meta, values) in wanted.iter().zip(data) {
        panel.insert_column(meta.code.clone(), values)?;
    }
    Ok(panel)
}

/// Writes the panel as CSV with `countrycode,timecode` leading columns.
/// Values use the shortest round-trip decimal representation.
pub fn write_csv<W: Write>(data: &PanelDataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![COUNTRY_COLUMN.to_string(), YEAR_COLUMN.to_string()];
    header.extend(data.order.iter().cloned());
    wtr.write_record(&header)?;
    let cols: Vec<&Vec<f64>> = data.order.iter().map(|c| &data.columns[c]).collect();
    for (i, country) in data.countries.iter().enumerate() {
        for (t, year) in data.years.iter().enumerate() {
            let row = i * data.n_years() + t;
            let mut record = vec![country.clone(), year.to_string()];
            record.extend(cols.iter().map(|c| c[row].to_string()));
            wtr.write_record(&record)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Adds `log_<code>` holding the natural log of a strictly positive column.
pub fn log_transform(data: &PanelDataset, code: &str) -> Result<PanelDataset> {
    let values = data.column(code)?;
    if let Some((row, &v)) = values.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(PanelError::NonPositiveValue {
            column: code.to_string(),
            country: data.countries[data.country_of_row(row)].clone(),
            year: data.years[data.year_of_row(row)],
            value: v,
        });
    }
    let logged = values.iter().map(|v| v.ln()).collect();
    data.with_column(format!("log_{code}"), logged)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 divisor), two-pass.
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Pooled z-scores with the sample SD.
pub fn zscores(code: &str, values: &[f64]) -> Result<Vec<f64>> {
    let m = mean(values);
    let sd = sample_sd(values);
    if !(sd > 0.0) || sd <= 1e-14 * m.abs() {
        return Err(PanelError::ZeroVariance(code.to_string()));
    }
    Ok(values.iter().map(|v| (v - m) / sd).collect())
}

/// Replaces a column by its pooled z-scores.
pub fn standardize(data: &PanelDataset, code: &str) -> Result<PanelDataset> {
    let z = zscores(code, data.column(code)?)?;
    data.with_column(code.to_string(), z)
}

/// Applies each schema entry's transform. `Log` adds `log_<code>` next to
/// the raw column; `Standardize` replaces the column by its z-scores;
/// `LogThenStandardize` adds a standardized `log_<code>`.
pub fn apply_transforms(data: &PanelDataset, schema: &[VariableMeta]) -> Result<PanelDataset> {
    let mut out = data.clone();
    for meta in schema {
        let code = meta.code.as_str();
        out = match meta.transform {
            Transform::None => continue,
            Transform::Log => log_transform(&out, code)?,
            Transform::Standardize => standardize(&out, code)?,
            Transform::LogThenStandardize => {
                let logged = log_transform(&out, code)?;
                standardize(&logged, &format!("log_{code}"))?
            }
        };
    }
    Ok(out)
}

/// Averages every column over each window: one row per country per window.
/// The result's time axis is the window start years, labelled by window.
pub fn period_average(data: &PanelDataset, windows: &[YearWindow]) -> Result<PanelDataset> {
    let first = *data.years.first().ok_or(PanelError::Empty)?;
    let last = *data.years.last().ok_or(PanelError::Empty)?;
    let mut members: Vec<Vec<usize>> = Vec::with_capacity(windows.len());
    for w in windows {
        if w.end < w.start {
            return Err(PanelError::EmptyWindow(w.start, w.end));
        }
        if w.start < first || w.end > last {
            return Err(PanelError::YearOutOfRange(w.start, w.end));
        }
        let idx: Vec<usize> = data
            .years
            .iter()
            .enumerate()
            .filter(|(_, y)| w.contains(**y))
            .map(|(t, _)| t)
            .collect();
        if idx.is_empty() {
            return Err(PanelError::EmptyWindow(w.start, w.end));
        }
        members.push(idx);
    }

    let t_in = data.n_years();
    let mut out = PanelDataset::new(
        data.countries.clone(),
        windows.iter().map(|w| w.start).collect(),
    );
    out.period_labels = Some(windows.iter().map(|w| w.label.clone()).collect());
    for code in &data.order {
        let col = &data.columns[code];
        let mut averaged = Vec::with_capacity(data.n_countries() * windows.len());
        for i in 0..data.n_countries() {
            for idx in &members {
                let s: f64 = idx.iter().map(|&t| col[i * t_in + t]).sum();
                averaged.push(s / idx.len() as f64);
            }
        }
        out.insert_column(code.clone(), averaged)?;
    }
    Ok(out)
}

pub fn summarize(code: &str, values: &[f64]) -> SummaryRow {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // clamp guards the min ≤ mean ≤ max ordering against summation round-off
    let mean = mean(values).clamp(min, max);
    SummaryRow {
        code: code.to_string(),
        n: values.len(),
        mean,
        sd: sample_sd(values),
        min,
        max,
    }
}

/// Descriptive statistics for every column, in column order.
pub fn describe(data: &PanelDataset) -> Vec<SummaryRow> {
    data.order
        .iter()
        .map(|code| summarize(code, &data.columns[code]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(codes: &[&str]) -> Vec<VariableMeta> {
        codes.iter().map(|c| VariableMeta::new(*c, Role::Control)).collect()
    }

    const SMALL: &str = "countrycode,timecode,x\nB,2001,4\nA,2001,2\nA,2000,1\nB,2000,3\n";

    #[test]
    fn transforms_follow_schema() {
        let p = read_csv(SMALL.as_bytes(), &schema(&["x"])).unwrap();
        let mut meta = VariableMeta::new("x", Role::Outcome);
        meta.transform = Transform::Log;
        let logged = apply_transforms(&p, &[meta.clone()]).unwrap();
        assert_eq!(logged.column("x").unwrap(), p.column("x").unwrap());
        assert_eq!(logged.column("log_x").unwrap()[1], 2f64.ln());
        meta.transform = Transform::Standardize;
        let z = apply_transforms(&p, &[meta.clone()]).unwrap();
        assert!(mean(z.column("x").unwrap()).abs() < 1e-15);
        assert!(!z.has_column("log_x"));
        meta.transform = Transform::LogThenStandardize;
        let lz = apply_transforms(&p, &[meta]).unwrap();
        assert!((sample_sd(lz.column("log_x").unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loads_minimal_balanced_panel_in_canonical_order() {
        let p = read_csv(SMALL.as_bytes(), &schema(&["x"])).unwrap();
        assert_eq!(p.countries(), &["A".to_string(), "B".to_string()]);
        assert_eq!(p.years(), &[2000, 2001]);
        assert_eq!(p.column("x").unwrap(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn missing_row_is_unbalanced() {
        let text = "countrycode,timecode,x\nB,2001,4\nA,2001,2\nA,2000,1\n";
        let err = read_csv(text.as_bytes(), &schema(&["x"])).unwrap_err();
        assert!(matches!(err, PanelError::UnbalancedPanel { ref country, year: 2000 } if country == "B"));
    }

    #[test]
    fn load_errors() {
        let err = read_csv(SMALL.as_bytes(), &schema(&["y"])).unwrap_err();
        assert!(matches!(err, PanelError::MissingColumn(c) if c == "y"));

        let dup = "countrycode,timecode,x\nA,2000,1\nA,2000,2\n";
        assert!(matches!(
            read_csv(dup.as_bytes(), &schema(&["x"])).unwrap_err(),
            PanelError::DuplicateRow { .. }
        ));

        let bad = "countrycode,timecode,x\nA,2000,abc\n";
        assert!(matches!(
            read_csv(bad.as_bytes(), &schema(&["x"])).unwrap_err(),
            PanelError::NonNumericCell { .. }
        ));

        let empty = "countrycode,timecode,x\nA,2000,\n";
        assert!(matches!(
            read_csv(empty.as_bytes(), &schema(&["x"])).unwrap_err(),
            PanelError::NonNumericCell { .. }
        ));
    }

    #[test]
    fn log_values() {
        let mut p = PanelDataset::new(vec!["A".into()], vec![2000, 2001, 2002]);
        p.insert_column("gdp", vec![208.07, 9350.75, 1.0]).unwrap();
        let out = log_transform(&p, "gdp").unwrap();
        let l = out.column("log_gdp").unwrap();
        assert!((l[0] - 5.34).abs() < 5e-3);
        assert!((l[1] - 9.14).abs() < 5e-3);
        assert_eq!(l[2], 0.0);
        assert_eq!(out.column("gdp").unwrap(), p.column("gdp").unwrap());
    }

    #[test]
    fn log_rejects_non_positive() {
        let mut p = PanelDataset::new(vec!["A".into()], vec![2000, 2001]);
        p.insert_column("gdp", vec![3.0, 0.0]).unwrap();
        let err = log_transform(&p, "gdp").unwrap_err();
        assert!(matches!(err, PanelError::NonPositiveValue { year: 2001, .. }));
    }

    #[test]
    fn standardize_triple_and_constant() {
        let mut p = PanelDataset::new(vec!["A".into()], vec![1, 2, 3]);
        p.insert_column("x", vec![2.0, 4.0, 6.0]).unwrap();
        p.insert_column("c", vec![5.0, 5.0, 5.0]).unwrap();
        let s = standardize(&p, "x").unwrap();
        assert_eq!(s.column("x").unwrap(), &[-1.0, 0.0, 1.0]);
        assert!(matches!(standardize(&p, "c"), Err(PanelError::ZeroVariance(_))));
    }

    #[test]
    fn period_average_windows() {
        let mut p = PanelDataset::new(vec!["A".into()], vec![2000, 2001, 2002, 2003]);
        p.insert_column("x", vec![1.0, 2.0, 3.0, 10.0]).unwrap();
        let avg = period_average(&p, &[YearWindow::new(2000, 2002), YearWindow::new(2003, 2003)]).unwrap();
        assert_eq!(avg.column("x").unwrap(), &[2.0, 10.0]);
        assert_eq!(avg.period_labels().unwrap(), &["2000-02".to_string(), "2003-03".to_string()]);
        assert!(matches!(
            period_average(&p, &[YearWindow::new(1999, 2001)]),
            Err(PanelError::YearOutOfRange(1999, 2001))
        ));
        assert!(matches!(
            period_average(&p, &[YearWindow::new(2002, 2001)]),
            Err(PanelError::EmptyWindow(..))
        ));
    }

    #[test]
    fn default_windows_give_three_rows_per_country() {
        let years: Vec<i32> = (2005..=2019).collect();
        let mut p = PanelDataset::new(vec!["A".into(), "B".into()], years);
        p.insert_column("x", (0..30).map(f64::from).collect()).unwrap();
        let avg = period_average(&p, &default_windows()).unwrap();
        assert_eq!(avg.n_years(), 3);
        assert_eq!(avg.n_rows(), 6);
        assert_eq!(avg.column("x").unwrap()[0], 2.0);
    }

    #[test]
    fn describe_constant_column() {
        let mut p = PanelDataset::new(vec!["A".into()], vec![1, 2, 3]);
        p.insert_column("c", vec![1.0, 1.0, 1.0]).unwrap();
        let d = describe(&p);
        assert_eq!(d[0], SummaryRow { code: "c".into(), n: 3, mean: 1.0, sd: 0.0, min: 1.0, max: 1.0 });
    }
}
