//! Report assembly and emission. JSON floats use serde_json's shortest round-trip
//! form; non-finite values become `null`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Columns of the case CSV, in order.
pub const CASE_COLUMNS: [&str; 8] = ["id", "kind", "lhs", "rhs", "residual", "tolerance", "pass", "error"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    /// `|lhs − rhs| ≤ tolerance`
    Equality,
    /// `lhs − rhs ≤ tolerance`
    UpperBound,
    /// `rhs − lhs ≤ tolerance`
    LowerBound,
    /// Reported value with no verdict.
    Diagnostic,
}

impl CaseKind {
    fn name(self) -> &'static str {
        match self {
            CaseKind::Equality => "equality",
            CaseKind::UpperBound => "upper_bound",
            CaseKind::LowerBound => "lower_bound",
            CaseKind::Diagnostic => "diagnostic",
        }
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub id: String,
    pub kind: CaseKind,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    /// `None` for diagnostics.
    pub pass: Option<bool>,
    pub error: Option<String>,
}

impl Case {
    fn judged(id: impl Into<String>, kind: CaseKind, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let residual = match kind {
            CaseKind::Equality => (lhs - rhs).abs(),
            CaseKind::UpperBound => lhs - rhs,
            CaseKind::LowerBound => rhs - lhs,
            CaseKind::Diagnostic => (lhs - rhs).abs(),
        };
        let pass = (kind != CaseKind::Diagnostic).then_some(residual <= tolerance);
        Self {
            id: id.into(),
            kind,
            lhs: finite(lhs),
            rhs: finite(rhs),
            residual: finite(residual),
            tolerance: (kind != CaseKind::Diagnostic).then_some(tolerance),
            pass,
            error: None,
        }
    }

    pub fn equality(id: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::judged(id, CaseKind::Equality, lhs, rhs, tolerance)
    }

    /// `value ≤ bound + tolerance`
    pub fn at_most(id: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        Self::judged(id, CaseKind::UpperBound, value, bound, tolerance)
    }

    /// `value ≥ bound − tolerance`
    pub fn at_least(id: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        Self::judged(id, CaseKind::LowerBound, value, bound, tolerance)
    }

    pub fn diagnostic(id: impl Into<String>, value: f64) -> Self {
        Self::judged(id, CaseKind::Diagnostic, value, 0.0, 0.0)
    }

    /// A case whose computation failed; it counts as a failure.
    pub fn failed(id: impl Into<String>, kind: CaseKind, tolerance: Option<f64>, error: impl ToString) -> Self {
        Self {
            id: id.into(),
            kind,
            lhs: None,
            rhs: None,
            residual: None,
            tolerance,
            pass: Some(false),
            error: Some(error.to_string()),
        }
    }

    /// A case from a fallible computation of `(lhs, rhs)`.
    pub fn from_result(
        id: impl Into<String>,
        kind: CaseKind,
        tolerance: f64,
        value: Result<(f64, f64), hsb_core::Error>,
    ) -> Self {
        match value {
            Ok((lhs, rhs)) => Self::judged(id, kind, lhs, rhs, tolerance),
            Err(e) => Self::failed(id, kind, Some(tolerance), e),
        }
    }

    pub fn passed(&self) -> bool {
        self.pass != Some(false)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub diagnostic: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub tool_version: String,
    pub config_hash: String,
    pub model: String,
    pub experiment: String,
    pub seed: u64,
    /// Every random draw comes from this counter-based generator keyed by the seed.
    pub generator: String,
}

/// Plot-ready numeric table; missing values are `null` in JSON and empty in CSV.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(columns: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row.into_iter().map(finite).collect());
    }

    pub fn push_optional(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row.into_iter().map(|x| x.and_then(finite)).collect());
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub header: Header,
    pub cases: Vec<Case>,
    pub summary: Summary,
    /// Experiment-specific structured output, keyed by name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tables: BTreeMap<String, Table>,
}

impl Report {
    pub fn new(header: Header) -> Self {
        Self { header, cases: Vec::new(), summary: Summary::default(), details: BTreeMap::new(), tables: BTreeMap::new() }
    }

    pub fn push(&mut self, case: Case) {
        match case.pass {
            Some(true) => self.summary.pass += 1,
            Some(false) => self.summary.fail += 1,
            None => self.summary.diagnostic += 1,
        }
        self.cases.push(case);
    }

    pub fn extend(&mut self, cases: impl IntoIterator<Item = Case>) {
        for c in cases {
            self.push(c);
        }
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or_else(|e| serde_json::Value::String(e.to_string()));
        self.details.insert(key.to_string(), v);
    }

    pub fn all_pass(&self) -> bool {
        self.summary.fail == 0
    }

    pub fn case(&self, id: &str) -> Option<&Case> {
        self.cases.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("report: {e}")))
    }

    pub fn cases_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CASE_COLUMNS)?;
        for c in &self.cases {
            w.write_record([
                c.id.clone(),
                c.kind.name().to_string(),
                number(c.lhs),
                number(c.rhs),
                number(c.residual),
                number(c.tolerance),
                c.pass.map_or(String::new(), |p| p.to_string()),
                c.error.clone().unwrap_or_default(),
            ])?;
        }
        finish(w)
    }

    pub fn write_json(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.to_json())
    }

    /// Writes the case table to `path` and each sample table next to it as `<stem>.<name>.csv`.
    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.cases_csv()?)?;
        for (name, table) in &self.tables {
            write_file(&sibling(path, name), &table_csv(table)?)?;
        }
        Ok(())
    }
}

/// Shortest round-trip decimal, empty when missing.
pub fn number(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:?}"))
}

pub fn table_csv(table: &Table) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|x| number(*x)))?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn sibling(path: &Path, name: &str) -> std::path::PathBuf {
    let stem = path.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{name}.csv"))
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    let mut f = fs::File::create(path).map_err(CliError::io(path))?;
    f.write_all(text.as_bytes()).map_err(CliError::io(path))
}
