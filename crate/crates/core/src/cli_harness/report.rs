//! Run reports and CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::config::ScenarioConfig;

/// One pass/fail check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    /// Check name.
    pub name: String,
    /// Measured value.
    pub value: f64,
    /// Threshold the value is compared against.
    pub threshold: f64,
    /// Outcome.
    pub pass: bool,
}

impl Check {
    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value <= threshold }
    }

    /// Passes when `value > threshold`.
    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value > threshold }
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value >= threshold }
    }
}

/// A table cell: integers are written verbatim, floats with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    /// Integer value.
    Int(i64),
    /// Floating-point value.
    Float(f64),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Int(i64::from(x))
    }
}

/// Formats a float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// A named numeric table with a fixed column order.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    /// Table name (also the CSV file stem).
    pub name: String,
    /// Column names.
    pub columns: Vec<String>,
    /// Rows, each with one cell per column.
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// Empty table with the given columns.
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// Appends a row; panics if its length does not match the header.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header of table {}", self.name);
        self.rows.push(row);
    }

    /// CSV text with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(i) => i.to_string(),
                    Cell::Float(x) => format_float(*x),
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Result of one subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// Subcommand name.
    pub command: String,
    /// Echo of the validated configuration.
    pub config: ScenarioConfig,
    /// Seed in effect.
    pub seed: u64,
    /// Pass/fail checks.
    pub checks: Vec<Check>,
    /// `true` when every check passed.
    pub passed: bool,
    /// Scalar and structured metrics.
    pub metrics: serde_json::Value,
    /// Tables (written as CSV files or embedded in the JSON report).
    #[serde(skip)]
    pub tables: Vec<Table>,
    /// Wall-clock timings in seconds; reported on stdout only so that output
    /// files are byte-identical across runs.
    #[serde(skip)]
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    /// New report for a command.
    pub fn new(command: &str, config: &ScenarioConfig, seed: u64) -> Self {
        Self {
            command: command.into(),
            config: config.clone(),
            seed,
            checks: Vec::new(),
            passed: true,
            metrics: serde_json::Value::Object(Default::default()),
            tables: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    /// Records a check.
    pub fn check(&mut self, c: Check) {
        self.passed &= c.pass;
        self.checks.push(c);
    }

    /// Sets a metric.
    pub fn metric<T: Serialize>(&mut self, key: &str, value: T) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        if let serde_json::Value::Object(m) = &mut self.metrics {
            m.insert(key.into(), v);
        }
    }

    /// Summary without tables.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }

    /// Full report with tables embedded.
    pub fn full_json(&self) -> serde_json::Value {
        let mut v = self.summary_json();
        if let serde_json::Value::Object(m) = &mut v {
            m.insert("tables".into(), serde_json::to_value(&self.tables).unwrap_or(serde_json::Value::Null));
        }
        v
    }

    /// Summary plus timings, for stdout.
    pub fn stdout_json(&self) -> serde_json::Value {
        let mut v = self.summary_json();
        if let serde_json::Value::Object(m) = &mut v {
            m.insert("timings".into(), serde_json::to_value(&self.timings).unwrap_or(serde_json::Value::Null));
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_seventeen_significant_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.0), "-2.0000000000000000e0");
        let x: f64 = format_float(std::f64::consts::PI).parse().unwrap();
        assert_eq!(x, std::f64::consts::PI);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut t = Table::new("t", &["k", "x"]);
        t.push(vec![3usize.into(), 0.5.into()]);
        assert_eq!(t.to_csv(), "k,x\n3,5.0000000000000000e-1\n");
    }

    #[test]
    fn failed_check_marks_report() {
        let mut r = RunReport::new("x", &ScenarioConfig::default(), 0);
        r.check(Check::at_most("a", 1.0, 2.0));
        assert!(r.passed);
        r.check(Check::above("b", 0.0, 0.0));
        assert!(!r.passed);
    }
}
