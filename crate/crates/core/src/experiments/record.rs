use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Relative slack granted to every inequality for floating-point rounding.
pub const CHECK_SLACK: f64 = 1e-9;

/// One logged inequality `lhs <= rhs` (or `lhs < rhs` when strict).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    /// Free-form coordinates of the check, e.g. `n=6 seed=3 k=2`.
    pub context: String,
    pub time: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
    pub holds: bool,
    /// Vacuous checks are logged but never fail a run.
    pub vacuous: bool,
}

impl InequalityCheck {
    pub fn new(name: &str, context: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let holds = lhs <= rhs + CHECK_SLACK * rhs.abs().max(1.0);
        Self {
            name: name.to_string(),
            context: context.into(),
            time: None,
            lhs,
            rhs,
            strict: false,
            holds,
            vacuous: false,
        }
    }

    pub fn strict(name: &str, context: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            strict: true,
            holds: lhs < rhs,
            ..Self::new(name, context, lhs, rhs)
        }
    }

    /// `lhs <= rhs` with no slack, for residuals compared to a fixed tolerance.
    pub fn exact(name: &str, context: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            holds: lhs <= rhs,
            ..Self::new(name, context, lhs, rhs)
        }
    }

    pub fn at(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn vacuous_if(mut self, v: bool) -> Self {
        self.vacuous = v;
        self
    }

    pub fn violated(&self) -> bool {
        !self.vacuous && !self.holds
    }
}

/// Rectangular numeric table written as CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|&x| format_number(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip decimal, switching to exponent form far from unity.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Everything an experiment run produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    pub seed: u64,
    pub config: Value,
    /// Named summary values.
    pub scalars: BTreeMap<String, f64>,
    pub tables: Vec<Table>,
    pub checks: Vec<InequalityCheck>,
    pub notes: Vec<String>,
    pub violations: usize,
    /// Index into `checks` of the first violated check.
    pub first_violation: Option<usize>,
    pub passed: bool,
}

impl RunRecord {
    pub fn new<C: Serialize>(experiment: &str, seed: u64, config: &C) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(|e| Error::Parameter(format!("config echo failed: {e}")))?;
        Ok(Self {
            experiment: experiment.to_string(),
            seed,
            config,
            scalars: BTreeMap::new(),
            tables: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            violations: 0,
            first_violation: None,
            passed: true,
        })
    }

    pub fn scalar(&mut self, name: &str, value: f64) {
        self.scalars.insert(name.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn check(&mut self, c: InequalityCheck) {
        self.checks.push(c);
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Counts violations and sets the pass flag.
    pub fn finish(mut self) -> Self {
        self.first_violation = self.checks.iter().position(InequalityCheck::violated);
        self.violations = self.checks.iter().filter(|c| c.violated()).count();
        self.passed = self.violations == 0;
        self
    }

    pub fn checks_of<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a InequalityCheck> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Domain(format!("serialization failed: {e}")))
    }

    /// Flat CSV of all checks.
    pub fn checks_csv(&self) -> String {
        let mut out = String::from("index,name,context,time,lhs,rhs,strict,holds,vacuous\n");
        for (i, c) in self.checks.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{},{},{},{},{},{},{},{}",
                csv_field(&c.name),
                csv_field(&c.context),
                c.time.map(format_number).unwrap_or_default(),
                format_number(c.lhs),
                format_number(c.rhs),
                c.strict,
                c.holds,
                c.vacuous
            );
        }
        out
    }
}
