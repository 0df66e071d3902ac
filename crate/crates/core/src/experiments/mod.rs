//! Verification campaigns. Each run produces an [`ExperimentReport`] with a
//! per-trial table, measured summaries and pass rules.

mod data;
mod elliptic;
mod energy;
mod heat;
mod local_limit;
mod oscillation;
mod parabolic;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use data::DataKind;
pub use elliptic::{run_elliptic_harnack, EllipticHarnackConfig};
pub use energy::{run_energy_suite, EnergySuiteConfig};
pub use heat::{run_heat_bounds, HeatBoundsConfig};
pub use local_limit::{run_local_limit, LocalLimitConfig};
pub use oscillation::{run_oscillation, OscillationConfig, OscillationMode};
pub use parabolic::{run_boundedness_harnack, BoundednessConfig};

use crate::error::{domain, Result};

pub const REPORT_VERSION: u32 = 1;

/// Share of skipped trials above which a passing run becomes inconclusive.
pub const MAX_SKIPPED_SHARE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub rule: String,
    pub verdict: Verdict,
    pub detail: String,
}

/// Per-trial rows with fixed columns; cells are preformatted.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrialTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// A trial-table cell.
pub enum Cell {
    Int(i64),
    Uint(u64),
    Real(f64),
    Flag(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::Real(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Cell {
        Cell::Uint(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Cell {
        Cell::Uint(v as u64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Cell {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Cell {
        Cell::Flag(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Cell {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Cell {
        Cell::Text(v)
    }
}

/// Seventeen significant digits, enough to round-trip any double.
pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Uint(v) => v.to_string(),
            Cell::Real(v) => format_real(*v),
            Cell::Flag(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
        }
    }
}

impl TrialTable {
    pub fn new(columns: &[&str]) -> TrialTable {
        TrialTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row.iter().map(Cell::render).collect());
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Normalized `L^r` norms on a ladder of balls and their running maximum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaximalNormRecord {
    pub exponent: f64,
    pub radii: Vec<u32>,
    pub values: Vec<f64>,
    pub running_max: Vec<f64>,
}

impl MaximalNormRecord {
    pub fn new(exponent: f64) -> MaximalNormRecord {
        MaximalNormRecord {
            exponent,
            radii: Vec::new(),
            values: Vec::new(),
            running_max: Vec::new(),
        }
    }

    pub fn push(&mut self, radius: u32, value: f64) {
        let m = self.running_max.last().copied().unwrap_or(f64::NEG_INFINITY).max(value);
        self.radii.push(radius);
        self.values.push(value);
        self.running_max.push(m);
    }

    /// The maximal-operator value over the ladder so far.
    pub fn maximum(&self) -> Option<f64> {
        self.running_max.last().copied()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub report_version: u32,
    pub experiment: String,
    /// Effective configuration with defaults resolved.
    pub config: Value,
    pub measured: Map<String, Value>,
    pub rules: Vec<RuleOutcome>,
    pub trials: usize,
    pub skipped: usize,
    pub verdict: Verdict,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub table: TrialTable,
}

/// Collects a report while an experiment runs.
pub(crate) struct ReportBuilder {
    name: String,
    config: Value,
    measured: Map<String, Value>,
    rules: Vec<RuleOutcome>,
    table: TrialTable,
    trials: usize,
    skipped: usize,
    started: Instant,
}

impl ReportBuilder {
    /// `started` is when the experiment began, for the wall-clock entry.
    pub fn new(name: &str, config: &impl Serialize, columns: &[&str], started: Instant) -> ReportBuilder {
        ReportBuilder {
            name: name.to_string(),
            config: serde_json::to_value(config).expect("configs serialize"),
            measured: Map::new(),
            rules: Vec::new(),
            table: TrialTable::new(columns),
            trials: 0,
            skipped: 0,
            started,
        }
    }

    pub fn row(&mut self, row: Vec<Cell>) {
        self.table.push(row);
    }

    pub fn measure(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("measurements serialize");
        self.measured.insert(key.to_string(), v);
    }

    pub fn counts(&mut self, trials: usize, skipped: usize) {
        self.trials = trials;
        self.skipped = skipped;
    }

    pub fn rule(&mut self, rule: &str, ok: bool, detail: impl Into<String>) {
        self.rules.push(RuleOutcome {
            rule: rule.to_string(),
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            detail: detail.into(),
        });
    }

    pub fn finish(self) -> ExperimentReport {
        let failed = self.rules.iter().any(|r| r.verdict == Verdict::Fail);
        let verdict = if failed {
            Verdict::Fail
        } else if self.skipped as f64 > MAX_SKIPPED_SHARE * self.trials as f64 {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        };
        ExperimentReport {
            report_version: REPORT_VERSION,
            experiment: self.name,
            config: self.config,
            measured: self.measured,
            rules: self.rules,
            trials: self.trials,
            skipped: self.skipped,
            verdict,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            table: self.table,
        }
    }
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Writes `report.json` and `trials.csv` into `dir`, which must exist.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut f = std::fs::File::create(dir.join("report.json"))?;
        f.write_all(self.to_json().as_bytes())?;
        f.write_all(b"\n")?;
        std::fs::write(dir.join("trials.csv"), self.table.to_csv())?;
        Ok(())
    }

    pub fn rule(&self, name: &str) -> Option<&RuleOutcome> {
        self.rules.iter().find(|r| r.rule == name)
    }
}

/// Reads back the summary part of a `report.json`.
pub fn read_report(dir: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(dir.join("report.json"))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| domain(format!("report.json: {e}")))?;
    if v.get("report_version").and_then(Value::as_u64) != Some(REPORT_VERSION as u64) {
        return Err(domain("unsupported report version"));
    }
    Ok(v)
}

/// Summary statistics of a sample, ignoring NaN.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Distribution {
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Distribution {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        v.sort_by(f64::total_cmp);
        if v.is_empty() {
            return Distribution {
                count: 0,
                min: f64::NAN,
                median: f64::NAN,
                mean: f64::NAN,
                max: f64::NAN,
            };
        }
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Distribution {
            count: n,
            min: v[0],
            median,
            mean: crate::calculus::pairwise_sum(&v) / n as f64,
            max: v[n - 1],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_maximum_is_monotone() {
        let mut r = MaximalNormRecord::new(2.0);
        for (k, v) in [3.0, 1.0, 4.0, 2.0].into_iter().enumerate() {
            r.push(k as u32, v);
        }
        assert_eq!(r.running_max, vec![3.0, 3.0, 4.0, 4.0]);
        assert_eq!(r.maximum(), Some(4.0));
    }

    #[test]
    fn table_formats_reals_with_seventeen_digits() {
        let mut t = TrialTable::new(&["trial", "value", "ok"]);
        t.push(vec![3usize.into(), 0.1.into(), true.into()]);
        assert_eq!(t.to_csv(), "trial,value,ok\n3,1.0000000000000001e-1,true\n");
        let back: f64 = t.rows[0][1].parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn skipped_trials_downgrade_a_pass() {
        let mut b = ReportBuilder::new("x", &serde_json::json!({}), &["a"], Instant::now());
        b.counts(10, 3);
        b.rule("r", true, "");
        assert_eq!(b.finish().verdict, Verdict::Inconclusive);
        let mut b = ReportBuilder::new("x", &serde_json::json!({}), &["a"], Instant::now());
        b.counts(10, 2);
        b.rule("r", true, "");
        assert_eq!(b.finish().verdict, Verdict::Pass);
        let mut b = ReportBuilder::new("x", &serde_json::json!({}), &["a"], Instant::now());
        b.rule("r", false, "");
        assert_eq!(b.finish().verdict, Verdict::Fail);
    }

    #[test]
    fn distribution_summary() {
        let d = Distribution::of(&[4.0, f64::NAN, 1.0, 3.0, 2.0]);
        assert_eq!((d.count, d.min, d.median, d.mean, d.max), (4, 1.0, 2.5, 2.5, 4.0));
    }
}
