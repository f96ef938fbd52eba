//! Long-format records, named checks and the files written per run.

use std::fs;
use std::path::Path;

use mfgmaster_core::RateFit;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub experiment: String,
    pub parameter: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Within(f64, f64),
}

impl Bound {
    pub fn holds(self, v: f64) -> bool {
        match self {
            Bound::AtMost(b) => v <= b,
            Bound::AtLeast(b) => v >= b,
            Bound::Within(lo, hi) => v >= lo && v <= hi,
        }
    }
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::AtMost(b) => write!(f, "<= {b:e}"),
            Bound::AtLeast(b) => write!(f, ">= {b:e}"),
            Bound::Within(lo, hi) => write!(f, "in [{lo}, {hi}]"),
        }
    }
}

/// One assertion: `value` must satisfy `bound`, where the bound comes from
/// the config field `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub parameter: String,
    pub metric: String,
    pub value: f64,
    pub bound: Bound,
    pub tolerance: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub name: String,
    pub fit: RateFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub experiment: String,
    pub kind: String,
    pub seed: u64,
    pub records: Vec<Record>,
    pub checks: Vec<Check>,
    pub fits: Vec<NamedFit>,
    pub diagnostics: Map<String, Value>,
    /// Set when the experiment aborted before finishing its checks.
    pub error: Option<String>,
}

impl Outcome {
    pub fn new(experiment: &str, kind: &str, seed: u64) -> Self {
        let mut o = Self {
            experiment: experiment.to_string(),
            kind: kind.to_string(),
            seed,
            records: Vec::new(),
            checks: Vec::new(),
            fits: Vec::new(),
            diagnostics: Map::new(),
            error: None,
        };
        o.record("config", "seed", seed as f64);
        o
    }

    pub fn record(&mut self, parameter: impl Into<String>, metric: impl Into<String>, value: f64) {
        self.records.push(Record {
            experiment: self.experiment.clone(),
            parameter: parameter.into(),
            metric: metric.into(),
            value,
        });
    }

    /// Records `value` and asserts it against `bound`; returns whether it held.
    pub fn check(
        &mut self,
        parameter: impl Into<String>,
        metric: impl Into<String>,
        value: f64,
        bound: Bound,
        tolerance: &str,
    ) -> bool {
        let parameter = parameter.into();
        let metric = metric.into();
        self.record(parameter.clone(), metric.clone(), value);
        let passed = bound.holds(value);
        self.checks.push(Check {
            parameter,
            metric,
            value,
            bound,
            tolerance: tolerance.to_string(),
            passed,
        });
        passed
    }

    pub fn fit(&mut self, name: &str, fit: RateFit) {
        self.record("fit", format!("{name}_slope"), fit.slope);
        self.record("fit", format!("{name}_r_squared"), fit.r_squared);
        self.fits.push(NamedFit {
            name: name.to_string(),
            fit,
        });
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.diagnostics
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn fail(&mut self, message: impl Into<String>) {
        self.error = Some(message.into());
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// Named check values matching `metric`.
    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.records.iter().filter(|r| r.metric == metric).map(|r| r.value).collect()
    }

    pub fn value(&self, metric: &str) -> Option<f64> {
        self.values(metric).into_iter().next()
    }
}

pub const CSV_HEADER: [&str; 4] = ["experiment", "parameter", "metric", "value"];

/// Shortest exact rendering is not stable across formatters, so values are
/// always written with 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn emit_csv(records: &[Record], path: &Path) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.experiment.as_str(),
            r.parameter.as_str(),
            r.metric.as_str(),
            format_value(r.value).as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> anyhow::Result<Vec<Record>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    anyhow::ensure!(header == CSV_HEADER, "unexpected header {header:?}");
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        anyhow::ensure!(row.len() == 4, "row with {} fields", row.len());
        out.push(Record {
            experiment: row[0].to_string(),
            parameter: row[1].to_string(),
            metric: row[2].to_string(),
            value: row[3].parse()?,
        });
    }
    Ok(out)
}

/// Writes `results.csv`, `diagnostics.json` and, when any outcome carries a
/// fit, `fit.json` into `dir`.
pub fn write_reports(dir: &Path, seed: u64, outcomes: &[Outcome]) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    let records: Vec<Record> = outcomes.iter().flat_map(|o| o.records.iter().cloned()).collect();
    emit_csv(&records, &dir.join("results.csv"))?;

    let experiments: Vec<Value> = outcomes
        .iter()
        .map(|o| {
            serde_json::json!({
                "experiment": o.experiment,
                "kind": o.kind,
                "seed": o.seed,
                "passed": o.passed(),
                "error": o.error,
                "checks": o.checks,
                "diagnostics": o.diagnostics,
            })
        })
        .collect();
    let diagnostics = serde_json::json!({ "seed": seed, "experiments": experiments });
    fs::write(dir.join("diagnostics.json"), serde_json::to_string_pretty(&diagnostics)? + "\n")?;

    let mut fits = Map::new();
    for o in outcomes.iter().filter(|o| !o.fits.is_empty()) {
        let mut per = Map::new();
        for f in &o.fits {
            per.insert(f.name.clone(), serde_json::to_value(&f.fit)?);
        }
        fits.insert(o.experiment.clone(), Value::Object(per));
    }
    if !fits.is_empty() {
        fs::write(dir.join("fit.json"), serde_json::to_string_pretty(&fits)? + "\n")?;
    }
    Ok(())
}
