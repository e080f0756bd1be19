//! Versioned report rows and their JSON / CSV encodings.

use serde::{Serialize, Serializer};

use super::config::{Command, Options};
use crate::linalg::C64;

pub const SCHEMA: &str = "ufest/1";

/// `re±imi` with 17 significant digits in each part.
pub fn format_complex(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:.16e}{sign}{:.16e}i", z.re, z.im.abs())
}

fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn ser_complex<S: Serializer>(z: &Option<C64>, s: S) -> Result<S::Ok, S::Error> {
    match z {
        Some(z) => s.serialize_str(&format_complex(*z)),
        None => s.serialize_none(),
    }
}

/// One result line. Columns not meaningful for a command are null/empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ReportRow {
    pub family: String,
    #[serde(serialize_with = "ser_complex")]
    pub true_value: Option<C64>,
    #[serde(serialize_with = "ser_complex")]
    pub estimate: Option<C64>,
    pub abs_error: Option<f64>,
    pub shots: Option<u64>,
    pub total_queries: Option<u64>,
    pub rep_epsilon: Option<usize>,
    pub bias_g: Option<f64>,
    pub stderr: Option<f64>,
    pub runtime_millis: Option<u64>,
    /// Degree truncation / tensor power the row was computed at.
    pub m: Option<usize>,
    /// The row's own check, where the command defines one.
    pub passed: Option<bool>,
}

impl ReportRow {
    pub fn new(family: impl Into<String>) -> Self {
        Self {
            family: family.into(),
            ..Self::default()
        }
    }

    /// Sets `estimate` and `true_value` together with `abs_error`.
    pub fn compare(mut self, estimate: C64, truth: C64) -> Self {
        self.estimate = Some(estimate);
        self.true_value = Some(truth);
        self.abs_error = Some((estimate - truth).norm());
        self
    }

    const COLUMNS: [&'static str; 12] = [
        "family",
        "true_value",
        "estimate",
        "abs_error",
        "shots",
        "total_queries",
        "rep_epsilon",
        "bias_g",
        "stderr",
        "runtime_millis",
        "m",
        "passed",
    ];

    fn csv_record(&self) -> Vec<String> {
        fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
            v.map(f).unwrap_or_default()
        }
        vec![
            self.family.clone(),
            opt(self.true_value, format_complex),
            opt(self.estimate, format_complex),
            opt(self.abs_error, format_real),
            opt(self.shots, |v| v.to_string()),
            opt(self.total_queries, |v| v.to_string()),
            opt(self.rep_epsilon, |v| v.to_string()),
            opt(self.bias_g, format_real),
            opt(self.stderr, format_real),
            opt(self.runtime_millis, |v| v.to_string()),
            opt(self.m, |v| v.to_string()),
            opt(self.passed, |v| v.to_string()),
        ]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Experiment {
    pub command: Command,
    pub options: Options,
    pub rows: Vec<ReportRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub experiments: Vec<Experiment>,
}

impl Report {
    pub fn new(experiments: Vec<Experiment>) -> Self {
        Self {
            schema: SCHEMA,
            experiments,
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.experiments.iter().flat_map(|e| &e.rows)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Rows of every experiment under one header, prefixed by the command.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = std::iter::once("command").chain(ReportRow::COLUMNS).collect();
        w.write_record(&header).expect("in-memory write");
        for e in &self.experiments {
            for row in &e.rows {
                let rec = std::iter::once(e.command.name().to_string()).chain(row.csv_record());
                w.write_record(rec).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}
