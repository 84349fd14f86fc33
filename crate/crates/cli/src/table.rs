//! Per-property violation-rate tables with group and overall averages.

use std::fmt::Write;

/// Average rows, each over the listed properties that are present.
pub const GROUPS: [(&str, &[&str]); 3] = [
    ("Average (1L-2L)", &["theta_1L", "theta_1R", "theta_2L"]),
    ("Average (3L-4R)", &["theta_3L", "theta_3R", "theta_4L", "theta_4R"]),
    ("Average (5L-6R)", &["theta_5L", "theta_5R", "theta_6L", "theta_6R"]),
];

pub const OVERALL: &str = "Overall Average";

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub property: String,
    pub description: String,
    /// One violation rate (fraction) per column.
    pub rates: Vec<f64>,
}

/// Rows of violation rates, one column per policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub columns: Vec<String>,
    pub rows: Vec<RateRow>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl RateTable {
    /// Group averages (only groups with at least one member present) then the
    /// overall average, as `(label, per-column rate)`.
    pub fn averages(&self) -> Vec<(String, Vec<f64>)> {
        let column_mean = |c: usize, rows: &[&RateRow]| mean(rows.iter().map(|r| r.rates[c]));
        let mut out = Vec::new();
        for (label, members) in GROUPS {
            let rows: Vec<&RateRow> = self.rows.iter().filter(|r| members.contains(&r.property.as_str())).collect();
            if !rows.is_empty() {
                out.push((
                    label.to_string(),
                    (0..self.columns.len()).map(|c| column_mean(c, &rows).unwrap_or(0.0)).collect(),
                ));
            }
        }
        let all: Vec<&RateRow> = self.rows.iter().collect();
        out.push((
            OVERALL.to_string(),
            (0..self.columns.len()).map(|c| column_mean(c, &all).unwrap_or(0.0)).collect(),
        ));
        out
    }

    pub fn overall(&self) -> Vec<f64> {
        self.averages().pop().map(|(_, v)| v).unwrap_or_default()
    }

    /// CSV with rates in percent: a header, one row per property, then the
    /// average rows with an empty description.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("property,description");
        for c in &self.columns {
            s.push(',');
            s.push_str(&csv_field(c));
        }
        s.push('\n');
        let mut line = |name: &str, description: &str, rates: &[f64]| {
            write!(s, "{},{}", csv_field(name), csv_field(description)).unwrap();
            for r in rates {
                write!(s, ",{}", r * 100.0).unwrap();
            }
            s.push('\n');
        };
        for r in &self.rows {
            line(&r.property, &r.description, &r.rates);
        }
        for (label, rates) in self.averages() {
            line(&label, "", &rates);
        }
        s
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
