//! Table and CSV renderings of Monte Carlo summaries.

use serde::{Deserialize, Serialize};
use wzone::sim::scenario::display_name;
use wzone::sim::Summary;

pub const NOT_AVAILABLE: &str = "N/A";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub success_mean: f64,
    pub success_std: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub admitted_mean: f64,
    pub claims: usize,
}

impl From<&Summary> for ReportRow {
    fn from(s: &Summary) -> Self {
        ReportRow {
            scenario: display_name(&s.scenario).to_string(),
            success_mean: s.success_rate_mean,
            success_std: s.success_rate_std,
            precision: s.precision,
            recall: s.recall,
            admitted_mean: s.admitted_mean,
            claims: s.claims_per_run,
        }
    }
}

fn or_na(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| NOT_AVAILABLE.to_string(), |x| format!("{x:.decimals$}"))
}

impl ReportRow {
    pub fn cells(&self) -> [String; 5] {
        [
            self.scenario.clone(),
            format!("{:.3} ± {:.2}", self.success_mean, self.success_std),
            or_na(self.precision, 2),
            or_na(self.recall, 3),
            format!("{:.1}/{}", self.admitted_mean, self.claims),
        ]
    }
}

const HEADER: [&str; 5] = ["Scenario", "Success Rate", "Precision", "Recall", "Admitted"];

pub fn render_table(rows: &[ReportRow]) -> String {
    let cells: Vec<[String; 5]> = rows.iter().map(ReportRow::cells).collect();
    let mut widths = HEADER.map(|h| h.chars().count());
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |items: &[String]| {
        let padded: Vec<String> = items
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&HEADER.map(String::from));
    out.push_str(&line(&widths.map(|w| "-".repeat(w))));
    for row in &cells {
        out.push_str(&line(row));
    }
    out
}

/// Flat CSV form of a summary; undefined metrics are empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scenario: String,
    pub seed: u64,
    pub iterations: usize,
    pub claims_per_run: usize,
    pub success_rate_mean: f64,
    pub success_rate_std: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub admitted_mean: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl From<&Summary> for CsvRow {
    fn from(s: &Summary) -> Self {
        CsvRow {
            scenario: s.scenario.clone(),
            seed: s.seed,
            iterations: s.iterations,
            claims_per_run: s.claims_per_run,
            success_rate_mean: s.success_rate_mean,
            success_rate_std: s.success_rate_std,
            precision: s.precision,
            recall: s.recall,
            admitted_mean: s.admitted_mean,
            tp: s.confusion.tp,
            fp: s.confusion.fp,
            fn_: s.confusion.fn_,
            tn: s.confusion.tn,
        }
    }
}

pub fn summaries_to_csv(summaries: &[Summary]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in summaries {
        w.serialize(CsvRow::from(s))?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn csv_to_rows(text: &str) -> Result<Vec<CsvRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use wzone::sim::build_scenario;
    use wzone::sim::monte_carlo::summarize;

    #[test]
    fn table_marks_undefined_metrics() {
        let fraud = summarize(&build_scenario("distance_fraud").unwrap(), &[0, 0]);
        let base = summarize(&build_scenario("baseline_4w").unwrap(), &[30, 30]);
        let table = render_table(&[ReportRow::from(&base), ReportRow::from(&fraud)]);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("Baseline (4W)"));
        assert!(lines[2].contains("1.000 ± 0.00") && lines[2].contains("30.0/30"));
        assert!(!lines[2].contains(NOT_AVAILABLE));
        assert_eq!(lines[3].matches(NOT_AVAILABLE).count(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let a = summarize(&build_scenario("distance_fraud").unwrap(), &[0, 1]);
        let b = summarize(&build_scenario("edge_position").unwrap(), &[10, 12]);
        let text = summaries_to_csv(&[a.clone(), b.clone()]).unwrap();
        let rows = csv_to_rows(&text).unwrap();
        assert_eq!(rows, vec![CsvRow::from(&a), CsvRow::from(&b)]);
        assert_eq!(rows[0].recall, None);
    }
}
