use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::{BenchError, MetricReport, Scope};
use crate::metrics::{Direction, MetricId, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Summary table, one row per model and scope.
    Markdown,
    /// Per-image scores.
    Csv,
    /// Full reports including per-image scores.
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown report format `{s}` (markdown, csv, json)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Factor applied to MAE and MSE in the markdown table.
    pub error_scale: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { error_scale: 1.0 }
    }
}

pub fn render_report(
    reports: &[MetricReport],
    format: ReportFormat,
    options: &RenderOptions,
) -> Result<String, BenchError> {
    if reports.is_empty() {
        return Err(BenchError::EmptyReports);
    }
    Ok(match format {
        ReportFormat::Markdown => markdown(reports, options),
        ReportFormat::Csv => csv_rows(reports),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
            s.push('\n');
            s
        }
    })
}

/// Display value and its rounded integer key, so bolding compares what the
/// reader sees.
fn cell(metric: MetricId, mean: f64, options: &RenderOptions) -> (String, i64) {
    match metric.direction() {
        Direction::HigherBetter => {
            let key = (mean * 1000.0).round() as i64;
            (format!("{:.1}%", key as f64 / 10.0), key)
        }
        Direction::LowerBetter => {
            let key = (mean * options.error_scale * 1000.0).round() as i64;
            (format!("{:.3}", key as f64 / 1000.0), key)
        }
    }
}

fn markdown(reports: &[MetricReport], options: &RenderOptions) -> String {
    let mut by_scope: BTreeMap<Scope, Vec<&MetricReport>> = BTreeMap::new();
    for r in reports {
        by_scope.entry(r.scope).or_default().push(r);
    }

    let mut out = String::from("| Model | Scope | Images |");
    for m in MetricId::ALL {
        let _ = write!(out, " {} |", m.title());
    }
    out.push_str("\n| --- | --- | ---: |");
    for _ in MetricId::ALL {
        out.push_str(" ---: |");
    }
    out.push('\n');

    for group in by_scope.values() {
        let cells: Vec<Vec<Option<(String, i64)>>> = group
            .iter()
            .map(|r| {
                MetricId::ALL
                    .iter()
                    .map(|&m| r.mean(m).map(|v| cell(m, v, options)))
                    .collect()
            })
            .collect();
        let best: Vec<Option<i64>> = MetricId::ALL
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let keys = cells.iter().filter_map(|row| row[j].as_ref().map(|c| c.1));
                match m.direction() {
                    Direction::HigherBetter => keys.max(),
                    Direction::LowerBetter => keys.min(),
                }
            })
            .collect();
        for (r, row) in group.iter().zip(&cells) {
            let _ = write!(out, "| {} | {} | {} |", r.model_name, r.scope, r.image_count);
            for (j, c) in row.iter().enumerate() {
                match c {
                    // a lone row has nothing to beat
                    Some((text, key)) if group.len() > 1 && Some(*key) == best[j] => {
                        let _ = write!(out, " **{text}** |");
                    }
                    Some((text, _)) => {
                        let _ = write!(out, " {text} |");
                    }
                    None => out.push_str(" n/a |"),
                }
            }
            out.push('\n');
        }
    }

    let mut notes = Vec::new();
    for r in reports {
        for s in &r.per_metric {
            for (reason, n) in &s.excluded {
                notes.push(format!(
                    "- {} / {} / {}: {n} image(s) excluded ({reason})",
                    r.model_name, r.scope, s.metric
                ));
            }
        }
    }
    if !notes.is_empty() {
        out.push('\n');
        for n in notes {
            out.push_str(&n);
            out.push('\n');
        }
    }
    out
}

fn csv_rows(reports: &[MetricReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["model".to_string(), "id".into(), "category".into()];
    header.extend(MetricId::ALL.iter().map(|m| m.as_str().to_string()));
    header.push("excluded".into());
    w.write_record(&header).expect("in-memory write");
    for r in reports.iter().filter(|r| r.scope == Scope::Overall) {
        for row in &r.per_image {
            let mut rec = vec![r.model_name.clone(), row.record_id.clone(), row.category.to_string()];
            let mut excluded = Vec::new();
            for m in MetricId::ALL {
                match row.scores.entry(m).map(|e| e.outcome) {
                    Some(Outcome::Value(v)) => rec.push(v.to_string()),
                    Some(Outcome::Absent(reason)) => {
                        excluded.push(format!("{m}:{reason:?}"));
                        rec.push(String::new());
                    }
                    None => rec.push(String::new()),
                }
            }
            rec.push(excluded.join(";"));
            w.write_record(&rec).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
