//! Agreement between metric scores and human rankings of model outputs.
//!
//! Each ranking of K outputs expands into K(K-1)/2 ordered pairs. A metric
//! is credited for a pair when it scores the preferred output strictly
//! better; exact ties earn half credit or none depending on [`TiePolicy`].

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{MetricReport, Scope};
use crate::metrics::{ImageScores, MetricId};

#[derive(Debug, Error)]
pub enum ConcordanceError {
    #[error("no comparable pairs")]
    NoComparablePairs,
    #[error("ranking for `{image_id}` must order at least two models")]
    TooShort { image_id: String },
    #[error("ranking for `{image_id}` lists `{model}` twice")]
    DuplicateModel { image_id: String, model: String },
    #[error("ranking for `{image_id}` names unknown model `{model}`")]
    UnknownModel { image_id: String, model: String },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One annotator's best-to-worst ordering of model outputs for one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HumanRanking {
    pub image_id: String,
    pub annotator_id: String,
    pub ordering: Vec<String>,
    pub timestamp: DateTime<Utc>,
}

impl HumanRanking {
    pub fn new(
        image_id: impl Into<String>,
        annotator_id: impl Into<String>,
        ordering: Vec<String>,
        timestamp: DateTime<Utc>,
    ) -> Result<Self, ConcordanceError> {
        let ranking = Self {
            image_id: image_id.into(),
            annotator_id: annotator_id.into(),
            ordering,
            timestamp,
        };
        ranking.validate()?;
        Ok(ranking)
    }

    /// Checks length and uniqueness.
    pub fn validate(&self) -> Result<(), ConcordanceError> {
        if self.ordering.len() < 2 {
            return Err(ConcordanceError::TooShort {
                image_id: self.image_id.clone(),
            });
        }
        let mut seen = HashSet::new();
        for m in &self.ordering {
            if !seen.insert(m.as_str()) {
                return Err(ConcordanceError::DuplicateModel {
                    image_id: self.image_id.clone(),
                    model: m.clone(),
                });
            }
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus membership in `models`.
    pub fn validate_models(&self, models: &[String]) -> Result<(), ConcordanceError> {
        self.validate()?;
        match self.ordering.iter().find(|m| !models.contains(m)) {
            Some(m) => Err(ConcordanceError::UnknownModel {
                image_id: self.image_id.clone(),
                model: m.clone(),
            }),
            None => Ok(()),
        }
    }

    /// Ordered `(preferred, other)` pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.ordering.iter().enumerate().flat_map(move |(i, a)| {
            self.ordering[i + 1..]
                .iter()
                .map(move |b| (a.as_str(), b.as_str()))
        })
    }

    /// One JSON line, newline included.
    pub fn to_json_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("ranking serializes");
        line.push('\n');
        line
    }
}

/// Parses a JSONL rankings stream. Blank lines are skipped; every other
/// line must hold a valid ranking.
pub fn parse_rankings<R: BufRead>(reader: R, source: &str) -> Result<Vec<HumanRanking>, ConcordanceError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ConcordanceError::Io {
            path: source.to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| ConcordanceError::Malformed {
            path: source.to_string(),
            line: i + 1,
            reason,
        };
        let ranking: HumanRanking =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        ranking.validate().map_err(|e| malformed(e.to_string()))?;
        out.push(ranking);
    }
    Ok(out)
}

pub fn read_rankings(path: impl AsRef<Path>) -> Result<Vec<HumanRanking>, ConcordanceError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| ConcordanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_rankings(BufReader::new(file), &path.display().to_string())
}

/// Appends one ranking and syncs it to disk before returning.
pub fn append_ranking(file: &mut std::fs::File, ranking: &HumanRanking) -> std::io::Result<()> {
    file.write_all(ranking.to_json_line().as_bytes())?;
    file.flush()?;
    file.sync_data()
}

/// Metric scores per `(image, model)`, restricted to a tracked metric list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    metrics: Vec<MetricId>,
    scores: BTreeMap<(String, String), BTreeMap<MetricId, f64>>,
}

impl ScoreTable {
    pub fn new(metrics: &[MetricId]) -> Self {
        let mut metrics = metrics.to_vec();
        metrics.sort();
        metrics.dedup();
        Self {
            metrics,
            scores: BTreeMap::new(),
        }
    }

    pub fn metrics(&self) -> &[MetricId] {
        &self.metrics
    }

    pub fn insert(&mut self, image: &str, model: &str, metric: MetricId, value: f64) {
        self.scores
            .entry((image.to_string(), model.to_string()))
            .or_default()
            .insert(metric, value);
    }

    /// Inserts every present value of a full evaluation.
    pub fn insert_scores(&mut self, image: &str, model: &str, scores: &ImageScores) {
        for &m in &self.metrics.clone() {
            if let Some(v) = scores.get(m) {
                self.insert(image, model, m, v);
            }
        }
    }

    /// Collects per-image scores from the overall benchmark reports.
    pub fn from_reports(reports: &[MetricReport], metrics: &[MetricId]) -> Self {
        let mut table = Self::new(metrics);
        for r in reports.iter().filter(|r| r.scope == Scope::Overall) {
            for row in &r.per_image {
                table.insert_scores(&row.record_id, &r.model_name, &row.scores);
            }
        }
        table
    }

    pub fn get(&self, image: &str, model: &str, metric: MetricId) -> Option<f64> {
        self.scores
            .get(&(image.to_string(), model.to_string()))
            .and_then(|m| m.get(&metric).copied())
    }

    /// All tracked metrics for one output, or `None` if any is missing.
    fn complete(&self, image: &str, model: &str) -> Option<Vec<f64>> {
        let row = self.scores.get(&(image.to_string(), model.to_string()))?;
        self.metrics.iter().map(|m| row.get(m).copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TiePolicy {
    #[default]
    HalfCredit,
    Disagree,
}

impl std::str::FromStr for TiePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "halfcredit" | "half" => Ok(TiePolicy::HalfCredit),
            "disagree" => Ok(TiePolicy::Disagree),
            _ => Err(format!("unknown tie policy `{s}` (half-credit, disagree)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricAgreement {
    pub metric: MetricId,
    pub rate: f64,
    pub agreements: usize,
    pub ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConcordanceReport {
    pub per_metric: Vec<MetricAgreement>,
    pub comparable_pairs: usize,
    pub dropped_pairs: usize,
    pub tie_policy: TiePolicy,
}

impl ConcordanceReport {
    pub fn rate(&self, metric: MetricId) -> Option<f64> {
        self.per_metric
            .iter()
            .find(|a| a.metric == metric)
            .map(|a| a.rate)
    }
}

/// Scores every ranking against every tracked metric. A pair is dropped,
/// for all metrics at once, when either output lacks any tracked score.
pub fn compute_concordance(
    rankings: &[HumanRanking],
    scores: &ScoreTable,
    tie_policy: TiePolicy,
) -> Result<ConcordanceReport, ConcordanceError> {
    let metrics = scores.metrics();
    let mut agreements = vec![0usize; metrics.len()];
    let mut ties = vec![0usize; metrics.len()];
    let mut comparable = 0;
    let mut dropped = 0;
    for ranking in rankings {
        for (a, b) in ranking.pairs() {
            let (Some(sa), Some(sb)) = (
                scores.complete(&ranking.image_id, a),
                scores.complete(&ranking.image_id, b),
            ) else {
                dropped += 1;
                continue;
            };
            comparable += 1;
            for (k, m) in metrics.iter().enumerate() {
                if m.better(sa[k], sb[k]) {
                    agreements[k] += 1;
                } else if sa[k] == sb[k] {
                    ties[k] += 1;
                }
            }
        }
    }
    if comparable == 0 {
        return Err(ConcordanceError::NoComparablePairs);
    }
    let per_metric = metrics
        .iter()
        .enumerate()
        .map(|(k, &metric)| {
            // half units keep the tally exact
            let half_units = 2 * agreements[k]
                + match tie_policy {
                    TiePolicy::HalfCredit => ties[k],
                    TiePolicy::Disagree => 0,
                };
            MetricAgreement {
                metric,
                rate: half_units as f64 / (2 * comparable) as f64,
                agreements: agreements[k],
                ties: ties[k],
            }
        })
        .collect();
    Ok(ConcordanceReport {
        per_metric,
        comparable_pairs: comparable,
        dropped_pairs: dropped,
        tie_policy,
    })
}

/// Metrics by agreement rate, best first; equal rates in alphabetical order
/// of the short name.
pub fn rank_metrics(report: &ConcordanceReport) -> Vec<MetricId> {
    let mut entries: Vec<&MetricAgreement> = report.per_metric.iter().collect();
    entries.sort_by(|a, b| {
        b.rate
            .total_cmp(&a.rate)
            .then_with(|| a.metric.as_str().cmp(b.metric.as_str()))
    });
    entries.into_iter().map(|a| a.metric).collect()
}
