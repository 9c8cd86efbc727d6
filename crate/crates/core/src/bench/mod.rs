//! Batch evaluation of prediction directories against a manifest.
//!
//! Each model's predictions are matched to manifest records by file stem,
//! scored with the full metric suite on a worker pool, and reduced into one
//! overall report plus one report per category. Reduction runs sequentially
//! in manifest order, so reports do not depend on the worker count.

mod cache;
mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{validate_manifest, Category, DatasetManifest, ManifestIssue, Split};
use crate::mask::{load_mask, MaskError, MaskPair};
use crate::metrics::{evaluate_all, EvalConfig, ImageScores, MetricId, Outcome};

pub use cache::ScoreCache;
pub use report::{render_report, ReportFormat, RenderOptions};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("model `{0}` resolved no prediction for the selected split")]
    NoPairsResolved(String),
    #[error("manifest has {} issue(s), first: {}", .0.len(), .0[0])]
    ManifestInvalid(Vec<ManifestIssue>),
    #[error("model `{model}` is missing predictions for {} record(s): {}", .ids.len(), .ids.join(", "))]
    MissingPredictions { model: String, ids: Vec<String> },
    #[error("model `{model}` has several prediction files for `{id}`: {files:?}")]
    AmbiguousPrediction {
        model: String,
        id: String,
        files: Vec<PathBuf>,
    },
    #[error("cannot read prediction directory {path}: {source}")]
    PredictionDir {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model `{model}`, record `{id}`: {source}")]
    Mask {
        model: String,
        id: String,
        #[source]
        source: MaskError,
    },
    #[error("nothing to render")]
    EmptyReports,
    #[error("no candidate checkpoints")]
    NoCandidates,
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

/// A named directory of predicted masks, one file per record id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRun {
    pub model_name: String,
    pub prediction_dir: PathBuf,
}

impl ModelRun {
    pub fn new(model_name: impl Into<String>, prediction_dir: impl Into<PathBuf>) -> Self {
        Self {
            model_name: model_name.into(),
            prediction_dir: prediction_dir.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedPair {
    pub record_id: String,
    pub category: Category,
    pub prediction: PathBuf,
    pub ground_truth: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedRun {
    pub model_name: String,
    pub pairs: Vec<ResolvedPair>,
    pub missing: Vec<String>,
}

/// Matches prediction files to the split's records by file stem. Several
/// files sharing a stem are an error rather than a guess.
pub fn resolve_run(
    manifest: &DatasetManifest,
    run: &ModelRun,
    split: Split,
) -> Result<ResolvedRun, BenchError> {
    let dir_err = |source| BenchError::PredictionDir {
        path: run.prediction_dir.display().to_string(),
        source,
    };
    let mut by_stem: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for entry in std::fs::read_dir(&run.prediction_dir).map_err(dir_err)? {
        let path = entry.map_err(dir_err)?.path();
        if !path.is_file() {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            by_stem.entry(stem.to_string()).or_default().push(path);
        }
    }
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for record in manifest.records_in(split) {
        match by_stem.get_mut(&record.id) {
            None => missing.push(record.id.clone()),
            Some(files) if files.len() > 1 => {
                files.sort();
                return Err(BenchError::AmbiguousPrediction {
                    model: run.model_name.clone(),
                    id: record.id.clone(),
                    files: files.clone(),
                });
            }
            Some(files) => pairs.push(ResolvedPair {
                record_id: record.id.clone(),
                category: record.category,
                prediction: files[0].clone(),
                ground_truth: manifest.resolve(&record.mask_path),
            }),
        }
    }
    Ok(ResolvedRun {
        model_name: run.model_name.clone(),
        pairs,
        missing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    pub split: Split,
    pub eval: EvalConfig,
    /// Exclude records without a prediction instead of failing.
    pub allow_missing: bool,
    /// Worker count; 0 uses the global pool.
    pub jobs: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            split: Split::Test,
            eval: EvalConfig::default(),
            allow_missing: false,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Overall,
    #[serde(untagged)]
    Category(Category),
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scope::Overall => f.write_str("overall"),
            Scope::Category(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImageRow {
    pub record_id: String,
    pub category: Category,
    pub scores: ImageScores,
}

/// Mean of one metric over the images of a scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricSummary {
    pub metric: MetricId,
    /// `None` when every image in scope failed this metric.
    pub mean: Option<f64>,
    pub scored: usize,
    /// Images left out of the mean, by reason.
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub excluded: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricReport {
    pub model_name: String,
    pub scope: Scope,
    pub image_count: usize,
    pub per_metric: Vec<MetricSummary>,
    pub per_image: Vec<ImageRow>,
}

impl MetricReport {
    pub fn mean(&self, metric: MetricId) -> Option<f64> {
        self.per_metric
            .iter()
            .find(|s| s.metric == metric)
            .and_then(|s| s.mean)
    }

    fn from_rows(model_name: &str, scope: Scope, rows: Vec<ImageRow>) -> Self {
        let per_metric = MetricId::ALL
            .iter()
            .map(|&metric| {
                let mut sum = 0.0;
                let mut scored = 0;
                let mut excluded: BTreeMap<String, usize> = BTreeMap::new();
                for row in &rows {
                    match row.scores.entry(metric).map(|e| e.outcome) {
                        Some(Outcome::Value(v)) => {
                            sum += v;
                            scored += 1;
                        }
                        Some(Outcome::Absent(reason)) => {
                            *excluded.entry(format!("{reason:?}")).or_default() += 1;
                        }
                        None => *excluded.entry("NotComputed".to_string()).or_default() += 1,
                    }
                }
                MetricSummary {
                    metric,
                    mean: (scored > 0).then(|| sum / scored as f64),
                    scored,
                    excluded,
                }
            })
            .collect();
        Self {
            model_name: model_name.to_string(),
            scope,
            image_count: rows.len(),
            per_metric,
            per_image: rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    /// Ordered by model (input order), then overall before categories.
    pub reports: Vec<MetricReport>,
    pub warnings: Vec<String>,
}

fn check_manifest(manifest: &DatasetManifest, split: Split) -> Result<(), BenchError> {
    let subset = DatasetManifest {
        records: manifest.records_in(split).cloned().collect(),
        seed: manifest.seed,
        base_dir: manifest.base_dir.clone(),
    };
    let blocking: Vec<ManifestIssue> = validate_manifest(&subset)
        .into_iter()
        .filter(|issue| match issue {
            // scored per metric, reported as exclusions
            ManifestIssue::EmptyForeground { .. } => false,
            // only masks are needed to score
            ManifestIssue::UnreadableImage { .. } => false,
            ManifestIssue::MissingFile { id, path } => subset
                .get(id)
                .is_some_and(|r| r.mask_path == *path),
            _ => true,
        })
        .collect();
    if blocking.is_empty() {
        Ok(())
    } else {
        Err(BenchError::ManifestInvalid(blocking))
    }
}

fn score_pair(
    model: &str,
    pair: &ResolvedPair,
    eval: &EvalConfig,
    cache: &ScoreCache,
) -> Result<ImageScores, BenchError> {
    let mask_err = |source| BenchError::Mask {
        model: model.to_string(),
        id: pair.record_id.clone(),
        source,
    };
    let prediction = load_mask(&pair.prediction).map_err(mask_err)?;
    let ground_truth = load_mask(&pair.ground_truth).map_err(mask_err)?;
    let pair = MaskPair::new(prediction, ground_truth).map_err(mask_err)?;
    Ok(cache.get_or_compute(&pair, eval, || evaluate_all(&pair, eval)))
}

pub fn run_benchmark(
    manifest: &DatasetManifest,
    runs: &[ModelRun],
    options: &BenchOptions,
) -> Result<BenchOutput, BenchError> {
    run_benchmark_with_cache(manifest, runs, options, &ScoreCache::default())
}

/// [`run_benchmark`] with a caller-supplied score cache, so repeated sweeps
/// over the same masks skip recomputation.
pub fn run_benchmark_with_cache(
    manifest: &DatasetManifest,
    runs: &[ModelRun],
    options: &BenchOptions,
    cache: &ScoreCache,
) -> Result<BenchOutput, BenchError> {
    check_manifest(manifest, options.split)?;
    let mut warnings = Vec::new();
    let mut resolved = Vec::with_capacity(runs.len());
    for run in runs {
        let r = resolve_run(manifest, run, options.split)?;
        if !r.missing.is_empty() {
            if options.allow_missing {
                warnings.push(format!(
                    "model `{}`: {} record(s) without prediction excluded: {}",
                    r.model_name,
                    r.missing.len(),
                    r.missing.join(", ")
                ));
            } else {
                return Err(BenchError::MissingPredictions {
                    model: r.model_name,
                    ids: r.missing,
                });
            }
        }
        if r.pairs.is_empty() {
            return Err(BenchError::NoPairsResolved(r.model_name));
        }
        resolved.push(r);
    }

    let tasks: Vec<(&str, &ResolvedPair)> = resolved
        .iter()
        .flat_map(|r| r.pairs.iter().map(move |p| (r.model_name.as_str(), p)))
        .collect();
    let evaluate = || -> Result<Vec<ImageScores>, BenchError> {
        tasks
            .par_iter()
            .map(|(model, pair)| score_pair(model, pair, &options.eval, cache))
            .collect()
    };
    let scores = if options.jobs == 0 {
        evaluate()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| BenchError::Pool(e.to_string()))?
            .install(evaluate)?
    };

    let mut scores = scores.into_iter();
    let mut reports = Vec::new();
    for run in &resolved {
        let rows: Vec<ImageRow> = run
            .pairs
            .iter()
            .map(|p| ImageRow {
                record_id: p.record_id.clone(),
                category: p.category,
                scores: scores.next().expect("one score per task"),
            })
            .collect();
        let overall = MetricReport::from_rows(&run.model_name, Scope::Overall, rows);
        let mut by_category = Vec::new();
        for category in Category::ALL {
            let subset: Vec<ImageRow> = overall
                .per_image
                .iter()
                .filter(|r| r.category == category)
                .cloned()
                .collect();
            if !subset.is_empty() {
                by_category.push(MetricReport::from_rows(
                    &run.model_name,
                    Scope::Category(category),
                    subset,
                ));
            }
        }
        reports.push(overall);
        reports.extend(by_category);
    }
    for (reason, n) in excluded_totals(&reports) {
        warnings.push(format!("{n} image score(s) excluded: {reason}"));
    }
    Ok(BenchOutput { reports, warnings })
}

fn excluded_totals(reports: &[MetricReport]) -> BTreeMap<String, usize> {
    let mut totals = BTreeMap::new();
    for r in reports.iter().filter(|r| r.scope == Scope::Overall) {
        for s in &r.per_metric {
            for (reason, n) in &s.excluded {
                *totals
                    .entry(format!("{} {} ({reason})", r.model_name, s.metric))
                    .or_default() += n;
            }
        }
    }
    totals
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSelection {
    pub best: String,
    pub criterion: MetricId,
    /// Overall validation report per candidate, in input order.
    pub comparison: Vec<MetricReport>,
}

/// Picks the candidate with the best overall validation mean of `criterion`.
/// Ties go to the lexicographically smallest name; a candidate whose mean is
/// undefined ranks last.
pub fn select_checkpoint(
    candidates: &[ModelRun],
    manifest: &DatasetManifest,
    criterion: MetricId,
    options: &BenchOptions,
) -> Result<CheckpointSelection, BenchError> {
    if candidates.is_empty() {
        return Err(BenchError::NoCandidates);
    }
    let options = BenchOptions {
        split: Split::Validation,
        ..*options
    };
    let output = run_benchmark(manifest, candidates, &options)?;
    let comparison: Vec<MetricReport> = output
        .reports
        .into_iter()
        .filter(|r| r.scope == Scope::Overall)
        .collect();
    let best = comparison
        .iter()
        .map(|r| (r.model_name.as_str(), r.mean(criterion)))
        .reduce(|a, b| {
            let a_wins = match (a.1, b.1) {
                (Some(x), Some(y)) if criterion.better(x, y) => true,
                (Some(x), Some(y)) if criterion.better(y, x) => false,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                _ => a.0 <= b.0,
            };
            if a_wins {
                a
            } else {
                b
            }
        })
        .map(|(name, _)| name.to_string())
        .expect("non-empty comparison");
    Ok(CheckpointSelection {
        best,
        criterion,
        comparison,
    })
}

/// Convenience for callers holding prediction directories as `NAME=DIR`.
pub fn parse_run_spec(spec: &str) -> Option<ModelRun> {
    let (name, dir) = spec.split_once('=')?;
    if name.is_empty() || dir.is_empty() {
        return None;
    }
    Some(ModelRun::new(name, Path::new(dir)))
}
