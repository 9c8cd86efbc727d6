use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock, RwLock};

use chrono::Utc;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use toonbench_core::bench::{resolve_run, BenchError, ModelRun};
use toonbench_core::concordance::{
    append_ranking, compute_concordance, read_rankings, ConcordanceError, ConcordanceReport,
    HumanRanking, ScoreTable, TiePolicy,
};
use toonbench_core::dataset::{DatasetManifest, Split};
use toonbench_core::mask::load_mask;
use toonbench_core::metrics::{evaluate_all, EvalConfig};
use toonbench_core::{MaskPair, MetricId};

use crate::composite::{composite_over_checkerboard, encode_png, CHECKER_CELL};

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("session not initialized: {0}")]
    SessionNotInitialized(String),
    #[error("annotator id must not be empty")]
    EmptyAnnotator,
    #[error("no task for image `{0}`")]
    UnknownTask(String),
    #[error("labels {got:?} do not match the task labels {expected:?}")]
    LabelMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("`{annotator_id}` already ranked `{image_id}`")]
    DuplicateSubmission {
        image_id: String,
        annotator_id: String,
    },
    #[error("unknown asset handle")]
    UnknownHandle,
    #[error("cannot render asset: {0}")]
    Asset(String),
    #[error("cannot persist ranking: {0}")]
    Persist(#[source] std::io::Error),
    #[error(transparent)]
    Rankings(#[from] ConcordanceError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

impl ReviewError {
    /// Stable machine-readable name used in HTTP error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            ReviewError::SessionNotInitialized(_) => "SessionNotInitialized",
            ReviewError::EmptyAnnotator => "EmptyAnnotator",
            ReviewError::UnknownTask(_) => "UnknownTask",
            ReviewError::LabelMismatch { .. } => "LabelMismatch",
            ReviewError::DuplicateSubmission { .. } => "DuplicateSubmission",
            ReviewError::UnknownHandle => "UnknownHandle",
            ReviewError::Asset(_) => "AssetError",
            ReviewError::Persist(_) => "PersistError",
            ReviewError::Rankings(_) => "RankingsError",
            ReviewError::Bench(_) => "BenchError",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub manifest: DatasetManifest,
    pub models: Vec<ModelRun>,
    pub seed: u64,
    pub rankings_path: PathBuf,
    /// Records offered for ranking.
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Candidate {
    pub blind_label: String,
    pub asset_handle: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankingTask {
    pub image_id: String,
    pub original_image_ref: String,
    /// In label order; labels map to models through a seeded permutation.
    pub candidates: Vec<Candidate>,
    /// Uncompleted images for this annotator, this one included.
    pub remaining_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum TaskResponse {
    Task(RankingTask),
    #[serde(rename_all = "camelCase")]
    Done { completed_count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Acknowledgment {
    pub image_id: String,
    pub remaining_count: usize,
}

#[derive(Debug, Clone)]
enum Asset {
    Original { image: PathBuf },
    Candidate { image: PathBuf, prediction: PathBuf },
}

#[derive(Debug)]
struct Slot {
    label: String,
    model: String,
    prediction: PathBuf,
}

#[derive(Debug)]
struct Item {
    image_id: String,
    image: PathBuf,
    ground_truth: PathBuf,
    slots: Vec<Slot>,
}

#[derive(Debug)]
struct Ledger {
    file: File,
    completed: HashSet<(String, String)>,
    rankings: Vec<HumanRanking>,
}

/// Blinded ranking session over a fixed image set and model set.
///
/// Reads (task fetch, asset rendering) share a lock; submissions go through
/// a single mutex that also guards the append-only rankings file, so a
/// ranking is on disk before it counts as completed.
#[derive(Debug)]
pub struct ReviewSession {
    seed: u64,
    items: Vec<Item>,
    by_id: HashMap<String, usize>,
    handles: RwLock<HashMap<String, Asset>>,
    ledger: Mutex<Ledger>,
    scores: OnceLock<ScoreTable>,
}

fn blind_label(i: usize) -> String {
    let mut label = String::new();
    let mut n = i + 1;
    while n > 0 {
        n -= 1;
        label.insert(0, char::from(b'A' + (n % 26) as u8));
        n /= 26;
    }
    label
}

fn digest_u64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

fn handle_for(seed: u64, image_id: &str, slot: &str) -> String {
    let mut h = Sha256::new();
    for p in [b"asset".as_slice(), &seed.to_le_bytes(), image_id.as_bytes(), slot.as_bytes()] {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect()
}

/// Model order behind labels A, B, ... for one image.
fn permutation(seed: u64, image_id: &str, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(digest_u64(&[&seed.to_le_bytes(), image_id.as_bytes()]));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

impl ReviewSession {
    /// Resolves predictions, fixes the image order and label permutations,
    /// and restores completed tasks from an existing rankings file.
    pub fn open(config: SessionConfig) -> Result<Self, ReviewError> {
        if config.models.len() < 2 {
            return Err(ReviewError::SessionNotInitialized(
                "at least two models are required".into(),
            ));
        }
        let mut per_model = Vec::new();
        for run in &config.models {
            let resolved = resolve_run(&config.manifest, run, config.split)?;
            let map: HashMap<String, PathBuf> = resolved
                .pairs
                .into_iter()
                .map(|p| (p.record_id, p.prediction))
                .collect();
            per_model.push((run.model_name.clone(), map));
        }
        let mut ids: Vec<&str> = config
            .manifest
            .records_in(config.split)
            .map(|r| r.id.as_str())
            .filter(|id| per_model.iter().all(|(_, m)| m.contains_key(*id)))
            .collect();
        if ids.is_empty() {
            return Err(ReviewError::SessionNotInitialized(format!(
                "no {} image has a prediction from every model",
                config.split
            )));
        }
        ids.sort_unstable();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));

        let items: Vec<Item> = ids
            .iter()
            .map(|&id| {
                let record = config.manifest.get(id).expect("id from manifest");
                let slots = permutation(config.seed, id, per_model.len())
                    .into_iter()
                    .enumerate()
                    .map(|(k, m)| Slot {
                        label: blind_label(k),
                        model: per_model[m].0.clone(),
                        prediction: per_model[m].1[id].clone(),
                    })
                    .collect();
                Item {
                    image_id: id.to_string(),
                    image: config.manifest.resolve(&record.image_path),
                    ground_truth: config.manifest.resolve(&record.mask_path),
                    slots,
                }
            })
            .collect();
        let by_id = items
            .iter()
            .enumerate()
            .map(|(i, item)| (item.image_id.clone(), i))
            .collect();

        let rankings = if config.rankings_path.exists() {
            read_rankings(&config.rankings_path)?
        } else {
            Vec::new()
        };
        let completed = rankings
            .iter()
            .map(|r| (r.image_id.clone(), r.annotator_id.clone()))
            .collect();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&config.rankings_path)
            .map_err(ReviewError::Persist)?;
        Ok(Self {
            seed: config.seed,
            items,
            by_id,
            handles: RwLock::new(HashMap::new()),
            ledger: Mutex::new(Ledger {
                file,
                completed,
                rankings,
            }),
            scores: OnceLock::new(),
        })
    }

    pub fn image_count(&self) -> usize {
        self.items.len()
    }

    fn ledger(&self) -> std::sync::MutexGuard<'_, Ledger> {
        self.ledger.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn next_task(&self, annotator_id: &str) -> Result<TaskResponse, ReviewError> {
        let annotator = annotator_id.trim();
        if annotator.is_empty() {
            return Err(ReviewError::EmptyAnnotator);
        }
        let pending: Vec<&Item> = {
            let ledger = self.ledger();
            self.items
                .iter()
                .filter(|it| !ledger.completed.contains(&(it.image_id.clone(), annotator.to_string())))
                .collect()
        };
        let Some(item) = pending.first() else {
            return Ok(TaskResponse::Done {
                completed_count: self.items.len(),
            });
        };
        let original = handle_for(self.seed, &item.image_id, "original");
        let mut handles = self.handles.write().unwrap_or_else(|e| e.into_inner());
        handles.insert(
            original.clone(),
            Asset::Original {
                image: item.image.clone(),
            },
        );
        let candidates = item
            .slots
            .iter()
            .map(|slot| {
                let handle = handle_for(self.seed, &item.image_id, &slot.label);
                handles.insert(
                    handle.clone(),
                    Asset::Candidate {
                        image: item.image.clone(),
                        prediction: slot.prediction.clone(),
                    },
                );
                Candidate {
                    blind_label: slot.label.clone(),
                    asset_handle: handle,
                }
            })
            .collect();
        Ok(TaskResponse::Task(RankingTask {
            image_id: item.image_id.clone(),
            original_image_ref: original,
            candidates,
            remaining_count: pending.len(),
        }))
    }

    /// Resolves labels to model names and appends the ranking durably
    /// before acknowledging.
    pub fn submit_ranking(
        &self,
        annotator_id: &str,
        image_id: &str,
        ordered_labels: &[String],
    ) -> Result<Acknowledgment, ReviewError> {
        let annotator = annotator_id.trim();
        if annotator.is_empty() {
            return Err(ReviewError::EmptyAnnotator);
        }
        let item = self
            .by_id
            .get(image_id)
            .map(|&i| &self.items[i])
            .ok_or_else(|| ReviewError::UnknownTask(image_id.to_string()))?;
        let expected: Vec<String> = item.slots.iter().map(|s| s.label.clone()).collect();
        let mut sorted = ordered_labels.to_vec();
        sorted.sort();
        if sorted != expected {
            return Err(ReviewError::LabelMismatch {
                expected,
                got: ordered_labels.to_vec(),
            });
        }
        let ordering: Vec<String> = ordered_labels
            .iter()
            .map(|l| {
                let slot = item.slots.iter().find(|s| &s.label == l).expect("label checked");
                slot.model.clone()
            })
            .collect();
        let ranking = HumanRanking::new(image_id, annotator, ordering, Utc::now())?;

        let mut ledger = self.ledger();
        let key = (image_id.to_string(), annotator.to_string());
        if ledger.completed.contains(&key) {
            return Err(ReviewError::DuplicateSubmission {
                image_id: key.0,
                annotator_id: key.1,
            });
        }
        append_ranking(&mut ledger.file, &ranking).map_err(ReviewError::Persist)?;
        ledger.completed.insert(key);
        ledger.rankings.push(ranking);
        let remaining = self
            .items
            .iter()
            .filter(|it| !ledger.completed.contains(&(it.image_id.clone(), annotator.to_string())))
            .count();
        Ok(Acknowledgment {
            image_id: image_id.to_string(),
            remaining_count: remaining,
        })
    }

    /// PNG bytes for a handle issued by [`next_task`](Self::next_task).
    pub fn serve_asset(&self, handle: &str) -> Result<Vec<u8>, ReviewError> {
        let asset = self
            .handles
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(handle)
            .cloned()
            .ok_or(ReviewError::UnknownHandle)?;
        let asset_err = |e: &dyn std::fmt::Display| ReviewError::Asset(e.to_string());
        let load_rgb = |p: &Path| image::open(p).map(|i| i.to_rgb8()).map_err(|e| asset_err(&e));
        let out = match asset {
            Asset::Original { image } => load_rgb(&image)?,
            Asset::Candidate { image, prediction } => {
                let rgb = load_rgb(&image)?;
                let alpha = load_mask(&prediction).map_err(|e| asset_err(&e))?;
                composite_over_checkerboard(&rgb, &alpha, CHECKER_CELL).map_err(|e| asset_err(&e))?
            }
        };
        encode_png(&out).map_err(|e| asset_err(&e))
    }

    pub fn rankings(&self) -> Vec<HumanRanking> {
        self.ledger().rankings.clone()
    }

    fn score_table(&self) -> Result<&ScoreTable, ReviewError> {
        if let Some(t) = self.scores.get() {
            return Ok(t);
        }
        let mut table = ScoreTable::new(&MetricId::ALL);
        for item in &self.items {
            let gt = load_mask(&item.ground_truth).map_err(|e| ReviewError::Asset(e.to_string()))?;
            for slot in &item.slots {
                let pred = load_mask(&slot.prediction).map_err(|e| ReviewError::Asset(e.to_string()))?;
                let pair = MaskPair::new(pred, gt.clone()).map_err(|e| ReviewError::Asset(e.to_string()))?;
                table.insert_scores(&item.image_id, &slot.model, &evaluate_all(&pair, &EvalConfig::default()));
            }
        }
        Ok(self.scores.get_or_init(|| table))
    }

    /// Concordance over the rankings submitted so far. With no comparable
    /// pair yet, every rate list is empty and the pair count is zero.
    pub fn concordance(&self, tie_policy: TiePolicy) -> Result<ConcordanceReport, ReviewError> {
        let table = self.score_table()?;
        let rankings = self.rankings();
        match compute_concordance(&rankings, table, tie_policy) {
            Ok(report) => Ok(report),
            Err(ConcordanceError::NoComparablePairs) => Ok(ConcordanceReport {
                per_metric: Vec::new(),
                comparable_pairs: 0,
                dropped_pairs: rankings
                    .iter()
                    .map(|r| r.ordering.len() * (r.ordering.len() - 1) / 2)
                    .sum(),
                tie_policy,
            }),
            Err(e) => Err(e.into()),
        }
    }
}
