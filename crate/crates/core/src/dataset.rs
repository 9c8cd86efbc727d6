//! Dataset manifests, stratified splits and hard-example curation.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::{load_mask, FOREGROUND_THRESHOLD};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Reference,
    Emotion,
    Pose,
    Factory,
    Action,
    Items,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Reference,
        Category::Emotion,
        Category::Pose,
        Category::Factory,
        Category::Action,
        Category::Items,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Reference => "reference",
            Category::Emotion => "emotion",
            Category::Pose => "pose",
            Category::Factory => "factory",
            Category::Action => "action",
            Category::Items => "items",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| DatasetError::UnknownCategory(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            _ => Err(DatasetError::UnknownSplit(s.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("records already carry split assignments")]
    AlreadySplit,
    #[error("category {0} has no records")]
    EmptyCategory(Category),
    #[error("manifest has no records")]
    NoRecords,
    #[error("target size {target} exceeds the {available} scored records")]
    TargetTooLarge { target: usize, available: usize },
    #[error("invalid curation policy: {0}")]
    InvalidPolicy(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("unknown split `{0}`")]
    UnknownSplit(String),
    #[error("unsupported manifest version {0}")]
    UnsupportedVersion(u32),
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("record `{0}` has an empty path")]
    EmptyPath(String),
    #[error("manifest I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed scores file {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    #[serde(rename = "image")]
    pub image_path: PathBuf,
    #[serde(rename = "mask")]
    pub mask_path: PathBuf,
    pub category: Category,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// Ordered record list. Paths are relative to `base_dir` (the directory the
/// manifest was loaded from).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub records: Vec<DatasetRecord>,
    pub seed: Option<u64>,
    pub base_dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    version: u32,
    #[serde(default)]
    seed: Option<u64>,
    records: Vec<DatasetRecord>,
}

impl DatasetManifest {
    /// Builds a manifest, rejecting duplicate ids and empty paths.
    pub fn new(records: Vec<DatasetRecord>, base_dir: impl Into<PathBuf>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(DatasetError::DuplicateId(r.id.clone()));
            }
            if r.image_path.as_os_str().is_empty() || r.mask_path.as_os_str().is_empty() {
                return Err(DatasetError::EmptyPath(r.id.clone()));
            }
        }
        Ok(Self {
            records,
            seed: None,
            base_dir: base_dir.into(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base).map_err(|e| match e {
            DatasetError::Json { source, .. } => DatasetError::Json {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, DatasetError> {
        let file: ManifestFile = serde_json::from_str(text).map_err(|source| DatasetError::Json {
            path: "<memory>".to_string(),
            source,
        })?;
        if file.version != MANIFEST_VERSION {
            return Err(DatasetError::UnsupportedVersion(file.version));
        }
        let mut manifest = Self::new(file.records, base_dir)?;
        manifest.seed = file.seed;
        Ok(manifest)
    }

    pub fn to_json(&self) -> String {
        let file = ManifestFile {
            version: MANIFEST_VERSION,
            seed: self.seed,
            records: self.records.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("manifest serializes");
        text.push('\n');
        text
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn resolve(&self, relative: &Path) -> PathBuf {
        self.base_dir.join(relative)
    }

    pub fn get(&self, id: &str) -> Option<&DatasetRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn records_in(&self, split: Split) -> impl Iterator<Item = &DatasetRecord> {
        self.records.iter().filter(move |r| r.split == Some(split))
    }

    /// `(train, validation, test)` counts per category.
    pub fn split_counts(&self) -> BTreeMap<Category, (usize, usize, usize)> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            let entry = counts.entry(r.category).or_insert((0, 0, 0));
            match r.split {
                Some(Split::Train) => entry.0 += 1,
                Some(Split::Validation) => entry.1 += 1,
                Some(Split::Test) => entry.2 += 1,
                None => {}
            }
        }
        counts
    }
}

/// Split sizes for a category of `n` records: train `floor(0.8 n)`,
/// validation `round_half_up(0.1 n)`, test the remainder.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = 8 * n / 10;
    let validation = (2 * n + 10) / 20;
    (train, validation, n - train - validation)
}

/// Assigns train/validation/test per category.
///
/// Within each category the records are ordered by id, shuffled with a
/// ChaCha8 stream seeded from `seed` and the category, and cut according to
/// [`split_sizes`]. The result depends only on the record ids and the seed.
/// Categories without records are skipped; a manifest with no records at all
/// is rejected.
pub fn assign_splits(manifest: &DatasetManifest, seed: u64) -> Result<DatasetManifest, DatasetError> {
    if manifest.records.iter().any(|r| r.split.is_some()) {
        return Err(DatasetError::AlreadySplit);
    }
    let mut by_category: BTreeMap<Category, Vec<&str>> = BTreeMap::new();
    for r in &manifest.records {
        by_category.entry(r.category).or_default().push(&r.id);
    }
    if by_category.is_empty() {
        return Err(DatasetError::NoRecords);
    }
    let mut assignment: BTreeMap<&str, Split> = BTreeMap::new();
    for (category, mut ids) in by_category {
        ids.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(category as u64);
        ids.shuffle(&mut rng);
        let (train, validation, _) = split_sizes(ids.len());
        for (i, id) in ids.into_iter().enumerate() {
            let split = if i < train {
                Split::Train
            } else if i < train + validation {
                Split::Validation
            } else {
                Split::Test
            };
            assignment.insert(id, split);
        }
    }
    let records = manifest
        .records
        .iter()
        .map(|r| DatasetRecord {
            split: Some(assignment[r.id.as_str()]),
            ..r.clone()
        })
        .collect();
    Ok(DatasetManifest {
        records,
        seed: Some(seed),
        base_dir: manifest.base_dir.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CurationPolicy {
    /// Baseline scores at or above this are "easy".
    pub easy_score_threshold: f64,
    /// Cap on easy examples as a fraction of `target_size`.
    pub easy_fraction: f64,
    pub target_size: usize,
}

impl CurationPolicy {
    pub fn new(target_size: usize) -> Self {
        Self {
            easy_score_threshold: 0.99,
            easy_fraction: 0.20,
            target_size,
        }
    }

    fn validate(&self) -> Result<(), DatasetError> {
        if !(0.0..=1.0).contains(&self.easy_fraction) {
            return Err(DatasetError::InvalidPolicy(format!(
                "easy fraction {} outside [0, 1]",
                self.easy_fraction
            )));
        }
        if self.target_size == 0 {
            return Err(DatasetError::InvalidPolicy("target size must be at least 1".into()));
        }
        if self.easy_score_threshold.is_nan() {
            return Err(DatasetError::InvalidPolicy("threshold is NaN".into()));
        }
        Ok(())
    }

    pub fn easy_cap(&self) -> usize {
        (self.easy_fraction * self.target_size as f64).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationResult {
    /// Hard examples (worst first) followed by easy ones.
    pub selected: Vec<DatasetRecord>,
    pub hard_count: usize,
    pub easy_count: usize,
    /// Set when the cap prevented reaching the target size.
    pub short: bool,
}

/// Hard-example-first selection with a cap on easy examples.
///
/// Easy examples (score at or above the threshold) fill up to
/// `floor(easy_fraction * target)` slots; hard examples fill the rest, lowest
/// baseline score first. Ties are broken by record id.
pub fn curate(
    scored: &[(DatasetRecord, f64)],
    policy: &CurationPolicy,
) -> Result<CurationResult, DatasetError> {
    policy.validate()?;
    if policy.target_size > scored.len() {
        return Err(DatasetError::TargetTooLarge {
            target: policy.target_size,
            available: scored.len(),
        });
    }
    let by_score = |a: &&(DatasetRecord, f64), b: &&(DatasetRecord, f64)| {
        a.1.total_cmp(&b.1).then_with(|| a.0.id.cmp(&b.0.id))
    };
    let (mut hard, mut easy): (Vec<_>, Vec<_>) = scored
        .iter()
        .partition(|(_, score)| *score < policy.easy_score_threshold);
    hard.sort_by(by_score);
    easy.sort_by(by_score);

    let easy_count = policy.easy_cap().min(easy.len());
    let hard_count = hard.len().min(policy.target_size - easy_count);
    let selected: Vec<DatasetRecord> = hard[..hard_count]
        .iter()
        .chain(&easy[..easy_count])
        .map(|(r, _)| r.clone())
        .collect();
    Ok(CurationResult {
        short: selected.len() < policy.target_size,
        selected,
        hard_count,
        easy_count,
    })
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    id: String,
    image: PathBuf,
    mask: PathBuf,
    category: String,
    score: f64,
}

/// Reads a CSV with header `id,image,mask,category,score`.
pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<(DatasetRecord, f64)>, DatasetError> {
    let path = path.as_ref();
    let csv_err = |source| DatasetError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for row in reader.deserialize::<ScoreRow>() {
        let row = row.map_err(csv_err)?;
        out.push((
            DatasetRecord {
                id: row.id,
                image_path: row.image,
                mask_path: row.mask,
                category: row.category.parse()?,
                split: None,
            },
            row.score,
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ManifestIssue {
    MissingFile { id: String, path: PathBuf },
    UndecodableMask { id: String, reason: String },
    UnreadableImage { id: String, reason: String },
    DimensionMismatch {
        id: String,
        image: (u32, u32),
        mask: (u32, u32),
    },
    DuplicateId { id: String },
    EmptyForeground { id: String },
}

impl ManifestIssue {
    pub fn id(&self) -> &str {
        match self {
            ManifestIssue::MissingFile { id, .. }
            | ManifestIssue::UndecodableMask { id, .. }
            | ManifestIssue::UnreadableImage { id, .. }
            | ManifestIssue::DimensionMismatch { id, .. }
            | ManifestIssue::DuplicateId { id }
            | ManifestIssue::EmptyForeground { id } => id,
        }
    }
}

impl fmt::Display for ManifestIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifestIssue::MissingFile { id, path } => {
                write!(f, "{id}: missing file {}", path.display())
            }
            ManifestIssue::UndecodableMask { id, reason } => {
                write!(f, "{id}: mask cannot be decoded ({reason})")
            }
            ManifestIssue::UnreadableImage { id, reason } => {
                write!(f, "{id}: image cannot be read ({reason})")
            }
            ManifestIssue::DimensionMismatch { id, image, mask } => write!(
                f,
                "{id}: image is {}x{} but mask is {}x{}",
                image.0, image.1, mask.0, mask.1
            ),
            ManifestIssue::DuplicateId { id } => write!(f, "{id}: duplicate id"),
            ManifestIssue::EmptyForeground { id } => {
                write!(f, "{id}: mask has no foreground pixel")
            }
        }
    }
}

fn check_record(manifest: &DatasetManifest, record: &DatasetRecord) -> Vec<ManifestIssue> {
    let mut issues = Vec::new();
    let image_path = manifest.resolve(&record.image_path);
    let mask_path = manifest.resolve(&record.mask_path);
    let id = || record.id.clone();
    let mut image_dims = None;
    if image_path.is_file() {
        match image::image_dimensions(&image_path) {
            Ok(d) => image_dims = Some(d),
            Err(e) => issues.push(ManifestIssue::UnreadableImage {
                id: id(),
                reason: e.to_string(),
            }),
        }
    } else {
        issues.push(ManifestIssue::MissingFile {
            id: id(),
            path: record.image_path.clone(),
        });
    }
    if !mask_path.is_file() {
        issues.push(ManifestIssue::MissingFile {
            id: id(),
            path: record.mask_path.clone(),
        });
        return issues;
    }
    match load_mask(&mask_path) {
        Ok(mask) => {
            let mask_dims = (mask.width() as u32, mask.height() as u32);
            if let Some(image) = image_dims {
                if image != mask_dims {
                    issues.push(ManifestIssue::DimensionMismatch {
                        id: id(),
                        image,
                        mask: mask_dims,
                    });
                }
            }
            if mask.count_above(FOREGROUND_THRESHOLD) == 0 {
                issues.push(ManifestIssue::EmptyForeground { id: id() });
            }
        }
        Err(e) => issues.push(ManifestIssue::UndecodableMask {
            id: id(),
            reason: e.to_string(),
        }),
    }
    issues
}

/// Checks every record's files. Issues come back sorted by record id; an
/// empty list means the manifest is clean.
pub fn validate_manifest(manifest: &DatasetManifest) -> Vec<ManifestIssue> {
    let mut seen = HashSet::new();
    let mut issues: Vec<ManifestIssue> = manifest
        .records
        .iter()
        .filter(|r| !seen.insert(r.id.as_str()))
        .map(|r| ManifestIssue::DuplicateId { id: r.id.clone() })
        .collect();
    issues.extend(
        manifest
            .records
            .par_iter()
            .flat_map_iter(|r| check_record(manifest, r))
            .collect::<Vec<_>>(),
    );
    issues.sort_by(|a, b| a.id().cmp(b.id()).then_with(|| a.cmp(b)));
    issues
}
