use std::collections::HashMap;
use std::sync::RwLock;

use sha2::{Digest, Sha256};

use crate::mask::MaskPair;
use crate::metrics::{EvalConfig, ImageScores};

type Key = [u8; 32];

/// Per-image scores keyed by a digest of both masks and the metric settings.
/// Safe to share between workers.
#[derive(Debug, Default)]
pub struct ScoreCache {
    entries: RwLock<HashMap<Key, ImageScores>>,
}

impl ScoreCache {
    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn get_or_compute(
        &self,
        pair: &MaskPair,
        cfg: &EvalConfig,
        compute: impl FnOnce() -> ImageScores,
    ) -> ImageScores {
        let key = digest(pair, cfg);
        if let Some(hit) = self.entries.read().expect("cache lock").get(&key) {
            return hit.clone();
        }
        let scores = compute();
        self.entries
            .write()
            .expect("cache lock")
            .entry(key)
            .or_insert(scores)
            .clone()
    }
}

fn digest(pair: &MaskPair, cfg: &EvalConfig) -> Key {
    let mut h = Sha256::new();
    h.update((pair.width() as u64).to_le_bytes());
    h.update((pair.height() as u64).to_le_bytes());
    h.update(pair.prediction().values());
    h.update(pair.ground_truth().values());
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    let mut key = [0u8; 32];
    key.copy_from_slice(&h.finalize());
    key
}
