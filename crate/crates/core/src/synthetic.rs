//! Deterministic synthetic masks and on-disk datasets for demos and tests.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{assign_splits, Category, DatasetManifest, DatasetRecord};
use crate::mask::{binarize, AlphaMask, MaskError, FOREGROUND_THRESHOLD};
use crate::morphology::{boundary_band, dilate, erode, StructuringElement};

/// A character-like silhouette: head, torso and a few thin hair strands,
/// with anti-aliased edges from 4x4 supersampling.
pub fn silhouette(width: usize, height: usize, seed: u64) -> AlphaMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let head = (
        w * rng.random_range(0.4..0.6),
        h * rng.random_range(0.25..0.35),
        w * rng.random_range(0.12..0.2),
        h * rng.random_range(0.12..0.18),
    );
    let torso = (
        w * rng.random_range(0.3..0.4),
        h * 0.45,
        w * rng.random_range(0.6..0.7),
        h * rng.random_range(0.85..0.95),
    );
    let strands: Vec<(f64, f64, f64)> = (0..rng.random_range(2..5))
        .map(|_| {
            (
                head.0 + rng.random_range(-1.0..1.0) * head.2,
                rng.random_range(-0.6..0.6),
                rng.random_range(0.6..1.4),
            )
        })
        .collect();
    let inside = |x: f64, y: f64| {
        let (dx, dy) = ((x - head.0) / head.2, (y - head.1) / head.3);
        if dx * dx + dy * dy <= 1.0 {
            return true;
        }
        if x >= torso.0 && x <= torso.2 && y >= torso.1 && y <= torso.3 {
            return true;
        }
        strands.iter().any(|&(x0, slope, half)| {
            let top = head.1 - head.3 * 1.3;
            y >= top && y <= head.1 && (x - (x0 + slope * (y - top))).abs() <= half
        })
    };
    AlphaMask::from_fn(width, height, |x, y| {
        let mut hits = 0u32;
        for sy in 0..4 {
            for sx in 0..4 {
                let px = x as f64 + (sx as f64 + 0.5) / 4.0;
                let py = y as f64 + (sy as f64 + 0.5) / 4.0;
                hits += inside(px, py) as u32;
            }
        }
        ((hits * 255 + 8) / 16) as u8
    })
}

/// How a synthetic prediction departs from its ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Degradation {
    Exact,
    /// Binary erosion of the foreground, `n` square steps.
    Erode(usize),
    /// Binary dilation of the foreground, `n` square steps.
    Dilate(usize),
    /// Background pixels raised to this alpha.
    Haze(u8),
    /// Pixels within `band` of the contour flipped with probability one half.
    BoundaryNoise { band: usize, seed: u64 },
}

pub fn degrade(gt: &AlphaMask, degradation: Degradation) -> AlphaMask {
    let se = StructuringElement::boundary_default();
    let fg = || binarize(gt, FOREGROUND_THRESHOLD);
    match degradation {
        Degradation::Exact => gt.clone(),
        Degradation::Erode(n) => erode(&fg(), se, n).to_alpha(),
        Degradation::Dilate(n) => dilate(&fg(), se, n).to_alpha(),
        Degradation::Haze(level) => {
            AlphaMask::from_fn(gt.width(), gt.height(), |x, y| gt.get(x, y).max(level))
        }
        Degradation::BoundaryNoise { band, seed } => {
            let fg = fg();
            let zone = dilate(&boundary_band(&fg, band), se, band);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = fg.clone();
            for y in 0..fg.height() {
                for x in 0..fg.width() {
                    if zone.get(x, y) && rng.random_bool(0.5) {
                        out.set(x, y, !fg.get(x, y));
                    }
                }
            }
            out.to_alpha()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub width: usize,
    pub height: usize,
    pub per_category: usize,
    pub categories: Vec<Category>,
    pub seed: u64,
    /// Prediction directories to write, by model name.
    pub models: Vec<(String, Degradation)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub manifest_path: PathBuf,
    pub manifest: DatasetManifest,
    /// `(model name, directory)` in input order.
    pub prediction_dirs: Vec<(String, PathBuf)>,
}

/// Writes images, masks, a split manifest and one prediction directory per
/// model under `root`.
pub fn write_fixture(root: &Path, spec: &FixtureSpec) -> Result<Fixture, MaskError> {
    let io_err = |path: &Path, e: &dyn std::fmt::Display| MaskError::EncodeError {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    for sub in ["images", "masks"] {
        let dir = root.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, &e))?;
    }
    let mut records = Vec::new();
    let mut truths = Vec::new();
    for (ci, &category) in spec.categories.iter().enumerate() {
        for k in 0..spec.per_category {
            let id = format!("{}_{k:03}", category.as_str());
            let seed = spec.seed ^ ((ci as u64) << 32 | k as u64);
            let gt = silhouette(spec.width, spec.height, seed);
            let image_rel = PathBuf::from(format!("images/{id}.png"));
            let mask_rel = PathBuf::from(format!("masks/{id}.png"));
            let image = image::RgbImage::from_fn(spec.width as u32, spec.height as u32, |x, y| {
                let a = gt.get(x as usize, y as usize);
                image::Rgb([a, (x * 7 % 256) as u8, (y * 5 % 256) as u8])
            });
            let image_path = root.join(&image_rel);
            image.save(&image_path).map_err(|e| io_err(&image_path, &e))?;
            gt.save_png(root.join(&mask_rel))?;
            records.push(DatasetRecord {
                id: id.clone(),
                image_path: image_rel,
                mask_path: mask_rel,
                category,
                split: None,
            });
            truths.push((id, gt));
        }
    }
    let manifest = DatasetManifest::new(records, root).map_err(|e| io_err(root, &e))?;
    let manifest = assign_splits(&manifest, spec.seed).map_err(|e| io_err(root, &e))?;
    let manifest_path = root.join("manifest.json");
    manifest.save(&manifest_path).map_err(|e| io_err(&manifest_path, &e))?;

    let mut prediction_dirs = Vec::new();
    for (name, degradation) in &spec.models {
        let dir = root.join("predictions").join(name);
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, &e))?;
        for (id, gt) in &truths {
            degrade(gt, *degradation).save_png(dir.join(format!("{id}.png")))?;
        }
        prediction_dirs.push((name.clone(), dir));
    }
    Ok(Fixture {
        manifest_path,
        manifest,
        prediction_dirs,
    })
}
