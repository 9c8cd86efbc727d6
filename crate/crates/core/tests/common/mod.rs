//! Direct per-pixel transcriptions of each metric, written without the
//! library's morphology, histograms, distance transform or integer moments.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toonbench_core::{AlphaMask, MaskPair};

pub const EPS: f64 = f64::EPSILON;

fn fg(v: u8) -> bool {
    v > 128
}

fn px(m: &AlphaMask) -> Vec<u8> {
    m.values().to_vec()
}

// ---------------------------------------------------------------- generators

/// Blobs of rectangles and ellipses with soft edges and sprinkled noise.
pub fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> AlphaMask {
    let shapes: Vec<(u8, f64, f64, f64, f64, u8)> = (0..rng.random_range(1..4))
        .map(|_| {
            (
                rng.random_range(0..2),
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(0.5..(w as f64 / 2.0).max(1.0)),
                rng.random_range(0.5..(h as f64 / 2.0).max(1.0)),
                rng.random_range(129..=255),
            )
        })
        .collect();
    let noise = rng.random_range(0.0..0.1);
    AlphaMask::from_fn(w, h, |x, y| {
        let mut v = 0u8;
        for &(kind, cx, cy, rx, ry, level) in &shapes {
            let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
            let inside = if kind == 0 {
                dx.abs() <= 1.0 && dy.abs() <= 1.0
            } else {
                dx * dx + dy * dy <= 1.0
            };
            if inside {
                v = v.max(level);
            }
        }
        if rng.random_bool(noise) {
            v = rng.random();
        }
        v
    })
}

/// Ground truth with both classes present and a prediction derived from it.
pub fn random_pair(rng: &mut ChaCha8Rng, w: usize, h: usize) -> MaskPair {
    let gt = loop {
        let m = random_mask(rng, w, h);
        let n = m.count_above(128);
        if n > 0 && n < w * h {
            break m;
        }
    };
    let pred = match rng.random_range(0..4) {
        0 => random_mask(rng, w, h),
        1 => {
            let p = rng.random_range(0.0..0.3);
            AlphaMask::from_fn(w, h, |x, y| {
                if rng.random_bool(p) {
                    rng.random()
                } else {
                    gt.get(x, y)
                }
            })
        }
        2 => {
            let (sx, sy) = (rng.random_range(0..3), rng.random_range(0..3));
            AlphaMask::from_fn(w, h, |x, y| {
                gt.get((x + sx).min(w - 1), (y + sy).min(h - 1))
            })
        }
        _ => {
            let j = rng.random_range(1..60);
            AlphaMask::from_fn(w, h, |x, y| {
                let v = i32::from(gt.get(x, y)) + rng.random_range(-j..=j);
                v.clamp(0, 255) as u8
            })
        }
    };
    MaskPair::new(pred, gt).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- PA

/// 3x3 square erosion, out-of-bounds neighbours counted as background.
pub fn erode_once(bits: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut keep = true;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    let inside = nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h;
                    if !inside || !bits[ny as usize * w + nx as usize] {
                        keep = false;
                    }
                }
            }
            out[y * w + x] = keep;
        }
    }
    out
}

pub fn pixel_accuracy(pair: &MaskPair, delta: u8) -> Option<f64> {
    let (w, h) = (pair.width(), pair.height());
    let (p, g) = (px(pair.prediction()), px(pair.ground_truth()));
    let fg_count = g.iter().filter(|&&v| fg(v)).count();
    if fg_count == 0 {
        return None;
    }
    let wrong: Vec<bool> = (0..w * h)
        .map(|i| (i32::from(p[i]) - i32::from(g[i])).abs() > i32::from(delta))
        .collect();
    let incorrect = erode_once(&wrong, w, h).iter().filter(|&&b| b).count();
    let acc = 1.0 - incorrect as f64 / fg_count as f64;
    let acc = if acc < 0.0 { 0.0 } else { acc };
    Some(acc * acc)
}

// ---------------------------------------------------------------- MAE / MSE

pub fn mae(pair: &MaskPair) -> f64 {
    let (p, g) = (px(pair.prediction()), px(pair.ground_truth()));
    let s: i64 = p.iter().zip(&g).map(|(&a, &b)| (i64::from(a) - i64::from(b)).abs()).sum();
    s as f64 / (255.0 * p.len() as f64)
}

pub fn mse(pair: &MaskPair) -> f64 {
    let (p, g) = (px(pair.prediction()), px(pair.ground_truth()));
    let s: i64 = p
        .iter()
        .zip(&g)
        .map(|(&a, &b)| (i64::from(a) - i64::from(b)).pow(2))
        .sum();
    s as f64 / (255.0 * 255.0 * p.len() as f64)
}

// ---------------------------------------------------------------- F-measure

pub fn f_measure(pair: &MaskPair) -> Option<f64> {
    let (p, g) = (px(pair.prediction()), px(pair.ground_truth()));
    if !g.iter().any(|&v| fg(v)) {
        return None;
    }
    let mut best = f64::NEG_INFINITY;
    for t in 0..=255u8 {
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for i in 0..p.len() {
            match (p[i] > t, fg(g[i])) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        let f = if tp == 0 {
            0.0
        } else {
            let precision = tp as f64 / (tp + fp) as f64;
            let recall = tp as f64 / (tp + fn_) as f64;
            1.3 * precision * recall / (0.3 * precision + recall)
        };
        best = best.max(f);
    }
    Some(best)
}

// ---------------------------------------------------------------- E-measure

pub fn e_measure(pair: &MaskPair) -> f64 {
    let (p, g) = (px(pair.prediction()), px(pair.ground_truth()));
    let n = p.len() as f64;
    let gb: Vec<f64> = g.iter().map(|&v| if fg(v) { 1.0 } else { 0.0 }).collect();
    let g_mean = gb.iter().sum::<f64>() / n;
    let mut best = f64::NEG_INFINITY;
    for t in 0..=255u8 {
        let pb: Vec<f64> = p.iter().map(|&v| if v > t { 1.0 } else { 0.0 }).collect();
        let p_mean = pb.iter().sum::<f64>() / n;
        let enhanced: f64 = if g_mean == 0.0 {
            pb.iter().map(|b| 1.0 - b).sum()
        } else if g_mean == 1.0 {
            pb.iter().sum()
        } else {
            (0..p.len())
                .map(|i| {
                    let a = pb[i] - p_mean;
                    let b = gb[i] - g_mean;
                    let align = 2.0 * a * b / (a * a + b * b + EPS);
                    (align + 1.0).powi(2) / 4.0
                })
                .sum()
        };
        let e = (enhanced / (n - 1.0 + EPS)).clamp(0.0, 1.0);
        best = best.max(e);
    }
    best
}

// ---------------------------------------------------------------- S-measure

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

fn object_score(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = mean(v);
    2.0 * m / (m * m + 1.0 + sample_var(v).sqrt() + EPS)
}

/// Region SSIM with the zero-case rules decided on raw integers.
fn region_ssim(p: &[u8], g: &[bool]) -> f64 {
    let n = p.len() as i128;
    let x: Vec<f64> = p.iter().map(|&v| f64::from(v) / 255.0).collect();
    let y: Vec<f64> = g.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let sum_p: i128 = p.iter().map(|&v| i128::from(v)).sum();
    let sum_g: i128 = g.iter().map(|&b| i128::from(b)).sum();
    let sum_pg: i128 = p.iter().zip(g).map(|(&v, &b)| if b { i128::from(v) } else { 0 }).sum();
    let cov_zero = n < 2 || n * sum_pg == sum_p * sum_g;
    let p_const = p.iter().all(|&v| v == p[0]);
    let g_const = g.iter().all(|&b| b == g[0]);
    let alpha_zero = sum_p == 0 || sum_g == 0 || cov_zero;
    let beta_zero = (sum_p == 0 && sum_g == 0) || n < 2 || (p_const && g_const);
    if alpha_zero {
        return if beta_zero { 1.0 } else { 0.0 };
    }
    let (mx, my) = (mean(&x), mean(&y));
    let cov = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() - 1) as f64;
    let alpha = 4.0 * mx * my * cov;
    let beta = (mx * mx + my * my) * (sample_var(&x) + sample_var(&y));
    alpha / (beta + EPS)
}

/// Pixel boundaries nearest to the mean coordinate, both on an exact tie.
fn splits(coords: &[usize]) -> Vec<usize> {
    let c = coords.iter().sum::<usize>() as f64 / coords.len() as f64 + 0.5;
    let lo = c.floor();
    if c - lo == 0.5 {
        vec![lo as usize, lo as usize + 1]
    } else {
        vec![c.round() as usize]
    }
}

pub fn s_measure(pair: &MaskPair) -> f64 {
    let (w, h) = (pair.width(), pair.height());
    let p = px(pair.prediction());
    let g: Vec<bool> = px(pair.ground_truth()).into_iter().map(fg).collect();
    let x: Vec<f64> = p.iter().map(|&v| f64::from(v) / 255.0).collect();
    let n = (w * h) as f64;
    let fg_n = g.iter().filter(|&&b| b).count();
    let value = if fg_n == 0 {
        1.0 - mean(&x)
    } else if fg_n == w * h {
        mean(&x)
    } else {
        let fg_vals: Vec<f64> = (0..w * h).filter(|&i| g[i]).map(|i| x[i]).collect();
        let bg_vals: Vec<f64> = (0..w * h).filter(|&i| !g[i]).map(|i| 1.0 - x[i]).collect();
        let u = fg_n as f64 / n;
        let object = u * object_score(&fg_vals) + (1.0 - u) * object_score(&bg_vals);

        let xs: Vec<usize> = (0..w * h).filter(|&i| g[i]).map(|i| i % w).collect();
        let ys: Vec<usize> = (0..w * h).filter(|&i| g[i]).map(|i| i / w).collect();
        let (sxs, sys) = (splits(&xs), splits(&ys));
        let mut region = 0.0;
        for &sx in &sxs {
            for &sy in &sys {
                let quads = [
                    (0..sx, 0..sy),
                    (sx..w, 0..sy),
                    (0..sx, sy..h),
                    (sx..w, sy..h),
                ];
                for (rx, ry) in quads {
                    let mut qp = Vec::new();
                    let mut qg = Vec::new();
                    for yy in ry.clone() {
                        for xx in rx.clone() {
                            qp.push(p[yy * w + xx]);
                            qg.push(g[yy * w + xx]);
                        }
                    }
                    if !qp.is_empty() {
                        region += qp.len() as f64 / n * region_ssim(&qp, &qg);
                    }
                }
            }
        }
        region /= (sxs.len() * sys.len()) as f64;
        0.5 * object + 0.5 * region
    };
    value.clamp(0.0, 1.0)
}

// ---------------------------------------------------------------- weighted F

pub fn weighted_f(pair: &MaskPair) -> Option<f64> {
    let (w, h) = (pair.width(), pair.height());
    let p = px(pair.prediction());
    let g: Vec<bool> = px(pair.ground_truth()).into_iter().map(fg).collect();
    let fg_idx: Vec<usize> = (0..w * h).filter(|&i| g[i]).collect();
    if fg_idx.is_empty() {
        return None;
    }
    let err: Vec<f64> = (0..w * h)
        .map(|i| (f64::from(p[i]) / 255.0 - if g[i] { 1.0 } else { 0.0 }).abs())
        .collect();

    // brute-force nearest foreground set and distance
    let mut dist = vec![0.0; w * h];
    let mut prop = err.clone();
    for i in 0..w * h {
        if g[i] {
            continue;
        }
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        let d2 = |j: usize| {
            let (dx, dy) = ((j % w) as i64 - x, (j / w) as i64 - y);
            dx * dx + dy * dy
        };
        let best = fg_idx.iter().map(|&j| d2(j)).min().unwrap();
        let ties: Vec<usize> = fg_idx.iter().copied().filter(|&j| d2(j) == best).collect();
        dist[i] = (best as f64).sqrt();
        prop[i] = ties.iter().map(|&j| err[j]).sum::<f64>() / ties.len() as f64;
    }

    // full 2-D 7x7 Gaussian, sigma 5, zero padding
    let mut kernel = [[0.0f64; 7]; 7];
    for (ky, row) in kernel.iter_mut().enumerate() {
        for (kx, k) in row.iter_mut().enumerate() {
            let (dx, dy) = (kx as f64 - 3.0, ky as f64 - 3.0);
            *k = (-(dx * dx + dy * dy) / 50.0).exp();
        }
    }
    let total: f64 = kernel.iter().flatten().sum();
    let mut smoothed = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0.0;
            for (ky, row) in kernel.iter().enumerate() {
                for (kx, k) in row.iter().enumerate() {
                    let (sx, sy) = (x + kx as i64 - 3, y + ky as i64 - 3);
                    if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h {
                        acc += k / total * prop[sy as usize * w + sx as usize];
                    }
                }
            }
            smoothed[y as usize * w + x as usize] = acc;
        }
    }

    let (mut fg_w, mut bg_w) = (0.0, 0.0);
    for i in 0..w * h {
        if g[i] {
            fg_w += err[i].min(smoothed[i]);
        } else {
            bg_w += err[i] * (2.0 - (0.5f64.ln() / 5.0 * dist[i]).exp());
        }
    }
    let n_fg = fg_idx.len() as f64;
    let tp = n_fg - fg_w;
    let recall = 1.0 - fg_w / n_fg;
    let precision = tp / (tp + bg_w + EPS);
    Some(2.0 * recall * precision / (recall + precision + EPS))
}

// ---------------------------------------------------------------- Boundary IoU

/// Foreground pixels within Chebyshev distance `r` of an in-image
/// background pixel.
pub fn band(bits: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    let r = r as i64;
    (0..w * h)
        .map(|i| {
            if !bits[i] {
                return false;
            }
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for ny in (y - r).max(0)..=(y + r).min(h as i64 - 1) {
                for nx in (x - r).max(0)..=(x + r).min(w as i64 - 1) {
                    if !bits[ny as usize * w + nx as usize] {
                        return true;
                    }
                }
            }
            false
        })
        .collect()
}

pub fn boundary_iou(pair: &MaskPair, ratio: f64) -> Option<f64> {
    let (w, h) = (pair.width(), pair.height());
    let diag = ((w * w + h * h) as f64).sqrt();
    let r = ((ratio * diag).round() as usize).max(1);
    let pb: Vec<bool> = px(pair.prediction()).into_iter().map(fg).collect();
    let gb: Vec<bool> = px(pair.ground_truth()).into_iter().map(fg).collect();
    let (bp, bg) = (band(&pb, w, h, r), band(&gb, w, h, r));
    let inter = (0..w * h).filter(|&i| bp[i] && bg[i]).count();
    let union = (0..w * h).filter(|&i| bp[i] || bg[i]).count();
    (union > 0).then(|| inter as f64 / union as f64)
}
