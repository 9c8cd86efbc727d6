use super::{MetricId, MetricValue, EPS};
use crate::mask::{MaskPair, FOREGROUND_THRESHOLD};

/// Balance between the object-aware and region-aware terms.
pub const S_ALPHA: f64 = 0.5;

/// Exact integer sums over a set of pixels; prediction in raw 0..=255 units,
/// truth as 0/1. Keeping everything integral until the final ratios makes
/// the score independent of pixel visiting order.
#[derive(Debug, Default, Clone, Copy)]
struct Moments {
    n: u64,
    sum_p: u64,
    sum_pp: u64,
    sum_g: u64,
    sum_pg: u64,
}

impl Moments {
    fn add(&mut self, p: u8, g: bool) {
        let p = u64::from(p);
        self.n += 1;
        self.sum_p += p;
        self.sum_pp += p * p;
        if g {
            self.sum_g += 1;
            self.sum_pg += p;
        }
    }

    /// `n * sum(a*b) - sum(a) * sum(b)`, i.e. `n (n - 1)` times the sample
    /// covariance.
    fn scatter(n: u64, sum_ab: u64, sum_a: u64, sum_b: u64) -> i128 {
        i128::from(n) * i128::from(sum_ab) - i128::from(sum_a) * i128::from(sum_b)
    }

    /// Structural similarity of one region.
    fn ssim(&self) -> f64 {
        let n = self.n as f64;
        let x = self.sum_p as f64 / (255.0 * n);
        let y = self.sum_g as f64 / n;
        let (var_p, var_g, cov) = if self.n > 1 {
            (
                Self::scatter(self.n, self.sum_pp, self.sum_p, self.sum_p),
                Self::scatter(self.n, self.sum_g, self.sum_g, self.sum_g),
                Self::scatter(self.n, self.sum_pg, self.sum_p, self.sum_g),
            )
        } else {
            (0, 0, 0)
        };
        let alpha_zero = self.sum_p == 0 || self.sum_g == 0 || cov == 0;
        let beta_zero = (self.sum_p == 0 && self.sum_g == 0) || (var_p == 0 && var_g == 0);
        if alpha_zero {
            return if beta_zero { 1.0 } else { 0.0 };
        }
        let norm = n * (n - 1.0);
        let sigma_p = var_p as f64 / (norm * 255.0 * 255.0);
        let sigma_g = var_g as f64 / norm;
        let sigma_pg = cov as f64 / (norm * 255.0);
        let alpha = 4.0 * x * y * sigma_pg;
        let beta = (x * x + y * y) * (sigma_p + sigma_g);
        alpha / (beta + EPS)
    }
}

/// Object similarity of values `v / 255` over one class region.
fn object_similarity(n: u64, sum: u64, sum_sq: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let mean = sum as f64 / (255.0 * nf);
    let std = if n > 1 {
        let scatter = Moments::scatter(n, sum_sq, sum, sum) as f64;
        (scatter / (nf * (nf - 1.0) * 255.0 * 255.0)).sqrt()
    } else {
        0.0
    };
    2.0 * mean / (mean * mean + 1.0 + std + EPS)
}

/// Split positions nearest to a centroid coordinate `sum / count` measured
/// from pixel centres. When the centroid sits exactly on a pixel centre both
/// neighbouring boundaries are returned, which keeps the split symmetric
/// under flips.
fn split_positions(sum: u64, count: u64) -> Vec<usize> {
    // boundary coordinate u = (2 sum + count) / (2 count)
    let num = 2 * sum + count;
    let den = 2 * count;
    let floor = (num / den) as usize;
    let rem = num % den;
    match (2 * rem).cmp(&den) {
        std::cmp::Ordering::Less => vec![floor],
        std::cmp::Ordering::Greater => vec![floor + 1],
        std::cmp::Ordering::Equal => vec![floor, floor + 1],
    }
}

/// Structure measure: object-aware plus region-aware similarity.
///
/// The prediction is read as `v / 255`; the ground truth is binarized at 128.
/// An all-background truth scores `1 - mean(pred)`, an all-foreground truth
/// `mean(pred)`. The region term splits both maps into four quadrants at the
/// foreground centroid and sums their area-weighted structural similarity.
pub fn s_measure(pair: &MaskPair) -> MetricValue {
    let (w, h) = (pair.width(), pair.height());
    let pred = pair.prediction().values();
    let gt: Vec<bool> = pair
        .ground_truth()
        .values()
        .iter()
        .map(|&g| g > FOREGROUND_THRESHOLD)
        .collect();
    let n = (w * h) as u64;

    let mut fg = (0u64, 0u64, 0u64);
    let mut bg = (0u64, 0u64, 0u64);
    let (mut sum_x, mut sum_y) = (0u64, 0u64);
    let mut total_p = 0u64;
    for (i, (&p, &g)) in pred.iter().zip(&gt).enumerate() {
        let p64 = u64::from(p);
        total_p += p64;
        if g {
            fg.0 += 1;
            fg.1 += p64;
            fg.2 += p64 * p64;
            sum_x += (i % w) as u64;
            sum_y += (i / w) as u64;
        } else {
            let q = 255 - p64;
            bg.0 += 1;
            bg.1 += q;
            bg.2 += q * q;
        }
    }
    let pred_mean = total_p as f64 / (255.0 * n as f64);
    let value = if fg.0 == 0 {
        1.0 - pred_mean
    } else if fg.0 == n {
        pred_mean
    } else {
        let u = fg.0 as f64 / n as f64;
        let object = u * object_similarity(fg.0, fg.1, fg.2)
            + (1.0 - u) * object_similarity(bg.0, bg.1, bg.2);

        let xs = split_positions(sum_x, fg.0);
        let ys = split_positions(sum_y, fg.0);
        let mut region = 0.0;
        for &sx in &xs {
            for &sy in &ys {
                let mut quadrants = [Moments::default(); 4];
                for (i, (&p, &g)) in pred.iter().zip(&gt).enumerate() {
                    let q = usize::from(i % w >= sx) + 2 * usize::from(i / w >= sy);
                    quadrants[q].add(p, g);
                }
                region += quadrants
                    .iter()
                    .filter(|m| m.n > 0)
                    .map(|m| m.n as f64 / n as f64 * m.ssim())
                    .sum::<f64>();
            }
        }
        region /= (xs.len() * ys.len()) as f64;
        S_ALPHA * object + (1.0 - S_ALPHA) * region
    };
    MetricValue::new(MetricId::SMeasure, value.clamp(0.0, 1.0))
}
