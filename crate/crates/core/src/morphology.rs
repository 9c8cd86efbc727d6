//! Flat binary morphology and an exact Euclidean distance transform.

use std::cmp::Ordering;

use thiserror::Error;

use crate::mask::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Square3x3,
    Cross3x3,
}

/// Value assumed for pixels outside the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutOfBounds {
    AsBackground,
    AsForeground,
}

impl OutOfBounds {
    fn value(self) -> bool {
        matches!(self, OutOfBounds::AsForeground)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StructuringElement {
    shape: Shape,
    out_of_bounds: OutOfBounds,
}

impl StructuringElement {
    pub const fn new(shape: Shape, out_of_bounds: OutOfBounds) -> Self {
        Self {
            shape,
            out_of_bounds,
        }
    }

    /// Full 3x3 square, image border treated as background. Used for the
    /// Pixel Accuracy error mask so one-pixel artifacts on the border also go.
    pub const fn error_mask_default() -> Self {
        Self::new(Shape::Square3x3, OutOfBounds::AsBackground)
    }

    /// Full 3x3 square, image border treated as foreground so the canvas edge
    /// never counts as an object boundary.
    pub const fn boundary_default() -> Self {
        Self::new(Shape::Square3x3, OutOfBounds::AsForeground)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn out_of_bounds(&self) -> OutOfBounds {
        self.out_of_bounds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MorphologyError {
    #[error("mask has no set pixel")]
    EmptyMask,
}

/// Erosion: a bit survives iff every neighbour under `se` is set.
/// Zero iterations return a copy of the input.
pub fn erode(mask: &BinaryMask, se: StructuringElement, iterations: usize) -> BinaryMask {
    iterate(mask, iterations, |m| apply(m, se, true))
}

/// Dilation: a bit is set iff any neighbour under `se` is set.
pub fn dilate(mask: &BinaryMask, se: StructuringElement, iterations: usize) -> BinaryMask {
    iterate(mask, iterations, |m| apply(m, se, false))
}

fn iterate(
    mask: &BinaryMask,
    iterations: usize,
    step: impl Fn(&BinaryMask) -> BinaryMask,
) -> BinaryMask {
    let mut current = mask.clone();
    for _ in 0..iterations {
        current = step(&current);
    }
    current
}

/// One pass of erosion (`all = true`) or dilation (`all = false`).
fn apply(mask: &BinaryMask, se: StructuringElement, all: bool) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let oob = se.out_of_bounds.value();
    let bits = mask.bits();
    let combine = |a: bool, b: bool| if all { a && b } else { a || b };

    let at = |x: isize, y: isize| -> bool {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            oob
        } else {
            bits[y as usize * w + x as usize]
        }
    };

    match se.shape {
        Shape::Square3x3 => {
            // separable: horizontal pass, then vertical pass; an out-of-bounds
            // row reduces to `oob` under either operation
            let mut horizontal = vec![false; w * h];
            for y in 0..h {
                for x in 0..w {
                    let (xi, yi) = (x as isize, y as isize);
                    horizontal[y * w + x] =
                        combine(combine(at(xi - 1, yi), at(xi, yi)), at(xi + 1, yi));
                }
            }
            let row = |x: usize, y: isize| -> bool {
                if y < 0 || y >= h as isize {
                    oob
                } else {
                    horizontal[y as usize * w + x]
                }
            };
            BinaryMask::from_fn(w, h, |x, y| {
                let yi = y as isize;
                combine(combine(row(x, yi - 1), row(x, yi)), row(x, yi + 1))
            })
        }
        Shape::Cross3x3 => BinaryMask::from_fn(w, h, |x, y| {
            let (xi, yi) = (x as isize, y as isize);
            [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)]
                .iter()
                .map(|&(dx, dy)| at(xi + dx, yi + dy))
                .reduce(combine)
                .unwrap_or(false)
        }),
    }
}

/// Set pixels within `radius` (Chebyshev) of the mask boundary.
///
/// Computed as `mask AND NOT erode(mask, square, radius)` with the image
/// border treated as foreground. A radius of zero yields an empty band.
pub fn boundary_band(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let eroded = erode(mask, StructuringElement::boundary_default(), radius);
    mask.and_not(&eroded)
}

/// Per-pixel Euclidean distance to the nearest set pixel.
///
/// When several set pixels are equally close, `nearest_indices` holds the one
/// with the smallest row-major index and `nearest_ties` lists all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    squared: Vec<u64>,
    nearest: Vec<usize>,
    tie_offsets: Vec<usize>,
    tie_indices: Vec<usize>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Exact squared distances.
    pub fn squared_distances(&self) -> &[u64] {
        &self.squared
    }

    pub fn distance(&self, index: usize) -> f64 {
        (self.squared[index] as f64).sqrt()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.squared.iter().map(|&d| (d as f64).sqrt()).collect()
    }

    /// Row-major index of the nearest set pixel.
    pub fn nearest_indices(&self) -> &[usize] {
        &self.nearest
    }

    /// Every set pixel at the minimal distance from `index`, ascending.
    pub fn nearest_ties(&self, index: usize) -> &[usize] {
        &self.tie_indices[self.tie_offsets[index]..self.tie_offsets[index + 1]]
    }
}

/// Breakpoint between two parabolas, kept as an exact fraction `num / den`
/// with `den > 0`; `None` stands for negative infinity.
#[derive(Debug, Clone, Copy)]
struct Breakpoint(Option<(i64, i64)>);

impl Breakpoint {
    fn cmp_fraction(&self, num: i64, den: i64) -> Ordering {
        match self.0 {
            None => Ordering::Less,
            Some((n, d)) => {
                (i128::from(n) * i128::from(den)).cmp(&(i128::from(num) * i128::from(d)))
            }
        }
    }

    fn cmp_int(&self, x: i64) -> Ordering {
        self.cmp_fraction(x, 1)
    }
}

/// Closest set pixel within one column: the upper row on ties, plus whether
/// the mirrored row below is equally close.
#[derive(Debug, Clone, Copy)]
struct ColumnHit {
    row: usize,
    tied_below: bool,
}

/// Exact Euclidean distance transform (separable lower-envelope algorithm
/// in integer arithmetic).
pub fn distance_transform(mask: &BinaryMask) -> Result<DistanceField, MorphologyError> {
    if !mask.any() {
        return Err(MorphologyError::EmptyMask);
    }
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();

    let mut column: Vec<Option<ColumnHit>> = vec![None; w * h];
    let mut above: Vec<Option<usize>> = vec![None; h];
    for x in 0..w {
        let mut last = None;
        for (y, slot) in above.iter_mut().enumerate() {
            if bits[y * w + x] {
                last = Some(y);
            }
            *slot = last;
        }
        let mut below: Option<usize> = None;
        for y in (0..h).rev() {
            if bits[y * w + x] {
                below = Some(y);
            }
            column[y * w + x] = match (above[y], below) {
                (Some(a), Some(b)) if y - a < b - y => Some(ColumnHit { row: a, tied_below: false }),
                (Some(a), Some(b)) if y - a == b - y => Some(ColumnHit {
                    row: a,
                    tied_below: a != b,
                }),
                (_, Some(b)) => Some(ColumnHit { row: b, tied_below: false }),
                (Some(a), None) => Some(ColumnHit { row: a, tied_below: false }),
                (None, None) => None,
            };
        }
    }

    let mut squared = vec![0u64; w * h];
    let mut nearest = vec![0usize; w * h];
    let mut tie_offsets = Vec::with_capacity(w * h + 1);
    let mut tie_indices = Vec::with_capacity(w * h);
    tie_offsets.push(0);

    let mut vertices: Vec<usize> = Vec::with_capacity(w);
    let mut breaks: Vec<Breakpoint> = Vec::with_capacity(w);
    let mut candidates: Vec<(u64, usize)> = Vec::new();

    for y in 0..h {
        let parabola = |x: usize| -> Option<(i64, ColumnHit)> {
            column[y * w + x].map(|hit| ((hit.row as i64 - y as i64).pow(2), hit))
        };
        vertices.clear();
        breaks.clear();
        for q in 0..w {
            let Some((fq, _)) = parabola(q) else { continue };
            loop {
                let Some(&p) = vertices.last() else {
                    vertices.push(q);
                    breaks.push(Breakpoint(None));
                    break;
                };
                let (fp, _) = parabola(p).expect("vertex has a parabola");
                let (qi, pi) = (q as i64, p as i64);
                let num = (fq + qi * qi) - (fp + pi * pi);
                let den = 2 * (qi - pi);
                // a parabola touching the envelope at a single point stays so
                // its ties remain visible
                if breaks.last().expect("parallel to vertices").cmp_fraction(num, den)
                    == Ordering::Greater
                {
                    vertices.pop();
                    breaks.pop();
                } else {
                    vertices.push(q);
                    breaks.push(Breakpoint(Some((num, den))));
                    break;
                }
            }
        }

        let mut k = 0;
        for x in 0..w {
            let xi = x as i64;
            while k + 1 < vertices.len() && breaks[k + 1].cmp_int(xi) == Ordering::Less {
                k += 1;
            }
            candidates.clear();
            let mut j = k;
            loop {
                let col = vertices[j];
                let (fy, hit) = parabola(col).expect("vertex has a parabola");
                let dx = xi - col as i64;
                let d2 = (dx * dx + fy) as u64;
                candidates.push((d2, hit.row * w + col));
                if hit.tied_below {
                    candidates.push((d2, (2 * y - hit.row) * w + col));
                }
                if j + 1 < vertices.len() && breaks[j + 1].cmp_int(xi) != Ordering::Greater {
                    j += 1;
                } else {
                    break;
                }
            }
            let best = candidates.iter().map(|c| c.0).min().expect("one parabola per row");
            let start = tie_indices.len();
            tie_indices.extend(candidates.iter().filter(|c| c.0 == best).map(|c| c.1));
            tie_indices[start..].sort_unstable();
            squared[y * w + x] = best;
            nearest[y * w + x] = tie_indices[start];
            tie_offsets.push(tie_indices.len());
        }
    }

    Ok(DistanceField {
        width: w,
        height: h,
        squared,
        nearest,
        tie_offsets,
        tie_indices,
    })
}
