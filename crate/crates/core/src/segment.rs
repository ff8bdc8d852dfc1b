//! Fragment isolation, sample-area search and patch sampling.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{to_saturation, BinaryMask, MaskKind, Raster, SaturationMatrix};
use crate::par;
use crate::types::{ImageSet, Material};

/// Pixels used to fit cluster centers; the full image is still assigned.
const KMEANS_FIT_SAMPLES: usize = 200_000;
const KMEANS_MAX_ITERS: usize = 100;

/// Axis-aligned rectangle, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }
}

/// One isolated fragment: its bounding-box crop and region mask.
#[derive(Debug, Clone)]
pub struct FragmentRecord {
    pub fragment_id: String,
    pub raster: Raster,
    pub region: BinaryMask,
    pub label: Material,
    pub set: ImageSet,
}

impl FragmentRecord {
    pub fn new(
        fragment_id: impl Into<String>,
        raster: Raster,
        region: BinaryMask,
        label: Material,
        set: ImageSet,
    ) -> Result<Self> {
        region.same_shape(raster.width(), raster.height())?;
        Ok(Self {
            fragment_id: fragment_id.into(),
            raster,
            region: region.with_kind(MaskKind::Fragment),
            label,
            set,
        })
    }
}

/// A `patch`x`patch` saturation sample cut from a fragment's sample area.
#[derive(Debug, Clone)]
pub struct SamplePatch {
    pub fragment_id: String,
    pub sample_index: usize,
    pub label: Material,
    pub set: ImageSet,
    pub x: usize,
    pub y: usize,
    pub saturation: SaturationMatrix,
}

/// Result of clustering pixel colors.
#[derive(Debug, Clone)]
pub struct Clustering {
    pub centers: Vec<[f64; 3]>,
    pub assignments: Vec<usize>,
}

#[inline]
fn dist2(p: [u8; 3], c: &[f64; 3]) -> f64 {
    let dr = p[0] as f64 - c[0];
    let dg = p[1] as f64 - c[1];
    let db = p[2] as f64 - c[2];
    dr * dr + dg * dg + db * db
}

#[inline]
fn nearest_center(p: [u8; 3], centers: &[[f64; 3]]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = dist2(p, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn has_at_least_distinct(pixels: &[[u8; 3]], k: usize) -> bool {
    let mut seen = HashSet::with_capacity(k);
    for &p in pixels {
        seen.insert(p);
        if seen.len() >= k {
            return true;
        }
    }
    false
}

/// Lloyd's k-means over RGB with k-means++ seeding driven by `seed`.
pub fn kmeans(raster: &Raster, k: usize, seed: u64) -> Result<Clustering> {
    if k < 2 {
        return Err(Error::Clustering(format!("k must be at least 2, got {k}")));
    }
    let pixels = raster.pixels();
    if !has_at_least_distinct(pixels, k) {
        return Err(Error::Clustering(format!(
            "k = {k} exceeds the number of distinct colors"
        )));
    }

    let stride = pixels.len().div_ceil(KMEANS_FIT_SAMPLES).max(1);
    let fit: Vec<[u8; 3]> = pixels.iter().step_by(stride).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++: already-chosen colors have zero weight and are never redrawn.
    let mut centers: Vec<[f64; 3]> = Vec::with_capacity(k);
    let first = fit[rng.random_range(0..fit.len())];
    centers.push(first.map(f64::from));
    let mut d2: Vec<f64> = fit.iter().map(|&p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = fit.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            if d2[chosen] == 0.0 {
                // numeric tail: fall back to the farthest sample
                chosen = argmax(&d2);
            }
            fit[chosen]
        } else {
            // the subsample lost some colors; take one from the full image
            *pixels
                .iter()
                .find(|p| centers.iter().all(|c| dist2(**p, c) > 0.0))
                .expect("distinct color count checked above")
        };
        let c = next.map(f64::from);
        for (d, &p) in d2.iter_mut().zip(&fit) {
            *d = d.min(dist2(p, &c));
        }
        centers.push(c);
    }

    let mut assign = vec![usize::MAX; fit.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        let next = par::map(&fit, |&p| nearest_center(p, &centers));
        let changed = next != assign;
        assign = next;
        if !changed {
            break;
        }
        let mut sums = vec![[0.0f64; 3]; k];
        let mut counts = vec![0usize; k];
        for (&p, &a) in fit.iter().zip(&assign) {
            for c in 0..3 {
                sums[a][c] += p[c] as f64;
            }
            counts[a] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].map(|s| s / counts[j] as f64);
            } else {
                let dists: Vec<f64> = fit.iter().zip(&assign).map(|(&p, &a)| dist2(p, &centers[a])).collect();
                centers[j] = fit[argmax(&dists)].map(f64::from);
            }
        }
    }

    let assignments = par::map(pixels, |&p| nearest_center(p, &centers));
    Ok(Clustering { centers, assignments })
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Segments a plate into fragment masks.
///
/// The background cluster is the one owning most border pixels; every other
/// cluster is foreground. Foreground connected components (8-connectivity)
/// smaller than `min_area` are dropped. Masks come back largest first.
pub fn kmeans_segment(raster: &Raster, k: usize, seed: u64, min_area: usize) -> Result<Vec<BinaryMask>> {
    let clustering = kmeans(raster, k, seed)?;
    let (w, h) = (raster.width(), raster.height());
    let mut border = vec![0usize; k];
    for x in 0..w {
        border[clustering.assignments[x]] += 1;
        border[clustering.assignments[(h - 1) * w + x]] += 1;
    }
    for y in 0..h {
        border[clustering.assignments[y * w]] += 1;
        border[clustering.assignments[y * w + w - 1]] += 1;
    }
    let background = border
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let foreground = BinaryMask::new(
        w,
        h,
        clustering.assignments.iter().map(|&a| a != background).collect(),
        MaskKind::Fragment,
    )?;
    Ok(connected_components(&foreground, min_area))
}

/// 8-connected components with at least `min_area` pixels, largest first
/// (ties keep scan order).
pub fn connected_components(mask: &BinaryMask, min_area: usize) -> Vec<BinaryMask> {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut label = vec![u32::MAX; w * h];
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !bits[start] || label[start] != u32::MAX {
            continue;
        }
        let id = components.len() as u32;
        let mut members = Vec::new();
        label[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            members.push(i);
            let (x, y) = (i % w, i / w);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if bits[j] && label[j] == u32::MAX {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            }
        }
        components.push(members);
    }
    let mut kept: Vec<Vec<usize>> = components.into_iter().filter(|c| c.len() >= min_area).collect();
    // stable sort keeps scan order for equal areas
    kept.sort_by_key(|c| std::cmp::Reverse(c.len()));
    kept.into_iter()
        .map(|members| {
            let mut m = BinaryMask::empty(w, h, mask.kind);
            for i in members {
                m.set(i % w, i / w, true);
            }
            m
        })
        .collect()
}

/// Unset pixels enclosed by the mask: not 4-connected to the image border
/// through unset pixels.
pub fn interior_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut outside = vec![false; w * h];
    let mut stack = Vec::new();
    let seed = |i: usize, outside: &mut Vec<bool>, stack: &mut Vec<usize>| {
        if !bits[i] && !outside[i] {
            outside[i] = true;
            stack.push(i);
        }
    };
    for x in 0..w {
        seed(x, &mut outside, &mut stack);
        seed((h - 1) * w + x, &mut outside, &mut stack);
    }
    for y in 0..h {
        seed(y * w, &mut outside, &mut stack);
        seed(y * w + w - 1, &mut outside, &mut stack);
    }
    while let Some(i) = stack.pop() {
        let (x, y) = (i % w, i / w);
        let mut push = |j: usize| {
            if !bits[j] && !outside[j] {
                outside[j] = true;
                stack.push(j);
            }
        };
        if x > 0 {
            push(i - 1);
        }
        if x + 1 < w {
            push(i + 1);
        }
        if y > 0 {
            push(i - w);
        }
        if y + 1 < h {
            push(i + w);
        }
    }
    let holes = bits.iter().zip(&outside).map(|(&b, &o)| !b && !o).collect();
    BinaryMask::new(w, h, holes, MaskKind::Fill).expect("same shape")
}

/// Tight bounding box of the set pixels.
pub fn bounding_box(mask: &BinaryMask) -> Result<Rect> {
    let (w, h) = (mask.width(), mask.height());
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    if x0 == usize::MAX {
        return Err(Error::EmptyMask);
    }
    Ok(Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
}

/// Maximum-area axis-aligned rectangle of set pixels.
///
/// Row-by-row histogram of column run lengths with a monotonic stack,
/// O(W·H). Among equal areas the smallest top `y`, then smallest `x`, wins.
pub fn largest_inscribed_rectangle(mask: &BinaryMask) -> Result<Rect> {
    let (w, h) = (mask.width(), mask.height());
    let mut heights = vec![0usize; w];
    let mut best: Option<Rect> = None;
    let mut stack: Vec<usize> = Vec::with_capacity(w + 1);

    let better = |cand: &Rect, cur: &Option<Rect>| match cur {
        None => true,
        Some(b) => rect_rank(cand) > rect_rank(b),
    };

    for row in 0..h {
        for (x, hgt) in heights.iter_mut().enumerate() {
            *hgt = if mask.get(x, row) { *hgt + 1 } else { 0 };
        }
        stack.clear();
        for i in 0..=w {
            let cur = if i < w { heights[i] } else { 0 };
            while let Some(&top) = stack.last() {
                if heights[top] < cur {
                    break;
                }
                stack.pop();
                let bar = heights[top];
                if bar == 0 {
                    continue;
                }
                let left = stack.last().map_or(0, |&s| s + 1);
                let cand = Rect::new(left, row + 1 - bar, i - left, bar);
                if better(&cand, &best) {
                    best = Some(cand);
                }
            }
            stack.push(i);
        }
    }
    best.ok_or(Error::EmptyMask)
}

/// Ordering used to pick among inscribed rectangles: larger area, then
/// smaller `y`, smaller `x`, and finally the narrower one.
pub fn rect_rank(
    r: &Rect,
) -> (
    usize,
    std::cmp::Reverse<usize>,
    std::cmp::Reverse<usize>,
    std::cmp::Reverse<usize>,
) {
    use std::cmp::Reverse;
    (r.area(), Reverse(r.y), Reverse(r.x), Reverse(r.w))
}

/// Top-left corners of a `grid`x`grid` sampling pattern spread evenly over
/// `area`, row-major. Offsets round half up.
pub fn sample_positions(area: Rect, grid: usize, patch: usize) -> Result<Vec<(usize, usize)>> {
    if grid == 0 || patch == 0 {
        return Err(Error::Invalid("grid and patch must be positive".into()));
    }
    if area.w < patch || area.h < patch {
        return Err(Error::FragmentTooSmall {
            width: area.w,
            height: area.h,
            patch,
        });
    }
    let offsets = |origin: usize, extent: usize| -> Vec<usize> {
        let slack = extent - patch;
        (0..grid)
            .map(|i| {
                if grid == 1 {
                    origin
                } else {
                    let den = grid - 1;
                    origin + (2 * i * slack + den) / (2 * den)
                }
            })
            .collect()
    };
    let xs = offsets(area.x, area.w);
    let ys = offsets(area.y, area.h);
    Ok(ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect())
}

/// Cuts `patch`x`patch` saturation samples at `positions`, in order.
pub fn extract_patches(
    fragment: &FragmentRecord,
    positions: &[(usize, usize)],
    patch: usize,
) -> Result<Vec<SamplePatch>> {
    let (w, h) = (fragment.raster.width(), fragment.raster.height());
    positions
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            if x + patch > w || y + patch > h {
                return Err(Error::OutOfBounds {
                    x,
                    y,
                    patch,
                    width: w,
                    height: h,
                });
            }
            let crop = fragment.raster.crop(x, y, patch, patch)?;
            Ok(SamplePatch {
                fragment_id: fragment.fragment_id.clone(),
                sample_index: i,
                label: fragment.label,
                set: fragment.set,
                x,
                y,
                saturation: to_saturation(&crop),
            })
        })
        .collect()
}
