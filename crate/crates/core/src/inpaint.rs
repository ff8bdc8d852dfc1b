//! Exemplar-based region filling.
//!
//! Fill-front pixels are visited in priority order (confidence times data
//! term); each visit copies the unknown part of the best-matching source
//! patch, found by exhaustive sum-of-squared-differences search over every
//! fully known window of the image.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{dilate_mask, saturation, union_masks, value, BinaryMask, MaskKind, Raster};
use crate::par;
use crate::segment::interior_holes;

/// Keeps the data term from zeroing priorities in flat regions.
const DATA_TERM_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct FillJob {
    pub target: Raster,
    /// Pixels to synthesise.
    pub fill_region: BinaryMask,
    /// Known pixels usable as exemplars.
    pub source_region: BinaryMask,
    /// Odd window side, at least 3.
    pub patch_size: usize,
}

impl FillJob {
    pub fn new(target: Raster, fill_region: BinaryMask, source_region: BinaryMask, patch_size: usize) -> Result<Self> {
        let job = Self {
            target,
            fill_region: fill_region.with_kind(MaskKind::Fill),
            source_region,
            patch_size,
        };
        job.validate()?;
        Ok(job)
    }

    /// Job for a segmented fragment: the dilated text plus enclosed holes are
    /// filled from the remaining fragment pixels.
    ///
    /// Dilation is clipped to the fragment's extent (region plus holes).
    pub fn for_fragment(
        raster: Raster,
        region: &BinaryMask,
        text: Option<&BinaryMask>,
        patch_size: usize,
    ) -> Result<Self> {
        region.same_shape(raster.width(), raster.height())?;
        let holes = interior_holes(region);
        let extent = union_masks(region, &holes)?;
        let fill = match text {
            Some(t) => {
                t.same_shape(raster.width(), raster.height())?;
                let dilated = dilate_mask(t).intersection(&extent)?;
                union_masks(&dilated, &holes)?
            }
            None => holes,
        };
        let source = region.difference(&fill)?.with_kind(MaskKind::Fragment);
        Self::new(raster, fill, source, patch_size)
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.target.width(), self.target.height());
        self.fill_region.same_shape(w, h)?;
        self.source_region.same_shape(w, h)?;
        if self.patch_size < 3 || self.patch_size.is_multiple_of(2) {
            return Err(Error::Invalid(format!(
                "patch size must be odd and >= 3, got {}",
                self.patch_size
            )));
        }
        if self
            .fill_region
            .bits()
            .iter()
            .zip(self.source_region.bits())
            .any(|(&f, &s)| f && s)
        {
            return Err(Error::Invalid("fill and source regions overlap".into()));
        }
        Ok(())
    }
}

/// Fill result with per-iteration bookkeeping.
#[derive(Debug, Clone)]
pub struct FillOutcome {
    pub raster: Raster,
    /// Pixels still unfilled before each iteration.
    pub remaining_before: Vec<usize>,
    /// Normalised SSD of the chosen exemplar at each iteration.
    pub match_costs: Vec<f64>,
}

impl FillOutcome {
    pub fn iterations(&self) -> usize {
        self.remaining_before.len()
    }
}

pub fn fill_regions(job: &FillJob) -> Result<Raster> {
    fill_regions_traced(job).map(|o| o.raster)
}

struct FillState {
    w: usize,
    h: usize,
    half: usize,
    pixels: Vec<[u8; 3]>,
    gray: Vec<f64>,
    /// Source pixels and pixels filled so far.
    known: Vec<bool>,
    unfilled: Vec<bool>,
    confidence: Vec<f64>,
}

impl FillState {
    fn window(&self, x: usize, y: usize) -> (usize, usize, usize, usize) {
        (
            x.saturating_sub(self.half),
            y.saturating_sub(self.half),
            (x + self.half).min(self.w - 1),
            (y + self.half).min(self.h - 1),
        )
    }

    fn on_front(&self, i: usize) -> bool {
        if !self.unfilled[i] {
            return false;
        }
        let (x, y) = (i % self.w, i / self.w);
        (x > 0 && self.known[i - 1])
            || (x + 1 < self.w && self.known[i + 1])
            || (y > 0 && self.known[i - self.w])
            || (y + 1 < self.h && self.known[i + self.w])
    }

    fn confidence_term(&self, x: usize, y: usize) -> f64 {
        let (x0, y0, x1, y1) = self.window(x, y);
        let mut sum = 0.0;
        for yy in y0..=y1 {
            for xx in x0..=x1 {
                let j = yy * self.w + xx;
                if self.known[j] {
                    sum += self.confidence[j];
                }
            }
        }
        let side = 2 * self.half + 1;
        sum / (side * side) as f64
    }

    fn data_term(&self, x: usize, y: usize) -> f64 {
        let w = self.w;
        let mask = |xx: usize, yy: usize| f64::from(u8::from(self.unfilled[yy * w + xx]));
        // normal to the fill front from the unfilled indicator
        let nx = if x + 1 < w { mask(x + 1, y) } else { mask(x, y) } - if x > 0 { mask(x - 1, y) } else { mask(x, y) };
        let ny =
            if y + 1 < self.h { mask(x, y + 1) } else { mask(x, y) } - if y > 0 { mask(x, y - 1) } else { mask(x, y) };
        let norm = (nx * nx + ny * ny).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let (nx, ny) = (nx / norm, ny / norm);

        // strongest known image gradient in the window
        let (x0, y0, x1, y1) = self.window(x, y);
        let mut best = (0.0, 0.0, 0.0);
        for yy in y0.max(1)..=y1.min(self.h.saturating_sub(2)) {
            for xx in x0.max(1)..=x1.min(w.saturating_sub(2)) {
                let j = yy * w + xx;
                if !(self.known[j] && self.known[j - 1] && self.known[j + 1] && self.known[j - w] && self.known[j + w])
                {
                    continue;
                }
                let gx = (self.gray[j + 1] - self.gray[j - 1]) / 2.0;
                let gy = (self.gray[j + w] - self.gray[j - w]) / 2.0;
                let mag = gx * gx + gy * gy;
                if mag > best.0 {
                    best = (mag, gx, gy);
                }
            }
        }
        // isophote is the gradient rotated by 90 degrees
        let (ix, iy) = (-best.2, best.1);
        (ix * nx + iy * ny).abs() / 255.0
    }

    /// Highest-priority front pixel; ties go to the smallest (y, x).
    fn pick_target(&self) -> Option<usize> {
        let front: Vec<usize> = (0..self.w * self.h).filter(|&i| self.on_front(i)).collect();
        let scored = par::map(&front, |&i| {
            let (x, y) = (i % self.w, i / self.w);
            self.confidence_term(x, y) * (self.data_term(x, y) + DATA_TERM_FLOOR)
        });
        let mut best: Option<(f64, usize)> = None;
        for (&i, &p) in front.iter().zip(&scored) {
            if best.is_none_or(|(bp, _)| p > bp) {
                best = Some((p, i));
            }
        }
        best.map(|(_, i)| i)
    }

    /// Summed-area table of pixels that cannot serve as exemplar content.
    fn unavailable_table(&self) -> Vec<u32> {
        let (w, h) = (self.w, self.h);
        let mut sat = vec![0u32; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0u32;
            for x in 0..w {
                row += u32::from(!self.known[y * w + x]);
                sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
            }
        }
        sat
    }
}

/// Runs the fill and records how many pixels remained before every step.
pub fn fill_regions_traced(job: &FillJob) -> Result<FillOutcome> {
    job.validate()?;
    let (w, h) = (job.target.width(), job.target.height());
    let side = job.patch_size;
    let half = side / 2;
    let mut state = FillState {
        w,
        h,
        half,
        pixels: job.target.pixels().to_vec(),
        gray: job
            .target
            .pixels()
            .iter()
            .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0)
            .collect(),
        known: job.source_region.bits().to_vec(),
        unfilled: job.fill_region.bits().to_vec(),
        confidence: job
            .source_region
            .bits()
            .iter()
            .map(|&s| f64::from(u8::from(s)))
            .collect(),
    };
    let mut remaining = job.fill_region.count();
    let mut outcome = FillOutcome {
        raster: job.target.clone(),
        remaining_before: Vec::new(),
        match_costs: Vec::new(),
    };
    if remaining == 0 {
        return Ok(outcome);
    }
    if side > w || side > h {
        return Err(Error::Fill {
            reason: format!("{side}x{side} patch does not fit a {w}x{h} image"),
            remaining,
        });
    }

    let centers_x = half..w - half;
    let center_rows: Vec<usize> = (half..h - half).collect();

    while remaining > 0 {
        let target = state.pick_target().ok_or_else(|| Error::Fill {
            reason: "fill front is empty: unfilled pixels have no known neighbours".into(),
            remaining,
        })?;
        let (tx, ty) = (target % w, target / w);

        // known pixels of the target window, as offsets from its center
        let (x0, y0, x1, y1) = state.window(tx, ty);
        let mut known: Vec<(isize, [i32; 3])> = Vec::new();
        let mut unknown: Vec<(isize, usize)> = Vec::new();
        for yy in y0..=y1 {
            for xx in x0..=x1 {
                let j = yy * w + xx;
                let off = (yy as isize - ty as isize) * w as isize + (xx as isize - tx as isize);
                if state.known[j] {
                    let p = state.pixels[j];
                    known.push((off, [p[0] as i32, p[1] as i32, p[2] as i32]));
                } else if state.unfilled[j] {
                    unknown.push((off, j));
                }
            }
        }

        let sat = state.unavailable_table();
        let pixels = &state.pixels;
        let centers_x = centers_x.clone();
        // Best complete SSD seen by any row. Pruning only drops candidates
        // strictly worse than it, so the minimum and its ties survive.
        let global_bound = AtomicU64::new(u64::MAX);
        let best = par::min_indexed(center_rows.len(), |row| {
            let cy = center_rows[row];
            let top = cy - half;
            let mut best: Option<(u64, usize, usize)> = None;
            for cx in centers_x.clone() {
                let left = cx - half;
                let blocked = sat[(top + side) * (w + 1) + left + side] + sat[top * (w + 1) + left]
                    - sat[top * (w + 1) + left + side]
                    - sat[(top + side) * (w + 1) + left];
                if blocked != 0 {
                    continue;
                }
                let center = (cy * w + cx) as isize;
                let bound = global_bound.load(Ordering::Relaxed);
                let mut ssd = 0u64;
                for &(off, t) in &known {
                    let s = pixels[(center + off) as usize];
                    let dr = s[0] as i32 - t[0];
                    let dg = s[1] as i32 - t[1];
                    let db = s[2] as i32 - t[2];
                    ssd += (dr * dr + dg * dg + db * db) as u64;
                    if ssd > bound {
                        break;
                    }
                }
                if ssd > bound {
                    continue;
                }
                global_bound.fetch_min(ssd, Ordering::Relaxed);
                if best.is_none_or(|(b, _, _)| ssd < b) {
                    best = Some((ssd, cy, cx));
                }
            }
            best
        });
        let (ssd, cy, cx) = best.ok_or_else(|| Error::Fill {
            reason: format!("no fully known {side}x{side} source window"),
            remaining,
        })?;

        let conf = state.confidence_term(tx, ty);
        let center = (cy * w + cx) as isize;
        outcome.remaining_before.push(remaining);
        outcome.match_costs.push(ssd as f64 / known.len().max(1) as f64);
        for (off, j) in unknown {
            let src = state.pixels[(center + off) as usize];
            state.pixels[j] = src;
            state.gray[j] = (src[0] as f64 + src[1] as f64 + src[2] as f64) / 3.0;
            state.unfilled[j] = false;
            state.known[j] = true;
            state.confidence[j] = conf;
            remaining -= 1;
        }
    }

    outcome.raster = Raster::new(w, h, state.pixels)?.with_source(job.target.source_id.clone());
    Ok(outcome)
}

/// How much of a filled region still stands out from its surroundings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub threshold: f64,
    pub radius: usize,
    pub fill_pixels: usize,
    pub flagged_pixels: usize,
    /// `flagged_pixels / fill_pixels`, zero for an empty region.
    pub fraction: f64,
}

pub const DEFAULT_RESIDUAL_THRESHOLD: f64 = 0.15;
pub const DEFAULT_RESIDUAL_RADIUS: usize = 4;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Flags fill pixels whose HSV saturation or value differs by more than
/// `threshold` from the median of the surrounding non-fill pixels within
/// `radius` (the whole window when it holds no such pixel).
pub fn residual_check(
    filled: &Raster,
    fill_region: &BinaryMask,
    threshold: f64,
    radius: usize,
) -> Result<ResidualReport> {
    let (w, h) = (filled.width(), filled.height());
    fill_region.same_shape(w, h)?;
    let sat: Vec<f64> = filled.pixels().iter().map(|&p| saturation(p)).collect();
    let val: Vec<f64> = filled.pixels().iter().map(|&p| value(p)).collect();
    let bits = fill_region.bits();
    let targets: Vec<usize> = (0..w * h).filter(|&i| bits[i]).collect();
    let flags = par::map(&targets, |&i| {
        let (x, y) = (i % w, i / w);
        let (x0, y0) = (x.saturating_sub(radius), y.saturating_sub(radius));
        let (x1, y1) = ((x + radius).min(w - 1), (y + radius).min(h - 1));
        let mut s_near = Vec::new();
        let mut v_near = Vec::new();
        for yy in y0..=y1 {
            for xx in x0..=x1 {
                let j = yy * w + xx;
                if !bits[j] {
                    s_near.push(sat[j]);
                    v_near.push(val[j]);
                }
            }
        }
        if s_near.is_empty() {
            for yy in y0..=y1 {
                for xx in x0..=x1 {
                    s_near.push(sat[yy * w + xx]);
                    v_near.push(val[yy * w + xx]);
                }
            }
        }
        let ds = (sat[i] - median(&mut s_near)).abs();
        let dv = (val[i] - median(&mut v_near)).abs();
        ds > threshold || dv > threshold
    });
    let flagged = flags.iter().filter(|&&f| f).count();
    Ok(ResidualReport {
        threshold,
        radius,
        fill_pixels: targets.len(),
        flagged_pixels: flagged,
        fraction: if targets.is_empty() {
            0.0
        } else {
            flagged as f64 / targets.len() as f64
        },
    })
}
