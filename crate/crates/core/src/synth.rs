//! Deterministic synthetic fragments for end-to-end testing.
//!
//! Papyrus-like surfaces carry crossed horizontal and vertical striations;
//! parchment-like surfaces are smoothed multi-scale noise with no dominant
//! period. Both are rendered in saturation-varying browns so the texture
//! survives the RGB to saturation conversion.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{dilate_mask, BinaryMask, MaskKind, Raster};
use crate::types::{ImageSet, Material};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    PapyrusLike,
    ParchmentLike,
}

impl SynthKind {
    pub fn material(self) -> Material {
        match self {
            SynthKind::PapyrusLike => Material::Papyrus,
            SynthKind::ParchmentLike => Material::Parchment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    /// Side of the square fragment in pixels.
    pub size: usize,
    pub seed: u64,
    /// Striation period in pixels (papyrus only).
    pub stripe_period: f64,
    /// Correlation length of the smoothed noise field in pixels.
    pub noise_scale: f64,
    pub hole_fraction: f64,
    pub text_coverage: f64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < 512 {
            return Err(Error::Invalid(format!(
                "synthetic size must be >= 512, got {}",
                self.size
            )));
        }
        if !(0.0..=0.3).contains(&self.hole_fraction) {
            return Err(Error::Invalid(format!(
                "hole_fraction {} outside [0, 0.3]",
                self.hole_fraction
            )));
        }
        if !(0.0..=0.2).contains(&self.text_coverage) {
            return Err(Error::Invalid(format!(
                "text_coverage {} outside [0, 0.2]",
                self.text_coverage
            )));
        }
        if self.kind == SynthKind::PapyrusLike && (self.stripe_period.is_nan() || self.stripe_period < 2.0) {
            return Err(Error::Invalid(format!(
                "stripe_period must be >= 2, got {}",
                self.stripe_period
            )));
        }
        if self.noise_scale.is_nan() || self.noise_scale < 1.0 {
            return Err(Error::Invalid(format!(
                "noise_scale must be >= 1, got {}",
                self.noise_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthFragment {
    /// Surface with holes (background) and ink applied.
    pub raster: Raster,
    pub fragment_mask: BinaryMask,
    pub text_mask: BinaryMask,
    /// Surface before holes and ink.
    pub ground_truth: Raster,
}

/// Value noise on a square lattice with smoothstep interpolation.
struct ValueNoise {
    cells: usize,
    scale: f64,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, extent: usize, scale: f64) -> Self {
        let cells = (extent as f64 / scale).ceil() as usize + 2;
        let lattice = (0..cells * cells).map(|_| rng.random::<f64>()).collect();
        Self { cells, scale, lattice }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let fx = x / self.scale;
        let fy = y / self.scale;
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        let (tx, ty) = (smooth(fx - ix as f64), smooth(fy - iy as f64));
        let g = |i: usize, j: usize| self.lattice[(j.min(self.cells - 1)) * self.cells + i.min(self.cells - 1)];
        let top = g(ix, iy) * (1.0 - tx) + g(ix + 1, iy) * tx;
        let bottom = g(ix, iy + 1) * (1.0 - tx) + g(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Two-octave noise normalised to roughly [0, 1].
struct Fractal {
    coarse: ValueNoise,
    fine: ValueNoise,
}

impl Fractal {
    fn new(rng: &mut ChaCha8Rng, extent: usize, scale: f64) -> Self {
        Self {
            coarse: ValueNoise::new(rng, extent, scale),
            fine: ValueNoise::new(rng, extent, (scale / 2.0).max(1.0)),
        }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        (self.coarse.at(x, y) * 2.0 + self.fine.at(x, y)) / 3.0
    }
}

const LIGHT: [f64; 3] = [208.0, 184.0, 146.0];
const DARK: [f64; 3] = [150.0, 104.0, 58.0];
const INK: [u8; 3] = [46, 36, 30];
pub const BACKGROUND: [u8; 3] = [10, 10, 12];

fn surface_color(t: f64, tint: [f64; 3]) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (LIGHT[c] * (1.0 - t) + DARK[c] * t + tint[c]).round().clamp(0.0, 255.0) as u8;
    }
    out
}

fn surface(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Raster {
    let n = spec.size;
    let tint = [
        rng.random_range(-8.0..8.0),
        rng.random_range(-8.0..8.0),
        rng.random_range(-8.0..8.0),
    ];
    let contrast = rng.random_range(0.8..1.2);
    let field = Fractal::new(rng, n, spec.noise_scale);
    let grain: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() - 0.5).collect();
    match spec.kind {
        SynthKind::ParchmentLike => Raster::from_fn(n, n, |x, y| {
            let t = 0.5 + contrast * 0.9 * (field.at(x as f64, y as f64) - 0.5) + 0.08 * grain[y * n + x];
            surface_color(t, tint)
        })
        .expect("non-empty"),
        SynthKind::PapyrusLike => {
            let period = spec.stripe_period;
            let (phase_h, phase_v) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
            let wobble_h = ValueNoise::new(rng, n, 48.0);
            let wobble_v = ValueNoise::new(rng, n, 48.0);
            let strength_h = ValueNoise::new(rng, n, 40.0);
            let strength_v = ValueNoise::new(rng, n, 40.0);
            Raster::from_fn(n, n, |x, y| {
                let (fx, fy) = (x as f64, y as f64);
                let ah = 0.6 + 0.4 * strength_h.at(fx, fy);
                let av = 0.6 + 0.4 * strength_v.at(fx, fy);
                let horiz = (TAU * fy / period + phase_h + 0.8 * (wobble_h.at(fx, fy) - 0.5)).sin();
                let vert = (TAU * fx / period + phase_v + 0.8 * (wobble_v.at(fx, fy) - 0.5)).sin();
                let t = 0.5
                    + contrast * (0.16 * ah * horiz + 0.16 * av * vert)
                    + 0.3 * (field.at(fx, fy) - 0.5)
                    + 0.08 * grain[y * n + x];
                surface_color(t, tint)
            })
            .expect("non-empty")
        }
    }
}

fn ragged_outline(n: usize, rng: &mut ChaCha8Rng) -> BinaryMask {
    let depth = (n as f64 * 0.012).max(1.0);
    let edges: Vec<ValueNoise> = (0..4).map(|_| ValueNoise::new(rng, n, 32.0)).collect();
    let d = |side: usize, s: usize| (depth * edges[side].at(s as f64, 0.0)).round() as usize;
    BinaryMask::from_fn(n, n, MaskKind::Fragment, |x, y| {
        x >= d(0, y) && x + d(1, y) < n && y >= d(2, x) && y + d(3, x) < n
    })
}

fn punch_holes(mask: &mut BinaryMask, fraction: f64, rng: &mut ChaCha8Rng) {
    let n = mask.width();
    let budget = (fraction * (n * n) as f64).floor() as usize;
    let mut removed = 0usize;
    let margin = 24;
    for _ in 0..10_000 {
        if removed >= budget {
            break;
        }
        let r: f64 = rng.random_range(3.0..9.0);
        let cx = rng.random_range(margin..n - margin) as f64;
        let cy = rng.random_range(margin..n - margin) as f64;
        let ri = r.ceil() as usize;
        let mut disc = Vec::new();
        for y in (cy as usize).saturating_sub(ri)..=(cy as usize + ri).min(n - 1) {
            for x in (cx as usize).saturating_sub(ri)..=(cx as usize + ri).min(n - 1) {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if dx * dx + dy * dy <= r * r && mask.get(x, y) {
                    disc.push((x, y));
                }
            }
        }
        if removed + disc.len() > budget {
            continue;
        }
        removed += disc.len();
        for (x, y) in disc {
            mask.set(x, y, false);
        }
    }
}

fn draw_segment(mask: &mut BinaryMask, region: &BinaryMask, from: (f64, f64), to: (f64, f64)) {
    let steps = ((to.0 - from.0).abs().max((to.1 - from.1).abs()) * 2.0).ceil().max(1.0) as usize;
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let (px, py) = (from.0 + (to.0 - from.0) * t, from.1 + (to.1 - from.1) * t);
        // 2-pixel pen
        for (ox, oy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let (x, y) = (px as isize + ox, py as isize + oy);
            if x >= 0 && y >= 0 && x < w && y < h && region.get(x as usize, y as usize) {
                mask.set(x as usize, y as usize, true);
            }
        }
    }
}

fn write_text(region: &BinaryMask, coverage: f64, rng: &mut ChaCha8Rng) -> BinaryMask {
    let n = region.width();
    let mut text = BinaryMask::empty(n, n, MaskKind::Text);
    let target = (coverage * region.count() as f64).round() as usize;
    if target == 0 {
        return text;
    }
    let line_gap = 26.0;
    // later passes interleave new lines between earlier ones
    'lines: for pass in 0..8 {
        let mut baseline = 30.0 + pass as f64 * 3.25;
        while baseline < n as f64 - 30.0 {
            let mut x = rng.random_range(20.0..40.0);
            while x < n as f64 - 30.0 {
                let strokes = rng.random_range(1..=3);
                for _ in 0..strokes {
                    let from = (x + rng.random_range(0.0..6.0), baseline - rng.random_range(0.0..10.0));
                    let to = (
                        from.0 + rng.random_range(-4.0..8.0),
                        from.1 + rng.random_range(2.0..10.0),
                    );
                    draw_segment(&mut text, region, from, to);
                }
                if text.count() >= target {
                    break 'lines;
                }
                x += rng.random_range(10.0..16.0);
            }
            baseline += line_gap;
        }
    }
    text
}

/// Renders one fragment. Deterministic in the spec.
pub fn generate(spec: &SynthSpec) -> Result<SynthFragment> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let truth = surface(spec, &mut rng);
    let mut fragment = ragged_outline(spec.size, &mut rng);
    punch_holes(&mut fragment, spec.hole_fraction, &mut rng);
    let text = write_text(&fragment, spec.text_coverage, &mut rng);

    // ink halo one pixel beyond the mask, as binarisation tends to miss outlines
    let halo = dilate_mask(&text).difference(&text)?;
    let mut raster = truth.clone();
    let n = spec.size;
    for y in 0..n {
        for x in 0..n {
            if !fragment.get(x, y) {
                raster.set(x, y, BACKGROUND);
            } else if text.get(x, y) {
                raster.set(x, y, INK);
            } else if halo.get(x, y) {
                let p = raster.get(x, y);
                raster.set(x, y, std::array::from_fn(|c| ((p[c] as u16 + INK[c] as u16) / 2) as u8));
            }
        }
    }
    Ok(SynthFragment {
        raster,
        fragment_mask: fragment,
        text_mask: text,
        ground_truth: truth,
    })
}

/// One plate of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub plate_id: String,
    pub spec: SynthSpec,
}

/// A versioned list of synthetic fragments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub version: u32,
    pub set: ImageSet,
    /// Background border around each fragment on its plate, in pixels.
    pub margin: usize,
    pub fragments: Vec<CorpusEntry>,
}

const DEFAULT_CORPUS: &str = include_str!("../data/synthetic-corpus-v1.json");

impl CorpusSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: CorpusSpec = serde_json::from_str(text)?;
        for e in &spec.fragments {
            e.spec.validate()?;
        }
        Ok(spec)
    }

    /// The shipped corpus: 23 parchment-like and 10 papyrus-like fragments.
    pub fn default_corpus() -> Self {
        Self::from_json(DEFAULT_CORPUS).expect("bundled corpus spec is valid")
    }
}

/// Places a fragment on a dark plate with a small calibration mark that
/// segmentation is expected to discard.
pub fn render_plate(fragment: &SynthFragment, margin: usize) -> (Raster, BinaryMask) {
    let n = fragment.raster.width();
    let side = n + 2 * margin;
    let mut plate = Raster::filled(side, side, BACKGROUND).expect("non-empty");
    let mut text = BinaryMask::empty(side, side, MaskKind::Text);
    for y in 0..n {
        for x in 0..n {
            plate.set(x + margin, y + margin, fragment.raster.get(x, y));
            text.set(x + margin, y + margin, fragment.text_mask.get(x, y));
        }
    }
    if margin >= 8 {
        let bar_h = (margin / 2).max(2);
        for y in 2..2 + bar_h {
            for x in 2..(2 + 4 * margin).min(side) {
                plate.set(x, y, [235, 235, 235]);
            }
        }
    }
    (plate, text)
}
