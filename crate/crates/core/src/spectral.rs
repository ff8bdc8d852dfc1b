//! Log-magnitude Fourier spectra of sample patches and the five texture
//! feature vectors computed from them.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::imaging::SaturationMatrix;
use crate::segment::SamplePatch;
use crate::types::{ImageSet, Material};

/// Complex 2-D spectrum, row-major, DC at index (0, 0).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    width: usize,
    height: usize,
    values: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(width: usize, height: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != width * height || width == 0 || height == 0 {
            return Err(Error::Invalid(format!(
                "spectrum {width}x{height} with {} values",
                values.len()
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Coefficient at horizontal frequency `u`, vertical frequency `v`.
    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.values[v * self.width + u]
    }
}

/// Center-shifted `ln(1 + |F|)`, DC at (⌊h/2⌋, ⌊w/2⌋).
#[derive(Debug, Clone, PartialEq)]
pub struct LogSpectrum {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl LogSpectrum {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height || width == 0 || height == 0 {
            return Err(Error::Invalid(format!(
                "log spectrum {width}x{height} with {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid(
                "log spectrum values must be finite and non-negative".into(),
            ));
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn center(&self) -> (usize, usize) {
        (self.width / 2, self.height / 2)
    }

    pub fn transpose(&self) -> LogSpectrum {
        let mut values = vec![0.0; self.values.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                values[x * self.height + y] = self.values[y * self.width + x];
            }
        }
        LogSpectrum {
            width: self.height,
            height: self.width,
            values,
        }
    }
}

/// Statistic summarised over a region of the log spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stat {
    Mean,
    Sd,
}

/// The five feature-vector families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    GridMean,
    GridSd,
    RingMean,
    RingSd,
    WeightedBin,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::GridMean,
        FeatureKind::GridSd,
        FeatureKind::RingMean,
        FeatureKind::RingSd,
        FeatureKind::WeightedBin,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::GridMean => "grid_mean",
            FeatureKind::GridSd => "grid_sd",
            FeatureKind::RingMean => "ring_mean",
            FeatureKind::RingSd => "ring_sd",
            FeatureKind::WeightedBin => "weighted_bin",
        }
    }

    /// Name used in report headings.
    pub fn title(self) -> &'static str {
        match self {
            FeatureKind::GridMean => "the MFV",
            FeatureKind::GridSd => "the SDFV",
            FeatureKind::RingMean => "Mean Concentric Ring Feature Vector",
            FeatureKind::RingSd => "Standard Deviation Concentric Ring Feature Vector",
            FeatureKind::WeightedBin => "the Weighted Bin Feature Vector",
        }
    }

    pub fn expected_len(self, cfg: &SpectralConfig) -> usize {
        match self {
            FeatureKind::GridMean | FeatureKind::GridSd => cfg.grid_n * cfg.grid_n,
            FeatureKind::RingMean | FeatureKind::RingSd => cfg.ring_count,
            FeatureKind::WeightedBin => cfg.bin_count,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "grid_mean" | "mfv" => Ok(FeatureKind::GridMean),
            "grid_sd" | "sdfv" => Ok(FeatureKind::GridSd),
            "ring_mean" => Ok(FeatureKind::RingMean),
            "ring_sd" => Ok(FeatureKind::RingSd),
            "weighted_bin" | "bin" => Ok(FeatureKind::WeightedBin),
            other => Err(Error::Invalid(format!("unknown feature kind '{other}'"))),
        }
    }
}

/// One tagged feature vector of one sample patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub fragment_id: String,
    pub sample_index: usize,
    pub kind: FeatureKind,
    pub label: Material,
    pub set: ImageSet,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub grid_n: usize,
    pub ring_count: usize,
    pub bin_count: usize,
    pub patch: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            grid_n: 7,
            ring_count: 6,
            bin_count: 19,
            patch: 256,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_n == 0 || self.ring_count == 0 || self.bin_count == 0 || self.patch == 0 {
            return Err(Error::Invalid("spectral counts must be positive".into()));
        }
        if self.patch < self.grid_n {
            return Err(Error::Invalid(format!(
                "patch {} is smaller than grid size {}",
                self.patch, self.grid_n
            )));
        }
        Ok(())
    }
}

pub fn dft2(m: &SaturationMatrix) -> ComplexSpectrum {
    let (w, h) = (m.width(), m.height());
    let mut data: Vec<Complex64> = m.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(w, h, &mut data);
    ComplexSpectrum {
        width: w,
        height: h,
        values: data,
    }
}

pub fn log_spectrum(s: &ComplexSpectrum) -> LogSpectrum {
    let (w, h) = (s.width, s.height);
    let mut values = vec![0.0; w * h];
    for v in 0..h {
        let row = (v + h / 2) % h;
        for u in 0..w {
            let col = (u + w / 2) % w;
            values[row * w + col] = s.values[v * w + u].norm().ln_1p();
        }
    }
    LogSpectrum {
        width: w,
        height: h,
        values,
    }
}

/// Splits `len` into `n` contiguous bands, the larger bands first.
/// Returns `n + 1` edges.
pub fn band_edges(len: usize, n: usize) -> Vec<usize> {
    let base = len / n;
    let extra = len % n;
    let mut edges = Vec::with_capacity(n + 1);
    let mut at = 0;
    edges.push(0);
    for i in 0..n {
        at += base + usize::from(i < extra);
        edges.push(at);
    }
    edges
}

/// Mean or population standard deviation, shifted by the first value so a
/// constant input yields exactly that constant and zero spread.
fn summarize(values: impl Iterator<Item = f64> + Clone, stat: Stat) -> f64 {
    let mut it = values.clone();
    let Some(first) = it.next() else {
        return f64::NAN;
    };
    let mut count = 1usize;
    let mut shifted = 0.0;
    for v in it {
        shifted += v - first;
        count += 1;
    }
    let mean = first + shifted / count as f64;
    match stat {
        Stat::Mean => mean,
        Stat::Sd => {
            let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
            (ss / count as f64).sqrt()
        }
    }
}

/// Per-cell statistic over an `n`x`n` partition, concatenated row-major.
pub fn grid_features(ls: &LogSpectrum, n: usize, stat: Stat) -> Result<Vec<f64>> {
    if n == 0 || n > ls.width || n > ls.height {
        return Err(Error::Feature(format!(
            "grid size {n} does not fit a {}x{} spectrum",
            ls.width, ls.height
        )));
    }
    let cols = band_edges(ls.width, n);
    let rows = band_edges(ls.height, n);
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let cell = (rows[r]..rows[r + 1])
                .flat_map(|y| (cols[c]..cols[c + 1]).map(move |x| (x, y)))
                .map(|(x, y)| ls.values[y * ls.width + x]);
            out.push(summarize(cell, stat));
        }
    }
    Ok(out)
}

/// Ring index of every bin (None outside the inscribed circle).
pub fn ring_membership(width: usize, height: usize, rings: usize) -> Vec<Option<usize>> {
    let (cx, cy) = ((width / 2) as f64, (height / 2) as f64);
    let outer = width.min(height) as f64 / 2.0;
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let r = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            out.push(if r >= outer {
                None
            } else {
                // ring j covers [j·R/rings, (j+1)·R/rings)
                let j = ((r * rings as f64) / outer).floor() as usize;
                Some(j.min(rings - 1))
            });
        }
    }
    out
}

/// Per-ring statistic over concentric rings about the DC bin.
///
/// Values inside each ring are summed in sorted order, so the result does
/// not depend on the spectrum's orientation.
pub fn ring_features(ls: &LogSpectrum, rings: usize, stat: Stat) -> Result<Vec<f64>> {
    if rings == 0 {
        return Err(Error::Feature("ring count must be positive".into()));
    }
    let membership = ring_membership(ls.width, ls.height, rings);
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); rings];
    for (&m, &v) in membership.iter().zip(&ls.values) {
        if let Some(j) = m {
            buckets[j].push(v);
        }
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(j, mut vals)| {
            if vals.is_empty() {
                return Err(Error::Feature(format!("ring {j} of {rings} is empty")));
            }
            vals.sort_by(f64::total_cmp);
            Ok(summarize(vals.iter().copied(), stat))
        })
        .collect()
}

/// Bin index of a phase angle in `[0, 2π)` split into `bins` equal sectors.
pub fn phase_bin(c: Complex64, bins: usize) -> usize {
    let mut theta = c.im.atan2(c.re);
    if theta < 0.0 {
        theta += TAU;
    }
    ((theta / (TAU / bins as f64)).floor() as usize).min(bins - 1)
}

/// Phase histogram weighted by `ln(1 + |F|)`, normalised to sum to one.
pub fn weighted_bin_features(s: &ComplexSpectrum, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::Feature("bin count must be positive".into()));
    }
    let mut hist = vec![0.0; bins];
    for &c in &s.values {
        let weight = c.norm().ln_1p();
        if weight > 0.0 {
            hist[phase_bin(c, bins)] += weight;
        }
    }
    let total: f64 = hist.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::Feature("all-zero spectrum cannot be normalised".into()));
    }
    for h in &mut hist {
        *h /= total;
    }
    Ok(hist)
}

/// All five feature vectors of one patch, in [`FeatureKind::ALL`] order.
pub fn featurize_patch(p: &SamplePatch, cfg: &SpectralConfig) -> Result<Vec<FeatureVector>> {
    cfg.validate()?;
    let (w, h) = (p.saturation.width(), p.saturation.height());
    if w != cfg.patch || h != cfg.patch {
        return Err(Error::Feature(format!("patch is {w}x{h}, expected {0}x{0}", cfg.patch)));
    }
    let spectrum = dft2(&p.saturation);
    let ls = log_spectrum(&spectrum);
    let tag = |kind: FeatureKind, values: Vec<f64>| FeatureVector {
        fragment_id: p.fragment_id.clone(),
        sample_index: p.sample_index,
        kind,
        label: p.label,
        set: p.set,
        values,
    };
    Ok(vec![
        tag(FeatureKind::GridMean, grid_features(&ls, cfg.grid_n, Stat::Mean)?),
        tag(FeatureKind::GridSd, grid_features(&ls, cfg.grid_n, Stat::Sd)?),
        tag(FeatureKind::RingMean, ring_features(&ls, cfg.ring_count, Stat::Mean)?),
        tag(FeatureKind::RingSd, ring_features(&ls, cfg.ring_count, Stat::Sd)?),
        tag(
            FeatureKind::WeightedBin,
            weighted_bin_features(&spectrum, cfg.bin_count)?,
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_matrix(w: usize, h: usize, seed: u64) -> SaturationMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SaturationMatrix::new(w, h, (0..w * h).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    /// Direct quadruple-loop transform.
    fn brute_dft(m: &SaturationMatrix) -> Vec<Complex64> {
        let (w, h) = (m.width(), m.height());
        let mut out = vec![Complex64::new(0.0, 0.0); w * h];
        for v in 0..h {
            for u in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let angle = -2.0 * PI * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                        acc += m.get(x, y) * Complex64::from_polar(1.0, angle);
                    }
                }
                out[v * w + u] = acc;
            }
        }
        out
    }

    #[test]
    fn two_by_two_identity() {
        let m = SaturationMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let s = dft2(&m);
        let mags: Vec<f64> = s.values().iter().map(|c| c.norm()).collect();
        for (a, b) in mags.iter().zip([2.0, 0.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let ls = log_spectrum(&s);
        let l3 = 3.0f64.ln();
        for (a, b) in ls.values().iter().zip([l3, 0.0, 0.0, l3]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((ls.get(1, 1) - l3).abs() < 1e-12);
    }

    #[test]
    fn constant_patch_is_dc_only() {
        let c = 0.37;
        let m = SaturationMatrix::new(256, 256, vec![c; 65536]).unwrap();
        let s = dft2(&m);
        assert!((s.get(0, 0).re - c * 65536.0).abs() < 1e-6);
        for (i, v) in s.values().iter().enumerate().skip(1) {
            assert!(v.norm() < 1e-6, "bin {i} = {v}");
        }
    }

    #[test]
    fn brute_force_agrees_on_odd_sizes() {
        for (w, h, seed) in [(3, 5, 1), (7, 4, 2), (16, 16, 3), (9, 12, 4)] {
            let m = random_matrix(w, h, seed);
            let fast = dft2(&m);
            for (a, b) in fast.values().iter().zip(brute_dft(&m)) {
                assert!((a - b).norm() <= 1e-9 * b.norm().max(1.0));
            }
        }
    }

    #[test]
    fn zero_spectrum_logs_to_zero() {
        let s = ComplexSpectrum::new(4, 3, vec![Complex64::new(0.0, 0.0); 12]).unwrap();
        assert!(log_spectrum(&s).values().iter().all(|&v| v == 0.0));
        assert!(matches!(weighted_bin_features(&s, 19), Err(Error::Feature(_))));
    }

    #[test]
    fn band_sizes_for_256_by_7() {
        let e = band_edges(256, 7);
        let sizes: Vec<usize> = e.windows(2).map(|w| w[1] - w[0]).collect();
        assert_eq!(sizes, vec![37, 37, 37, 37, 36, 36, 36]);
    }

    #[test]
    fn grid_partition_covers_every_bin_once() {
        for n in 1..=8 {
            let e = band_edges(256, n);
            let mut hits = vec![0u8; 256 * 256];
            for r in 0..n {
                for c in 0..n {
                    for y in e[r]..e[r + 1] {
                        for x in e[c]..e[c + 1] {
                            hits[y * 256 + x] += 1;
                        }
                    }
                }
            }
            assert!(hits.iter().all(|&h| h == 1), "n = {n}");
        }
    }

    #[test]
    fn grid_constant_field() {
        let ls = LogSpectrum::new(256, 256, vec![1.7; 65536]).unwrap();
        assert_eq!(grid_features(&ls, 7, Stat::Mean).unwrap(), vec![1.7; 49]);
        assert_eq!(grid_features(&ls, 7, Stat::Sd).unwrap(), vec![0.0; 49]);
    }

    #[test]
    fn grid_dc_only_lands_in_center_cell() {
        let m = SaturationMatrix::new(256, 256, vec![0.5; 65536]).unwrap();
        let ls = log_spectrum(&dft2(&m));
        let mfv = grid_features(&ls, 7, Stat::Mean).unwrap();
        let big: Vec<usize> = mfv
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 1e-9)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(big, vec![24]);
    }

    #[test]
    fn grid_matches_cell_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ls = LogSpectrum::new(14, 14, (0..196).map(|_| rng.random::<f64>() * 5.0).collect()).unwrap();
        let means = grid_features(&ls, 7, Stat::Mean).unwrap();
        let sds = grid_features(&ls, 7, Stat::Sd).unwrap();
        for r in 0..7 {
            for c in 0..7 {
                let cell = [
                    ls.get(2 * c, 2 * r),
                    ls.get(2 * c + 1, 2 * r),
                    ls.get(2 * c, 2 * r + 1),
                    ls.get(2 * c + 1, 2 * r + 1),
                ];
                let mean = cell.iter().sum::<f64>() / 4.0;
                let sd = (cell.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
                assert!((means[r * 7 + c] - mean).abs() < 1e-12);
                assert!((sds[r * 7 + c] - sd).abs() < 1e-12);
            }
        }
        assert!(grid_features(&ls, 15, Stat::Mean).is_err());
    }

    #[test]
    fn ring_constant_field() {
        let ls = LogSpectrum::new(256, 256, vec![0.9; 65536]).unwrap();
        assert_eq!(ring_features(&ls, 6, Stat::Mean).unwrap(), vec![0.9; 6]);
        assert_eq!(ring_features(&ls, 6, Stat::Sd).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn ring_matches_membership_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ls = LogSpectrum::new(16, 16, (0..256).map(|_| rng.random::<f64>()).collect()).unwrap();
        let means = ring_features(&ls, 4, Stat::Mean).unwrap();
        // R = 8, ring width 2, center (8, 8)
        for (j, mean) in means.iter().enumerate() {
            let mut sum = 0.0;
            let mut n = 0;
            for y in 0..16 {
                for x in 0..16 {
                    let r = (((x as f64) - 8.0).powi(2) + ((y as f64) - 8.0).powi(2)).sqrt();
                    if r >= 2.0 * j as f64 && r < 2.0 * (j + 1) as f64 {
                        sum += ls.get(x, y);
                        n += 1;
                    }
                }
            }
            assert!((mean - sum / n as f64).abs() < 1e-12, "ring {j}");
        }
    }

    #[test]
    fn rings_exclude_corners() {
        let mut values = vec![0.0; 256];
        // corner bins lie outside the inscribed circle
        for (x, y) in [(0usize, 0usize), (15, 0), (0, 15), (15, 15), (1, 1)] {
            values[y * 16 + x] = 100.0;
        }
        let ls = LogSpectrum::new(16, 16, values).unwrap();
        assert_eq!(ring_features(&ls, 4, Stat::Mean).unwrap(), vec![0.0; 4]);
        assert!(ring_membership(16, 16, 4)[0].is_none());
    }

    #[test]
    fn too_many_rings_is_an_error() {
        let ls = LogSpectrum::new(4, 4, vec![0.0; 16]).unwrap();
        assert!(matches!(ring_features(&ls, 10, Stat::Mean), Err(Error::Feature(_))));
    }

    #[test]
    fn weighted_bin_single_phase() {
        let mut vals = vec![Complex64::new(0.0, 0.0); 16];
        vals[0] = Complex64::new(3.0, 0.0);
        vals[5] = Complex64::new(0.5, 0.0);
        let s = ComplexSpectrum::new(4, 4, vals).unwrap();
        let mut expect = vec![0.0; 19];
        expect[0] = 1.0;
        assert_eq!(weighted_bin_features(&s, 19).unwrap(), expect);
    }

    #[test]
    fn weighted_bin_opposite_phases_split_evenly() {
        let mut vals = vec![Complex64::new(0.0, 0.0); 4];
        vals[0] = Complex64::new(2.0, 0.0);
        vals[3] = Complex64::new(-2.0, 0.0);
        let s = ComplexSpectrum::new(2, 2, vals).unwrap();
        let v = weighted_bin_features(&s, 19).unwrap();
        assert_eq!(v[0], 0.5);
        assert_eq!(v[9], 0.5);
        assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 2);
    }

    fn patch(saturation: SaturationMatrix) -> SamplePatch {
        SamplePatch {
            fragment_id: "F-1".into(),
            sample_index: 3,
            label: Material::Parchment,
            set: ImageSet::Color,
            x: 0,
            y: 0,
            saturation,
        }
    }

    #[test]
    fn featurize_lengths_and_tags() {
        let p = patch(random_matrix(256, 256, 9));
        let fv = featurize_patch(&p, &SpectralConfig::default()).unwrap();
        let lens: Vec<usize> = fv.iter().map(|f| f.values.len()).collect();
        assert_eq!(lens, vec![49, 49, 6, 6, 19]);
        let kinds: Vec<FeatureKind> = fv.iter().map(|f| f.kind).collect();
        assert_eq!(kinds, FeatureKind::ALL.to_vec());
        assert!(fv.iter().all(|f| f.fragment_id == "F-1" && f.sample_index == 3));
        assert_eq!(fv, featurize_patch(&p, &SpectralConfig::default()).unwrap());
        let wrong = patch(random_matrix(128, 128, 9));
        assert!(featurize_patch(&wrong, &SpectralConfig::default()).is_err());
    }

    #[test]
    fn constant_patch_spread_is_confined_to_dc() {
        let p = patch(SaturationMatrix::new(256, 256, vec![0.4; 65536]).unwrap());
        let fv = featurize_patch(&p, &SpectralConfig::default()).unwrap();
        for (i, v) in fv[1].values.iter().enumerate() {
            if i != 24 {
                assert!(v.abs() < 1e-9, "grid sd cell {i} = {v}");
            }
        }
        for v in &fv[3].values[1..] {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn zero_patch_has_zero_spread_but_no_phase_histogram() {
        let ls = log_spectrum(&dft2(&SaturationMatrix::new(256, 256, vec![0.0; 65536]).unwrap()));
        assert_eq!(grid_features(&ls, 7, Stat::Sd).unwrap(), vec![0.0; 49]);
        assert_eq!(ring_features(&ls, 6, Stat::Sd).unwrap(), vec![0.0; 6]);
        let p = patch(SaturationMatrix::new(256, 256, vec![0.0; 65536]).unwrap());
        assert!(featurize_patch(&p, &SpectralConfig::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn dft_matches_brute_force(w in 1usize..=16, h in 1usize..=16, seed in any::<u64>()) {
            let m = random_matrix(w, h, seed);
            let fast = dft2(&m);
            let slow = brute_dft(&m);
            let scale = slow.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
            for (a, b) in fast.values().iter().zip(&slow) {
                prop_assert!((a - b).norm() <= 1e-6 * scale);
            }
        }

        #[test]
        fn conjugate_symmetry_and_parseval(w in 1usize..=16, h in 1usize..=16, seed in any::<u64>()) {
            let m = random_matrix(w, h, seed);
            let s = dft2(&m);
            let scale = s.values().iter().map(|c| c.norm()).fold(0.0, f64::max);
            for v in 0..h {
                for u in 0..w {
                    let mirror = s.get((w - u) % w, (h - v) % h).conj();
                    prop_assert!((s.get(u, v) - mirror).norm() <= 1e-9 * scale.max(1.0));
                }
            }
            let energy: f64 = m.values().iter().map(|v| v * v).sum();
            let spectral: f64 = s.values().iter().map(|c| c.norm_sqr()).sum::<f64>() / (w * h) as f64;
            prop_assert!((energy - spectral).abs() <= 1e-6 * energy.max(1e-300));
        }

        #[test]
        fn log_spectrum_is_finite_and_nonnegative(w in 1usize..=32, h in 1usize..=32, seed in any::<u64>()) {
            let ls = log_spectrum(&dft2(&random_matrix(w, h, seed)));
            prop_assert!(ls.values().iter().all(|v| v.is_finite() && *v >= 0.0));
        }

        #[test]
        fn weighted_bins_are_a_distribution(w in 2usize..=24, h in 2usize..=24, seed in any::<u64>()) {
            let v = weighted_bin_features(&dft2(&random_matrix(w, h, seed)), 19).unwrap();
            prop_assert_eq!(v.len(), 19);
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
        }

        #[test]
        fn ring_features_are_transpose_invariant(n in 4usize..=40, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ls = LogSpectrum::new(n, n, (0..n * n).map(|_| rng.random::<f64>() * 3.0).collect()).unwrap();
            let t = ls.transpose();
            for stat in [Stat::Mean, Stat::Sd] {
                prop_assert_eq!(ring_features(&ls, 2, stat).unwrap(), ring_features(&t, 2, stat).unwrap());
            }
        }

        #[test]
        fn scaling_keeps_phase_bins(w in 2usize..=16, h in 2usize..=16, seed in any::<u64>(), c in 0.1f64..10.0) {
            let m = random_matrix(w, h, seed);
            let scaled = SaturationMatrix::new(w, h, m.values().iter().map(|v| v * c / 10.0).collect()).unwrap();
            let a = dft2(&m);
            let b = dft2(&scaled);
            let sector = TAU / 19.0;
            for (x, y) in a.values().iter().zip(b.values()) {
                if x.norm() < 1e-6 {
                    continue;
                }
                // skip phases within rounding distance of a bin edge
                let mut theta = x.im.atan2(x.re);
                if theta < 0.0 { theta += TAU; }
                let frac = (theta / sector).fract();
                if !(1e-9..=1.0 - 1e-9).contains(&frac) {
                    continue;
                }
                prop_assert_eq!(phase_bin(*x, 19), phase_bin(*y, 19));
            }
        }
    }
}
