//! Stage orchestration: manifest ingestion, per-stage persistence and reports.
//!
//! Output layout under the run directory:
//!
//! ```text
//! segment/  fragments.json segment.log config.json <set>/<fragment>/{raster,region,text}.png
//! fill/     fill.json config.json <set>/<fragment>/{filled,extent,fill}.png
//! features/ features.jsonl skipped.json config.json
//! evaluate/ report_<set>_<kind>.json report.txt config.json
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{loo_evaluate, Dictionary, EvaluationReport};
use crate::error::{Error, Result};
use crate::imaging::{load_image, union_masks, BinaryMask, MaskKind, Raster};
use crate::inpaint::{fill_regions, residual_check, FillJob, ResidualReport};
use crate::par;
use crate::report;
use crate::segment::{
    bounding_box, connected_components, extract_patches, kmeans_segment, largest_inscribed_rectangle, sample_positions,
    FragmentRecord, Rect,
};
use crate::spectral::{featurize_patch, FeatureKind, FeatureVector, SpectralConfig};
use crate::store::{read_features, write_features};
use crate::synth::{generate, render_plate, CorpusSpec};
use crate::types::{ImageSet, Material};

/// One manifest row: a plate image and what is known about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image_path: PathBuf,
    pub set: ImageSet,
    pub plate_id: String,
    pub material: Material,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragment_mask_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_mask_path: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    image_path: String,
    set: String,
    plate_id: String,
    material: String,
    #[serde(default)]
    fragment_mask_path: Option<String>,
    #[serde(default)]
    text_mask_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    /// Reads a `.csv` or `.json` manifest, chosen by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        let raw: Vec<RawRecord> = match ext.as_str() {
            "csv" => {
                let mut reader = csv::ReaderBuilder::new()
                    .trim(csv::Trim::All)
                    .from_reader(text.as_bytes());
                reader.deserialize().collect::<std::result::Result<_, _>>()?
            }
            "json" => serde_json::from_str(&text)?,
            other => {
                return Err(Error::Manifest(format!(
                    "{}: unsupported manifest extension '{other}' (expected csv or json)",
                    path.display()
                )))
            }
        };
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_raw(base_dir, raw)
    }

    fn from_raw(base_dir: PathBuf, raw: Vec<RawRecord>) -> Result<Self> {
        let optional = |s: Option<String>| s.filter(|s| !s.trim().is_empty()).map(PathBuf::from);
        let mut records = Vec::with_capacity(raw.len());
        for (i, r) in raw.into_iter().enumerate() {
            let row = i + 1;
            let bad = |e: Error| Error::Manifest(format!("row {row} (plate '{}'): {e}", r.plate_id));
            let record = ManifestRecord {
                set: r.set.parse().map_err(bad)?,
                material: r.material.parse().map_err(bad)?,
                image_path: PathBuf::from(&r.image_path),
                plate_id: r.plate_id.clone(),
                fragment_mask_path: optional(r.fragment_mask_path),
                text_mask_path: optional(r.text_mask_path),
            };
            if record.plate_id.trim().is_empty() {
                return Err(Error::Manifest(format!("row {row}: empty plate_id")));
            }
            records.push(record);
        }
        let manifest = Self { base_dir, records };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::Manifest("manifest has no rows".into()));
        }
        let mut seen = HashSet::new();
        for (i, r) in self.records.iter().enumerate() {
            if !seen.insert((r.set, r.plate_id.as_str())) {
                return Err(Error::Manifest(format!(
                    "row {}: plate_id '{}' repeated within set {}",
                    i + 1,
                    r.plate_id,
                    r.set
                )));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Pipeline parameters. Every stage writes a snapshot of this next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid_n: usize,
    pub samples_per_side: usize,
    pub patch: usize,
    pub rings: usize,
    pub bins: usize,
    pub inpaint_patch: usize,
    pub kmeans_k: usize,
    pub kmeans_min_area: usize,
    pub seed: u64,
    pub fv: Vec<FeatureKind>,
    /// Image sets to evaluate; empty means every set present.
    pub sets: Vec<ImageSet>,
    pub residual_threshold: f64,
    pub residual_radius: usize,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid_n: 7,
            samples_per_side: 5,
            patch: 256,
            rings: 6,
            bins: 19,
            inpaint_patch: 9,
            kmeans_k: 3,
            kmeans_min_area: 4096,
            seed: 0,
            fv: FeatureKind::ALL.to_vec(),
            sets: Vec::new(),
            residual_threshold: crate::inpaint::DEFAULT_RESIDUAL_THRESHOLD,
            residual_radius: crate::inpaint::DEFAULT_RESIDUAL_RADIUS,
            out: PathBuf::from("out"),
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("grid_n", self.grid_n),
            ("samples_per_side", self.samples_per_side),
            ("patch", self.patch),
            ("rings", self.rings),
            ("bins", self.bins),
            ("inpaint_patch", self.inpaint_patch),
            ("kmeans_k", self.kmeans_k),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Invalid(format!("{name} must be positive")));
            }
        }
        if self.patch < self.grid_n {
            return Err(Error::Invalid(format!(
                "patch {} is smaller than grid_n {}",
                self.patch, self.grid_n
            )));
        }
        if self.fv.is_empty() {
            return Err(Error::Invalid("no feature kinds selected".into()));
        }
        self.spectral().validate()
    }

    pub fn spectral(&self) -> SpectralConfig {
        SpectralConfig {
            grid_n: self.grid_n,
            ring_count: self.rings,
            bin_count: self.bins,
            patch: self.patch,
        }
    }

    pub fn samples_per_fragment(&self) -> usize {
        self.samples_per_side * self.samples_per_side
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.out.join(stage)
    }
}

/// A segmented fragment as listed in `segment/fragments.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentEntry {
    pub fragment_id: String,
    pub plate_id: String,
    pub set: ImageSet,
    pub material: Material,
    /// Crop of the fragment within its plate.
    pub bbox: Rect,
    pub area: usize,
    pub has_text_mask: bool,
    pub kmeans: bool,
}

impl FragmentEntry {
    fn rel_dir(&self) -> PathBuf {
        PathBuf::from(self.set.to_string()).join(&self.fragment_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillStatus {
    Filled,
    /// Nothing to fill; the fragment is passed through unchanged.
    Copied,
    Failed,
}

/// Per-fragment entry of `fill/fill.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillEntry {
    pub fragment_id: String,
    pub set: ImageSet,
    pub material: Material,
    pub status: FillStatus,
    pub fill_pixels: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub residual: Option<ResidualReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// A fragment the feature stage could not sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub fragment_id: String,
    pub set: ImageSet,
    pub reason: String,
}

/// Outcome of the feature stage.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSummary {
    pub records: usize,
    pub fragments: usize,
    pub skipped: Vec<SkipEntry>,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Clears and recreates a stage directory so stale fragments never survive a rerun.
fn fresh_dir(path: &Path) -> Result<()> {
    if path.exists() {
        fs::remove_dir_all(path).map_err(|e| Error::io(path, e))?;
    }
    create_dir(path)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    write_json(&dir.join("config.json"), cfg)
}

struct PlateOutput {
    fragments: Vec<FragmentEntry>,
    log: Vec<String>,
}

fn segment_plate(manifest: &Manifest, row: usize, cfg: &RunConfig, dir: &Path) -> Result<PlateOutput> {
    let rec = &manifest.records[row];
    let label = format!("row {} (plate '{}', set {})", row + 1, rec.plate_id, rec.set);
    let wrap = |e: Error| Error::Manifest(format!("{label}: {e}"));
    let image_path = manifest.resolve(&rec.image_path);
    let plate = load_image(&image_path).map_err(wrap)?;
    let (w, h) = (plate.width(), plate.height());
    let mut log = Vec::new();

    let kmeans = rec.fragment_mask_path.is_none();
    let components = match &rec.fragment_mask_path {
        Some(p) => {
            let mask = BinaryMask::load(&manifest.resolve(p), MaskKind::Fragment).map_err(wrap)?;
            mask.same_shape(w, h).map_err(wrap)?;
            log.push(format!("{label}: fragment mask supplied, k-means skipped"));
            connected_components(&mask, 1)
        }
        None => {
            let c = kmeans_segment(&plate, cfg.kmeans_k, cfg.seed, cfg.kmeans_min_area).map_err(wrap)?;
            log.push(format!(
                "{label}: k-means (k = {}) found {} fragment(s)",
                cfg.kmeans_k,
                c.len()
            ));
            c
        }
    };
    let text = match &rec.text_mask_path {
        Some(p) => {
            let t = BinaryMask::load(&manifest.resolve(p), MaskKind::Text).map_err(wrap)?;
            t.same_shape(w, h).map_err(wrap)?;
            Some(t)
        }
        None => None,
    };

    let mut fragments = Vec::with_capacity(components.len());
    for (n, component) in components.iter().enumerate() {
        let bbox = bounding_box(component)?;
        let entry = FragmentEntry {
            fragment_id: format!("{}-{}", rec.plate_id, n + 1),
            plate_id: rec.plate_id.clone(),
            set: rec.set,
            material: rec.material,
            bbox,
            area: component.count(),
            has_text_mask: text.is_some(),
            kmeans,
        };
        let frag_dir = dir.join(entry.rel_dir());
        create_dir(&frag_dir)?;
        plate
            .crop(bbox.x, bbox.y, bbox.w, bbox.h)?
            .save_png(&frag_dir.join("raster.png"))?;
        component
            .crop(bbox.x, bbox.y, bbox.w, bbox.h)?
            .save_png(&frag_dir.join("region.png"))?;
        if let Some(t) = &text {
            t.crop(bbox.x, bbox.y, bbox.w, bbox.h)?
                .save_png(&frag_dir.join("text.png"))?;
        }
        log.push(format!(
            "{label}: {} bbox {}x{}+{}+{} area {}",
            entry.fragment_id, bbox.w, bbox.h, bbox.x, bbox.y, entry.area
        ));
        fragments.push(entry);
    }
    Ok(PlateOutput { fragments, log })
}

/// Isolates every fragment listed in the manifest and writes its crop and masks.
pub fn cmd_segment(manifest: &Manifest, cfg: &RunConfig) -> Result<Vec<FragmentEntry>> {
    cfg.validate()?;
    manifest.validate()?;
    let dir = cfg.stage_dir("segment");
    fresh_dir(&dir)?;
    let outputs = par::map_indexed(manifest.records.len(), |row| segment_plate(manifest, row, cfg, &dir));
    let mut fragments = Vec::new();
    let mut log = String::new();
    for out in outputs {
        let out = out?;
        for line in &out.log {
            log::info!("{line}");
            log.push_str(line);
            log.push('\n');
        }
        fragments.extend(out.fragments);
    }
    if fragments.is_empty() {
        return Err(Error::Invalid("segmentation found zero fragments".into()));
    }
    write_text(&dir.join("segment.log"), &log)?;
    write_json(&dir.join("fragments.json"), &fragments)?;
    write_config(&dir, cfg)?;
    Ok(fragments)
}

pub fn load_fragments(cfg: &RunConfig) -> Result<Vec<FragmentEntry>> {
    read_json(&cfg.stage_dir("segment").join("fragments.json"))
}

fn fill_fragment(entry: &FragmentEntry, cfg: &RunConfig, seg_dir: &Path, dir: &Path) -> Result<FillEntry> {
    let src = seg_dir.join(entry.rel_dir());
    let raster = load_image(&src.join("raster.png"))?;
    let region = BinaryMask::load(&src.join("region.png"), MaskKind::Fragment)?;
    let text = if entry.has_text_mask {
        Some(BinaryMask::load(&src.join("text.png"), MaskKind::Text)?)
    } else {
        None
    };
    let job = FillJob::for_fragment(raster, &region, text.as_ref(), cfg.inpaint_patch)?;
    let extent = union_masks(&region, &job.fill_region)?;
    let out = dir.join(entry.rel_dir());
    create_dir(&out)?;
    extent.save_png(&out.join("extent.png"))?;
    job.fill_region.save_png(&out.join("fill.png"))?;

    let fill_pixels = job.fill_region.count();
    let mut result = FillEntry {
        fragment_id: entry.fragment_id.clone(),
        set: entry.set,
        material: entry.material,
        status: FillStatus::Copied,
        fill_pixels,
        residual: None,
        error: None,
    };
    if fill_pixels == 0 {
        job.target.save_png(&out.join("filled.png"))?;
        return Ok(result);
    }
    match fill_regions(&job) {
        Ok(filled) => {
            filled.save_png(&out.join("filled.png"))?;
            result.residual = Some(residual_check(
                &filled,
                &job.fill_region,
                cfg.residual_threshold,
                cfg.residual_radius,
            )?);
            result.status = FillStatus::Filled;
        }
        Err(e) => {
            log::warn!("{}: {e}", entry.fragment_id);
            result.status = FillStatus::Failed;
            result.error = Some(e.to_string());
        }
    }
    Ok(result)
}

/// Fills text and holes of every segmented fragment. A fragment whose fill
/// fails is recorded as failed and the run continues.
pub fn cmd_fill(cfg: &RunConfig) -> Result<Vec<FillEntry>> {
    cfg.validate()?;
    let fragments = load_fragments(cfg)?;
    let seg_dir = cfg.stage_dir("segment");
    let dir = cfg.stage_dir("fill");
    fresh_dir(&dir)?;
    let results = par::map(&fragments, |f| fill_fragment(f, cfg, &seg_dir, &dir));
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;
    write_json(&dir.join("fill.json"), &entries)?;
    write_config(&dir, cfg)?;
    Ok(entries)
}

pub fn load_fill(cfg: &RunConfig) -> Result<Vec<FillEntry>> {
    read_json(&cfg.stage_dir("fill").join("fill.json"))
}

fn featurize_fragment(entry: &FillEntry, cfg: &RunConfig, fill_dir: &Path) -> Result<Vec<FeatureVector>> {
    let dir = fill_dir.join(PathBuf::from(entry.set.to_string()).join(&entry.fragment_id));
    let raster: Raster = load_image(&dir.join("filled.png"))?;
    let extent = BinaryMask::load(&dir.join("extent.png"), MaskKind::Fragment)?;
    let area = largest_inscribed_rectangle(&extent)?;
    let positions = sample_positions(area, cfg.samples_per_side, cfg.patch)?;
    let fragment = FragmentRecord::new(entry.fragment_id.clone(), raster, extent, entry.material, entry.set)?;
    let patches = extract_patches(&fragment, &positions, cfg.patch)?;
    let spectral = cfg.spectral();
    let per_patch = par::map(&patches, |p| featurize_patch(p, &spectral));
    let mut out = Vec::with_capacity(patches.len() * FeatureKind::ALL.len());
    for v in per_patch {
        out.extend(v?);
    }
    Ok(out)
}

/// Samples every filled fragment and writes all five feature vectors per
/// sample to `features/features.jsonl`. Fragments too small to sample or
/// whose fill failed are listed in `features/skipped.json`.
pub fn cmd_features(cfg: &RunConfig) -> Result<FeatureSummary> {
    cfg.validate()?;
    let fills = load_fill(cfg)?;
    let fill_dir = cfg.stage_dir("fill");
    let dir = cfg.stage_dir("features");
    fresh_dir(&dir)?;
    let results = par::map(&fills, |e| {
        if e.status == FillStatus::Failed {
            return Ok(None);
        }
        match featurize_fragment(e, cfg, &fill_dir) {
            Ok(v) => Ok(Some(Ok(v))),
            Err(err @ (Error::FragmentTooSmall { .. } | Error::EmptyMask)) => Ok(Some(Err(err))),
            Err(err) => Err(err),
        }
    });

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut fragments = 0;
    for (entry, result) in fills.iter().zip(results) {
        let reason = match result? {
            None => format!("fill failed: {}", entry.error.as_deref().unwrap_or("unknown error")),
            Some(Err(e)) => e.to_string(),
            Some(Ok(v)) => {
                fragments += 1;
                records.extend(v);
                continue;
            }
        };
        log::warn!("skipping {} ({}): {reason}", entry.fragment_id, entry.set);
        skipped.push(SkipEntry {
            fragment_id: entry.fragment_id.clone(),
            set: entry.set,
            reason,
        });
    }
    records.sort_by(|a, b| {
        (a.set, &a.fragment_id, a.sample_index, a.kind).cmp(&(b.set, &b.fragment_id, b.sample_index, b.kind))
    });
    write_features(&dir.join("features.jsonl"), &records)?;
    write_json(&dir.join("skipped.json"), &skipped)?;
    write_config(&dir, cfg)?;
    Ok(FeatureSummary {
        records: records.len(),
        fragments,
        skipped,
    })
}

/// Leave-one-fragment-out evaluation for each selected (set, kind), written
/// as JSON per pair plus a combined text report.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Vec<EvaluationReport>> {
    cfg.validate()?;
    let store = cfg.stage_dir("features").join("features.jsonl");
    let records = read_features(&store)?;
    let mut groups: BTreeMap<(ImageSet, FeatureKind), Vec<FeatureVector>> = BTreeMap::new();
    for r in records {
        if (cfg.sets.is_empty() || cfg.sets.contains(&r.set)) && cfg.fv.contains(&r.kind) {
            groups.entry((r.set, r.kind)).or_default().push(r);
        }
    }
    let mut sets: Vec<ImageSet> = groups.keys().map(|k| k.0).collect();
    sets.dedup();
    for s in &cfg.sets {
        if !sets.contains(s) {
            return Err(Error::Evaluation(format!(
                "no feature records for set {s} in {}",
                store.display()
            )));
        }
    }
    if sets.is_empty() {
        return Err(Error::Evaluation(format!("no feature records in {}", store.display())));
    }
    let mut missing = Vec::new();
    for &s in &sets {
        for &k in &cfg.fv {
            if !groups.contains_key(&(s, k)) {
                missing.push(format!("{s}/{k}"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Evaluation(format!(
            "missing feature kinds: {}",
            missing.join(", ")
        )));
    }

    let dir = cfg.stage_dir("evaluate");
    fresh_dir(&dir)?;
    let mut reports = Vec::with_capacity(groups.len());
    for ((set, kind), vectors) in groups {
        let dictionary = Dictionary::build(vectors, cfg.samples_per_fragment())?;
        let report = loo_evaluate(&dictionary)?;
        write_json(&dir.join(format!("report_{set}_{kind}.json")), &report)?;
        reports.push(report);
    }
    write_text(&dir.join("report.txt"), &report::render_all(&reports))?;
    write_config(&dir, cfg)?;
    Ok(reports)
}

/// Runs segment, fill, features and evaluate in order.
pub fn run_all(manifest: &Manifest, cfg: &RunConfig) -> Result<Vec<EvaluationReport>> {
    cmd_segment(manifest, cfg)?;
    cmd_fill(cfg)?;
    cmd_features(cfg)?;
    cmd_evaluate(cfg)
}

/// Renders a synthetic corpus into `out`: `plates/`, `masks/` (text masks in
/// plate coordinates), `truth/` (surfaces before holes and ink), plus
/// `manifest.json` and the corpus spec used. Returns the manifest path.
pub fn cmd_synth(corpus: &CorpusSpec, out: &Path) -> Result<PathBuf> {
    for sub in ["plates", "masks", "truth"] {
        create_dir(&out.join(sub))?;
    }
    let written = par::map(&corpus.fragments, |entry| -> Result<ManifestRecord> {
        let fragment = generate(&entry.spec)?;
        let (plate, text) = render_plate(&fragment, corpus.margin);
        let image = PathBuf::from("plates").join(format!("{}.png", entry.plate_id));
        let mask = PathBuf::from("masks").join(format!("{}-text.png", entry.plate_id));
        plate.save_png(&out.join(&image))?;
        text.save_png(&out.join(&mask))?;
        fragment
            .ground_truth
            .save_png(&out.join("truth").join(format!("{}.png", entry.plate_id)))?;
        Ok(ManifestRecord {
            image_path: image,
            set: corpus.set,
            plate_id: entry.plate_id.clone(),
            material: entry.spec.kind.material(),
            fragment_mask_path: None,
            text_mask_path: Some(mask),
        })
    });
    let records = written.into_iter().collect::<Result<Vec<_>>>()?;
    let path = out.join("manifest.json");
    write_json(&path, &records)?;
    write_json(&out.join("corpus.json"), corpus)?;
    Ok(path)
}
