//! Nearest-neighbour dictionary, leave-one-fragment-out voting and metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{FeatureKind, FeatureVector};
use crate::types::{ImageSet, Material};

/// Samples each fragment contributes with the default 5x5 sampling grid.
pub const SAMPLES_PER_FRAGMENT: usize = 25;

/// Immutable store of one feature kind for one image set.
#[derive(Debug, Clone)]
pub struct Dictionary {
    kind: FeatureKind,
    set: ImageSet,
    dim: usize,
    per_fragment: usize,
    entries: Vec<FeatureVector>,
    by_fragment: BTreeMap<String, Vec<usize>>,
}

impl Dictionary {
    /// Builds a dictionary requiring exactly `per_fragment` vectors per fragment.
    pub fn build(vectors: Vec<FeatureVector>, per_fragment: usize) -> Result<Self> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::Dictionary("no feature vectors supplied".into()))?;
        let (kind, set, dim) = (first.kind, first.set, first.values.len());
        let mut by_fragment: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, v) in vectors.iter().enumerate() {
            if v.kind != kind {
                return Err(Error::Dictionary(format!("mixed kinds: {} and {}", kind, v.kind)));
            }
            if v.set != set {
                return Err(Error::Dictionary(format!("mixed image sets: {} and {}", set, v.set)));
            }
            if v.values.len() != dim {
                return Err(Error::Dictionary(format!(
                    "vector length {} differs from {dim} ({} sample {})",
                    v.values.len(),
                    v.fragment_id,
                    v.sample_index
                )));
            }
            by_fragment.entry(v.fragment_id.clone()).or_default().push(i);
        }
        for (id, idx) in &by_fragment {
            if idx.len() != per_fragment {
                return Err(Error::Dictionary(format!(
                    "fragment {id} has {} vectors, expected {per_fragment}",
                    idx.len()
                )));
            }
            let label = vectors[idx[0]].label;
            if idx.iter().any(|&i| vectors[i].label != label) {
                return Err(Error::Dictionary(format!("fragment {id} carries conflicting labels")));
            }
        }
        Ok(Self {
            kind,
            set,
            dim,
            per_fragment,
            entries: vectors,
            by_fragment,
        })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn set(&self) -> ImageSet {
        self.set
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn per_fragment(&self) -> usize {
        self.per_fragment
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[FeatureVector] {
        &self.entries
    }

    /// Fragment ids in lexicographic order.
    pub fn fragment_ids(&self) -> impl Iterator<Item = &str> {
        self.by_fragment.keys().map(String::as_str)
    }

    pub fn fragment_entries(&self, fragment_id: &str) -> Option<&[usize]> {
        self.by_fragment.get(fragment_id).map(Vec::as_slice)
    }

    pub fn fragment_label(&self, fragment_id: &str) -> Option<Material> {
        self.fragment_entries(fragment_id).map(|idx| self.entries[idx[0]].label)
    }
}

/// Dictionary with the default 25 vectors per fragment.
pub fn build_dictionary(vectors: Vec<FeatureVector>) -> Result<Dictionary> {
    Dictionary::build(vectors, SAMPLES_PER_FRAGMENT)
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Closest dictionary entry to a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestMatch {
    pub entry: usize,
    pub fragment_id: String,
    pub sample_index: usize,
    pub label: Material,
    pub distance: f64,
}

/// Euclidean nearest neighbour among entries not belonging to `excluded_fragment`.
///
/// Equal distances resolve to the smallest (fragment_id, sample_index), so the
/// answer does not depend on entry order.
pub fn nearest_label(query: &FeatureVector, d: &Dictionary, excluded_fragment: &str) -> Result<NearestMatch> {
    if query.kind != d.kind {
        return Err(Error::Dictionary(format!(
            "query kind {} does not match dictionary kind {}",
            query.kind, d.kind
        )));
    }
    if query.values.len() != d.dim {
        return Err(Error::Dictionary(format!(
            "query length {} does not match dictionary length {}",
            query.values.len(),
            d.dim
        )));
    }
    let entries = &d.entries;
    let best = par::min_indexed(entries.len(), |i| {
        let e = &entries[i];
        if e.fragment_id == excluded_fragment {
            return None;
        }
        // squared distances are non-negative, so their bit patterns order like the values
        let dist = squared_distance(&query.values, &e.values);
        Some((dist.to_bits(), e.fragment_id.as_str(), e.sample_index, i))
    });
    let (bits, _, _, i) = best.ok_or_else(|| {
        Error::Dictionary(format!(
            "no candidates left after excluding fragment {excluded_fragment}"
        ))
    })?;
    let e = &entries[i];
    Ok(NearestMatch {
        entry: i,
        fragment_id: e.fragment_id.clone(),
        sample_index: e.sample_index,
        label: e.label,
        distance: f64::from_bits(bits).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMatch {
    pub sample_index: usize,
    pub matched_fragment_id: String,
    pub matched_sample_index: usize,
    pub matched_label: Material,
    pub distance: f64,
}

/// Voting outcome for one held-out fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentResult {
    pub fragment_id: String,
    pub true_label: Material,
    pub predicted_label: Material,
    pub votes_parchment: usize,
    pub votes_papyrus: usize,
    /// Majority share of the votes, in percent.
    pub belief: f64,
    pub per_sample_matches: Vec<SampleMatch>,
}

impl FragmentResult {
    pub fn is_correct(&self) -> bool {
        self.true_label == self.predicted_label
    }
}

/// Tallies per-sample labels into a fragment decision.
///
/// With an even sample count a tied vote goes to the label of the single
/// closest match.
pub fn tally_votes(fragment_id: &str, true_label: Material, matches: Vec<SampleMatch>) -> FragmentResult {
    let votes_papyrus = matches.iter().filter(|m| m.matched_label == Material::Papyrus).count();
    let votes_parchment = matches.len() - votes_papyrus;
    let predicted_label = match votes_parchment.cmp(&votes_papyrus) {
        std::cmp::Ordering::Greater => Material::Parchment,
        std::cmp::Ordering::Less => Material::Papyrus,
        std::cmp::Ordering::Equal => matches
            .iter()
            .min_by(|a, b| {
                a.distance
                    .total_cmp(&b.distance)
                    .then_with(|| a.matched_fragment_id.cmp(&b.matched_fragment_id))
                    .then(a.matched_sample_index.cmp(&b.matched_sample_index))
            })
            .map_or(Material::Parchment, |m| m.matched_label),
    };
    let total = matches.len().max(1);
    let belief = votes_parchment.max(votes_papyrus) as f64 / total as f64 * 100.0;
    FragmentResult {
        fragment_id: fragment_id.to_string(),
        true_label,
        predicted_label,
        votes_parchment,
        votes_papyrus,
        belief,
        per_sample_matches: matches,
    }
}

/// Holds out every vector of `fragment_id` and votes over their nearest matches.
pub fn classify_fragment(d: &Dictionary, fragment_id: &str) -> Result<FragmentResult> {
    let idx = d
        .fragment_entries(fragment_id)
        .ok_or_else(|| Error::Dictionary(format!("fragment {fragment_id} is not in the dictionary")))?;
    let mut matches = Vec::with_capacity(idx.len());
    for &i in idx {
        let q = &d.entries[i];
        let m = nearest_label(q, d, fragment_id)?;
        matches.push(SampleMatch {
            sample_index: q.sample_index,
            matched_fragment_id: m.fragment_id,
            matched_sample_index: m.sample_index,
            matched_label: m.label,
            distance: m.distance,
        });
    }
    matches.sort_by_key(|m| m.sample_index);
    Ok(tally_votes(fragment_id, d.entries[idx[0]].label, matches))
}

/// 2x2 confusion counts; rows are true classes, columns predictions,
/// both ordered parchment, papyrus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 2]; 2],
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: Material, predicted: Material) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    /// Reconstructs counts from row percentages and per-class totals,
    /// rounding each cell to the nearest whole item.
    pub fn from_row_percentages(percent: [[f64; 2]; 2], class_totals: [usize; 2]) -> Self {
        let mut counts = [[0usize; 2]; 2];
        for t in 0..2 {
            for p in 0..2 {
                counts[t][p] = (percent[t][p] / 100.0 * class_totals[t] as f64).round() as usize;
            }
        }
        Self { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, truth: Material) -> usize {
        self.counts[truth.index()].iter().sum()
    }

    pub fn column_total(&self, predicted: Material) -> usize {
        self.counts[0][predicted.index()] + self.counts[1][predicted.index()]
    }

    /// Row-normalised percentages (a row with no items is all zeros).
    pub fn row_percentages(&self) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for t in Material::ALL {
            let total = self.row_total(t);
            if total > 0 {
                for p in Material::ALL {
                    out[t.index()][p.index()] = self.counts[t.index()][p.index()] as f64 / total as f64 * 100.0;
                }
            }
        }
        out
    }

    /// Percentage of items on the diagonal.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (self.counts[0][0] + self.counts[1][1]) as f64 / total as f64 * 100.0
    }

    pub fn class_metrics(&self, class: Material) -> ClassMetrics {
        let tp = self.counts[class.index()][class.index()];
        let predicted = self.column_total(class);
        let actual = self.row_total(class);
        let mut notes = Vec::new();
        let precision = if predicted == 0 {
            notes.push(format!(
                "precision undefined for {class}: no predictions; reported as 0"
            ));
            0.0
        } else {
            tp as f64 / predicted as f64
        };
        let recall = if actual == 0 {
            notes.push(format!("recall undefined for {class}: no true items; reported as 0"));
            0.0
        } else {
            tp as f64 / actual as f64
        };
        if precision == 0.0 && recall == 0.0 {
            notes.push(format!("F1 for {class} defined as 0 (precision = recall = 0)"));
        }
        ClassMetrics {
            class,
            precision,
            recall,
            f1: f1(precision, recall),
            notes,
        }
    }
}

/// Balanced F1; 0 when precision and recall are both 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        return 0.0;
    }
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: Material,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Metrics at one level (fragment or sample).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub confusion: ConfusionMatrix,
    pub confusion_percent: [[f64; 2]; 2],
    pub accuracy: f64,
    pub classes: Vec<ClassMetrics>,
}

impl LevelReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        Self {
            confusion,
            confusion_percent: confusion.row_percentages(),
            accuracy: confusion.accuracy(),
            classes: Material::ALL.iter().map(|&c| confusion.class_metrics(c)).collect(),
        }
    }

    pub fn class(&self, class: Material) -> &ClassMetrics {
        &self.classes[class.index()]
    }
}

/// Leave-one-fragment-out outcome for one feature kind on one image set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub kind: FeatureKind,
    pub set: ImageSet,
    pub fragment_count: usize,
    pub samples_per_fragment: usize,
    /// Fragment-level accuracy in percent.
    pub overall_accuracy: f64,
    pub fragment_level: LevelReport,
    pub sample_level: LevelReport,
    pub notes: Vec<String>,
    pub fragments: Vec<FragmentResult>,
}

pub const SAMPLE_LEVEL_NOTE: &str =
    "sample-level predictions are the labels of each held-out sample's nearest dictionary entry";

/// Classifies every fragment with itself held out and aggregates metrics.
pub fn loo_evaluate(d: &Dictionary) -> Result<EvaluationReport> {
    let ids: Vec<&str> = d.fragment_ids().collect();
    if ids.len() < 2 {
        return Err(Error::Evaluation(format!(
            "leave-one-out needs at least 2 fragments, got {}",
            ids.len()
        )));
    }
    for class in Material::ALL {
        if !ids.iter().any(|id| d.fragment_label(id) == Some(class)) {
            return Err(Error::Evaluation(format!(
                "no {class} fragments: evaluation is degenerate"
            )));
        }
    }

    let fragments = par::map(&ids, |id| classify_fragment(d, id))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut frag_conf = ConfusionMatrix::default();
    let mut sample_conf = ConfusionMatrix::default();
    for r in &fragments {
        frag_conf.record(r.true_label, r.predicted_label);
        for m in &r.per_sample_matches {
            sample_conf.record(r.true_label, m.matched_label);
        }
    }
    let fragment_level = LevelReport::from_confusion(frag_conf);
    let sample_level = LevelReport::from_confusion(sample_conf);
    let mut notes = vec![SAMPLE_LEVEL_NOTE.to_string()];
    for level in [&fragment_level, &sample_level] {
        for c in &level.classes {
            notes.extend(c.notes.iter().cloned());
        }
    }
    Ok(EvaluationReport {
        kind: d.kind,
        set: d.set,
        fragment_count: fragments.len(),
        samples_per_fragment: d.per_fragment,
        overall_accuracy: fragment_level.accuracy,
        fragment_level,
        sample_level,
        notes,
        fragments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fv(fragment: &str, sample: usize, label: Material, values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            fragment_id: fragment.into(),
            sample_index: sample,
            kind: FeatureKind::GridMean,
            label,
            set: ImageSet::Color,
            values,
        }
    }

    fn fragment_vectors(id: &str, label: Material, n: usize, f: impl Fn(usize) -> Vec<f64>) -> Vec<FeatureVector> {
        (0..n).map(|i| fv(id, i, label, f(i))).collect()
    }

    #[test]
    fn dictionary_counts() {
        let mut v = fragment_vectors("a", Material::Parchment, 25, |i| vec![i as f64]);
        v.extend(fragment_vectors("b", Material::Papyrus, 25, |i| vec![i as f64]));
        let d = build_dictionary(v).unwrap();
        assert_eq!(d.len(), 50);
        assert_eq!(d.fragment_ids().count(), 2);

        let mut big = Vec::new();
        for f in 0..33 {
            big.extend(fragment_vectors(&format!("f{f:02}"), Material::Parchment, 25, |i| {
                vec![i as f64]
            }));
        }
        assert_eq!(build_dictionary(big).unwrap().len(), 825);
    }

    #[test]
    fn dictionary_rejects_short_fragment_and_mixed_kinds() {
        let v = fragment_vectors("a", Material::Parchment, 24, |_| vec![0.0]);
        assert!(matches!(build_dictionary(v), Err(Error::Dictionary(_))));
        let mut v = fragment_vectors("a", Material::Parchment, 25, |_| vec![0.0]);
        v[3].kind = FeatureKind::GridSd;
        assert!(matches!(build_dictionary(v), Err(Error::Dictionary(_))));
    }

    #[test]
    fn nearest_prototype() {
        let v = vec![
            fv("p", 0, Material::Parchment, vec![0.0, 0.0]),
            fv("q", 0, Material::Papyrus, vec![1.0, 1.0]),
        ];
        let d = Dictionary::build(v, 1).unwrap();
        let q = fv("z", 0, Material::Papyrus, vec![0.1, 0.1]);
        assert_eq!(nearest_label(&q, &d, "z").unwrap().label, Material::Parchment);
    }

    #[test]
    fn excluded_fragment_is_never_returned() {
        let v = vec![
            fv("p", 0, Material::Parchment, vec![0.0, 0.0]),
            fv("q", 0, Material::Papyrus, vec![5.0, 5.0]),
        ];
        let d = Dictionary::build(v, 1).unwrap();
        let q = fv("p", 0, Material::Parchment, vec![0.0, 0.0]);
        let m = nearest_label(&q, &d, "p").unwrap();
        assert_eq!(m.fragment_id, "q");
        let only = Dictionary::build(vec![fv("p", 0, Material::Parchment, vec![0.0])], 1).unwrap();
        assert!(nearest_label(&fv("p", 0, Material::Parchment, vec![0.0]), &only, "p").is_err());
    }

    #[test]
    fn distance_ties_resolve_lexicographically() {
        let v = vec![
            fv("b", 0, Material::Papyrus, vec![1.0]),
            fv("a", 1, Material::Parchment, vec![-1.0]),
        ];
        let d = Dictionary::build(v, 1).unwrap();
        let m = nearest_label(&fv("z", 0, Material::Papyrus, vec![0.0]), &d, "z").unwrap();
        assert_eq!((m.fragment_id.as_str(), m.sample_index), ("a", 1));
    }

    fn matches_with(labels: &[Material]) -> Vec<SampleMatch> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| SampleMatch {
                sample_index: i,
                matched_fragment_id: "x".into(),
                matched_sample_index: i,
                matched_label: l,
                distance: 1.0 + i as f64,
            })
            .collect()
    }

    #[test]
    fn unanimous_vote() {
        let r = tally_votes("f", Material::Parchment, matches_with(&[Material::Parchment; 25]));
        assert_eq!(r.predicted_label, Material::Parchment);
        assert_eq!(r.belief, 100.0);
    }

    #[test]
    fn narrow_majority() {
        let mut labels = vec![Material::Papyrus; 13];
        labels.extend([Material::Parchment; 12]);
        let r = tally_votes("f", Material::Parchment, matches_with(&labels));
        assert_eq!(r.predicted_label, Material::Papyrus);
        assert_eq!((r.votes_papyrus, r.votes_parchment), (13, 12));
        assert!((r.belief - 52.0).abs() < 1e-12);
    }

    #[test]
    fn even_tie_goes_to_closest_match() {
        let r = tally_votes(
            "f",
            Material::Parchment,
            matches_with(&[Material::Papyrus, Material::Parchment]),
        );
        assert_eq!(r.predicted_label, Material::Papyrus);
        assert_eq!(r.belief, 50.0);
    }

    #[test]
    fn separable_pair_of_fragments() {
        // Each fragment's nearest neighbours lie in the other fragment, so
        // each is predicted as the other's label.
        let mut v = fragment_vectors("a", Material::Parchment, 25, |i| vec![0.0, i as f64 * 1e-3]);
        v.extend(fragment_vectors("b", Material::Papyrus, 25, |i| {
            vec![10.0, i as f64 * 1e-3]
        }));
        let d = build_dictionary(v).unwrap();
        let ra = classify_fragment(&d, "a").unwrap();
        let rb = classify_fragment(&d, "b").unwrap();
        assert_eq!(ra.predicted_label, Material::Papyrus);
        assert_eq!(rb.predicted_label, Material::Parchment);
        assert!(ra.per_sample_matches.iter().all(|m| m.matched_fragment_id == "b"));
    }

    #[test]
    fn separable_clusters_evaluate_perfectly() {
        let mut v = Vec::new();
        for f in 0..4 {
            v.extend(fragment_vectors(&format!("p{f}"), Material::Parchment, 25, |i| {
                vec![f as f64 * 0.01, i as f64 * 0.001]
            }));
        }
        for f in 0..3 {
            v.extend(fragment_vectors(&format!("y{f}"), Material::Papyrus, 25, |i| {
                vec![100.0 + f as f64 * 0.01, i as f64 * 0.001]
            }));
        }
        let r = loo_evaluate(&build_dictionary(v).unwrap()).unwrap();
        assert_eq!(r.overall_accuracy, 100.0);
        assert_eq!(r.fragment_level.confusion_percent, [[100.0, 0.0], [0.0, 100.0]]);
        assert_eq!(r.sample_level.confusion_percent, [[100.0, 0.0], [0.0, 100.0]]);
        for level in [&r.fragment_level, &r.sample_level] {
            assert!(level.classes.iter().all(|c| c.f1 == 1.0));
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let mut v = fragment_vectors("a", Material::Parchment, 25, |i| vec![i as f64]);
        v.extend(fragment_vectors("b", Material::Parchment, 25, |i| vec![i as f64]));
        assert!(matches!(
            loo_evaluate(&build_dictionary(v).unwrap()),
            Err(Error::Evaluation(_))
        ));
    }

    #[test]
    fn f1_examples() {
        assert!((f1(1.0, 0.70) - 0.8235294117647058).abs() < 1e-12);
        assert_eq!(f1(1.0, 1.0), 1.0);
        assert!((f1(0.89, 0.80) - 0.8426035502958579).abs() < 1e-12);
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    #[test]
    fn table_composition_gives_reported_accuracy() {
        let color = ConfusionMatrix::from_row_percentages([[100.0, 0.0], [30.0, 70.0]], [23, 10]);
        assert_eq!(color.counts, [[23, 0], [3, 7]]);
        assert!((color.accuracy() - 90.9).abs() < 0.1);
        let papyrus = color.class_metrics(Material::Papyrus);
        assert_eq!(papyrus.precision, 1.0);
        assert!((papyrus.recall - 0.70).abs() < 1e-12);
        assert!((papyrus.f1 - 0.82).abs() < 0.005);
        let parchment = color.class_metrics(Material::Parchment);
        assert!((parchment.precision - 0.88).abs() < 0.005);
        assert!((parchment.f1 - 0.94).abs() < 0.005);
    }

    #[test]
    fn undefined_precision_is_flagged() {
        let mut c = ConfusionMatrix::default();
        c.record(Material::Parchment, Material::Parchment);
        c.record(Material::Papyrus, Material::Parchment);
        let m = c.class_metrics(Material::Papyrus);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(!m.notes.is_empty());
    }

    fn random_dictionary(rng: &mut ChaCha8Rng, fragments: usize, per: usize, dim: usize) -> Dictionary {
        let mut v = Vec::new();
        for f in 0..fragments {
            let label = if f % 3 == 0 {
                Material::Papyrus
            } else {
                Material::Parchment
            };
            for s in 0..per {
                // coarse values make exact distance ties common
                v.push(fv(
                    &format!("f{f:03}"),
                    s,
                    label,
                    (0..dim).map(|_| rng.random_range(0..3) as f64).collect(),
                ));
            }
        }
        Dictionary::build(v, per).unwrap()
    }

    fn exhaustive(query: &FeatureVector, d: &Dictionary, excluded: &str) -> (String, usize) {
        let mut best: Option<(f64, &str, usize)> = None;
        for e in d.entries() {
            if e.fragment_id == excluded {
                continue;
            }
            let dist = squared_distance(&query.values, &e.values);
            let cand = (dist, e.fragment_id.as_str(), e.sample_index);
            let take = match best {
                None => true,
                Some(b) => cand.0 < b.0 || (cand.0 == b.0 && (cand.1, cand.2) < (b.1, b.2)),
            };
            if take {
                best = Some(cand);
            }
        }
        let b = best.unwrap();
        (b.1.to_string(), b.2)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn nearest_matches_exhaustive_scan(seed in any::<u64>(), fragments in 2usize..20, per in 1usize..6, dim in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = random_dictionary(&mut rng, fragments, per, dim);
            for q in d.entries() {
                let m = nearest_label(q, &d, &q.fragment_id).unwrap();
                prop_assert_eq!((m.fragment_id.clone(), m.sample_index), exhaustive(q, &d, &q.fragment_id));
                prop_assert_ne!(&m.fragment_id, &q.fragment_id);
            }
        }

        #[test]
        fn shuffling_entries_keeps_predictions(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = random_dictionary(&mut rng, 9, 5, 3);
            let mut shuffled = d.entries().to_vec();
            shuffled.shuffle(&mut rng);
            let d2 = Dictionary::build(shuffled, 5).unwrap();
            let a = loo_evaluate(&d).unwrap();
            let b = loo_evaluate(&d2).unwrap();
            for (x, y) in a.fragments.iter().zip(&b.fragments) {
                prop_assert_eq!(x.predicted_label, y.predicted_label);
                prop_assert_eq!(x.votes_papyrus, y.votes_papyrus);
            }
        }

        #[test]
        fn reported_f1_recomputes(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = random_dictionary(&mut rng, 12, 5, 4);
            let r = loo_evaluate(&d).unwrap();
            for level in [&r.fragment_level, &r.sample_level] {
                for c in &level.classes {
                    prop_assert!((c.f1 - f1(c.precision, c.recall)).abs() <= 0.005);
                }
                for row in level.confusion_percent {
                    let s = row[0] + row[1];
                    prop_assert!(s == 0.0 || (s - 100.0).abs() <= 0.1);
                }
            }
            for f in &r.fragments {
                prop_assert_eq!(f.votes_parchment + f.votes_papyrus, 5);
                prop_assert!(f.per_sample_matches.iter().all(|m| m.matched_fragment_id != f.fragment_id));
            }
        }
    }
}
