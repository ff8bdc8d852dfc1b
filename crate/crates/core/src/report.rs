//! Plain-text tables for evaluation reports.

use std::fmt::Write;

use crate::classify::{EvaluationReport, LevelReport};
use crate::spectral::FeatureKind;
use crate::types::{ImageSet, Material};

pub fn short_name(kind: FeatureKind) -> &'static str {
    match kind {
        FeatureKind::GridMean => "MFV",
        FeatureKind::GridSd => "SDFV",
        FeatureKind::RingMean => "Ring mean",
        FeatureKind::RingSd => "Ring SD",
        FeatureKind::WeightedBin => "Weighted bin",
    }
}

fn sets_of(reports: &[EvaluationReport]) -> Vec<ImageSet> {
    let mut sets: Vec<ImageSet> = reports.iter().map(|r| r.set).collect();
    sets.sort();
    sets.dedup();
    sets
}

fn kinds_of(reports: &[EvaluationReport]) -> Vec<FeatureKind> {
    let mut kinds: Vec<FeatureKind> = reports.iter().map(|r| r.kind).collect();
    kinds.sort();
    kinds.dedup();
    kinds
}

fn find(reports: &[EvaluationReport], set: ImageSet, kind: FeatureKind) -> Option<&EvaluationReport> {
    reports.iter().find(|r| r.set == set && r.kind == kind)
}

/// Fragment-level success per image set and feature vector.
pub fn success_table(reports: &[EvaluationReport]) -> String {
    let kinds = kinds_of(reports);
    let mut out = String::from("Classification Success (%)\n");
    let _ = write!(out, "{:<16}", "Image type");
    for k in &kinds {
        let _ = write!(out, "{:>14}", short_name(*k));
    }
    out.push('\n');
    for set in sets_of(reports) {
        let _ = write!(out, "{:<16}", set.title());
        for &k in &kinds {
            match find(reports, set, k) {
                Some(r) => {
                    let _ = write!(out, "{:>14.1}", r.overall_accuracy);
                }
                None => {
                    let _ = write!(out, "{:>14}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Row-normalised fragment confusion matrix for one feature vector.
pub fn confusion_table(reports: &[EvaluationReport], kind: FeatureKind) -> String {
    let mut out = format!("Confusion Matrix (%) for {}\n", kind.title());
    let _ = writeln!(
        out,
        "{:<16}{:<12}{:>12}{:>12}",
        "Image type", "True class", "Parchment", "Papyrus"
    );
    for set in sets_of(reports) {
        let Some(r) = find(reports, set, kind) else { continue };
        for truth in Material::ALL {
            let row = r.fragment_level.confusion_percent[truth.index()];
            let label = if truth == Material::Parchment { set.title() } else { "" };
            let _ = writeln!(
                out,
                "{:<16}{:<12}{:>12.1}{:>12.1}",
                label,
                truth.title(),
                row[0],
                row[1]
            );
        }
    }
    out
}

fn level_rows(
    out: &mut String,
    reports: &[EvaluationReport],
    kind: FeatureKind,
    pick: fn(&EvaluationReport) -> &LevelReport,
) {
    for set in sets_of(reports) {
        let Some(r) = find(reports, set, kind) else { continue };
        for truth in Material::ALL {
            let c = pick(r).class(truth);
            let label = if truth == Material::Parchment { set.title() } else { "" };
            let _ = writeln!(
                out,
                "{:<16}{:<12}{:>11.2}{:>11.2}{:>11.2}",
                label,
                truth.title(),
                c.precision,
                c.recall,
                c.f1
            );
        }
    }
}

/// Precision, recall and F-score at one level for every evaluated feature vector.
pub fn metrics_table(reports: &[EvaluationReport], fragment_level: bool) -> String {
    let level = if fragment_level { "Fragment" } else { "Sample" };
    let mut out = format!("Precision, Recall and F-score for Classification at the {level} Level\n");
    let pick: fn(&EvaluationReport) -> &LevelReport = if fragment_level {
        |r| &r.fragment_level
    } else {
        |r| &r.sample_level
    };
    for kind in kinds_of(reports) {
        let _ = writeln!(out, "[{}]", short_name(kind));
        let _ = writeln!(
            out,
            "{:<16}{:<12}{:>11}{:>11}{:>11}",
            "Image type", "Material", "Precision", "Recall", "F-score"
        );
        level_rows(&mut out, reports, kind, pick);
    }
    out
}

/// Every table, separated by blank lines, plus any report notes.
pub fn render_all(reports: &[EvaluationReport]) -> String {
    let mut sections = vec![success_table(reports)];
    for kind in kinds_of(reports) {
        sections.push(confusion_table(reports, kind));
    }
    sections.push(metrics_table(reports, true));
    sections.push(metrics_table(reports, false));
    let mut notes: Vec<&str> = reports
        .iter()
        .flat_map(|r| r.notes.iter().map(String::as_str))
        .collect();
    notes.sort();
    notes.dedup();
    if !notes.is_empty() {
        let mut s = String::from("Notes\n");
        for n in notes {
            let _ = writeln!(s, "- {n}");
        }
        sections.push(s);
    }
    sections.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{ConfusionMatrix, LevelReport};

    fn report(kind: FeatureKind, set: ImageSet, conf: ConfusionMatrix) -> EvaluationReport {
        let level = LevelReport::from_confusion(conf);
        EvaluationReport {
            kind,
            set,
            fragment_count: conf.total(),
            samples_per_fragment: 25,
            overall_accuracy: level.accuracy,
            fragment_level: level.clone(),
            sample_level: level,
            notes: vec![],
            fragments: vec![],
        }
    }

    #[test]
    fn confusion_rows_follow_table_layout() {
        let color = ConfusionMatrix::from_row_percentages([[100.0, 0.0], [30.0, 70.0]], [23, 10]);
        let ms = ConfusionMatrix::from_row_percentages([[100.0, 0.0], [10.0, 90.0]], [23, 10]);
        let reports = vec![
            report(FeatureKind::GridMean, ImageSet::Color, color),
            report(FeatureKind::GridMean, ImageSet::Multispectral, ms),
        ];
        let t = confusion_table(&reports, FeatureKind::GridMean);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "Confusion Matrix (%) for the MFV");
        assert!(lines[2].starts_with("Color") && lines[2].ends_with("100.0         0.0"));
        assert!(lines[3].contains("Papyrus") && lines[3].ends_with("30.0        70.0"));
        assert!(lines[5].ends_with("10.0        90.0"));

        let s = success_table(&reports);
        assert!(s.contains("90.9") && s.contains("97.0"), "{s}");
        let m = metrics_table(&reports, true);
        assert!(m.contains("0.82") && m.contains("0.88"), "{m}");
    }
}
