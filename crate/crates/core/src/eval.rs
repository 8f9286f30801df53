//! Boundary precision, recall and F1, and segment-length statistics.
//!
//! A boundary is a SPLIT at positions `1..n`; position 0 never counts.
//! Matching is exact by position. Corpus scores are micro-averaged: counts
//! are pooled over documents before computing the ratios.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transcript::{labels_to_segments, SegmentationLabels};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("document {source_id:?}: predicted length {predicted} differs from reference length {reference}")]
    LengthMismatch {
        source_id: String,
        predicted: usize,
        reference: usize,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    fn add(&mut self, other: Counts) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub segment_count: usize,
    pub token_count: usize,
    pub mean_segment_len: f64,
    pub max_segment_len: usize,
    pub min_segment_len: usize,
}

pub fn segment_lengths(labels: &SegmentationLabels) -> Vec<usize> {
    labels_to_segments(labels).iter().map(|s| s.len()).collect()
}

pub fn segment_stats(labels: &SegmentationLabels) -> SegmentStats {
    stats_of(&segment_lengths(labels))
}

fn stats_of(lengths: &[usize]) -> SegmentStats {
    let total: usize = lengths.iter().sum();
    SegmentStats {
        segment_count: lengths.len(),
        token_count: total,
        mean_segment_len: ratio(total, lengths.len()),
        max_segment_len: lengths.iter().copied().max().unwrap_or(0),
        min_segment_len: lengths.iter().copied().min().unwrap_or(0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentReport {
    pub source_id: String,
    pub tokens: usize,
    #[serde(flatten)]
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub predicted_segments: SegmentStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    #[serde(flatten)]
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Statistics of the predicted segmentation, pooled over documents.
    pub segment_count: usize,
    pub mean_segment_len: f64,
    pub max_segment_len: usize,
    pub reference_segment_count: usize,
    pub documents: Vec<DocumentReport>,
}

fn boundary_set(labels: &SegmentationLabels) -> BTreeSet<usize> {
    labels.boundaries().into_iter().collect()
}

pub fn boundary_counts(predicted: &SegmentationLabels, reference: &SegmentationLabels) -> Counts {
    let p = boundary_set(predicted);
    let r = boundary_set(reference);
    let tp = p.intersection(&r).count();
    Counts {
        true_positives: tp,
        false_positives: p.len() - tp,
        false_negatives: r.len() - tp,
    }
}

/// Single-document report.
pub fn boundary_f1(predicted: &SegmentationLabels, reference: &SegmentationLabels) -> Result<EvalReport, EvalError> {
    evaluate_corpus(&[("document", predicted, reference)])
}

/// Micro-averaged report over `(source_id, predicted, reference)` triples.
pub fn evaluate_corpus<S: AsRef<str>>(
    docs: &[(S, &SegmentationLabels, &SegmentationLabels)],
) -> Result<EvalReport, EvalError> {
    let mut total = Counts::default();
    let mut lengths = Vec::new();
    let mut reference_segments = 0;
    let mut documents = Vec::with_capacity(docs.len());
    for (id, pred, reference) in docs {
        if pred.len() != reference.len() {
            return Err(EvalError::LengthMismatch {
                source_id: id.as_ref().to_string(),
                predicted: pred.len(),
                reference: reference.len(),
            });
        }
        let counts = boundary_counts(pred, reference);
        total.add(counts);
        let doc_lengths = segment_lengths(pred);
        reference_segments += reference.split_count();
        documents.push(DocumentReport {
            source_id: id.as_ref().to_string(),
            tokens: pred.len(),
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            predicted_segments: stats_of(&doc_lengths),
        });
        lengths.extend(doc_lengths);
    }
    let stats = stats_of(&lengths);
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        counts: total,
        precision: total.precision(),
        recall: total.recall(),
        f1: total.f1(),
        segment_count: stats.segment_count,
        mean_segment_len: stats.mean_segment_len,
        max_segment_len: stats.max_segment_len,
        reference_segment_count: reference_segments,
        documents,
    })
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} {:>6} {:>5} {:>5} {:>5} {:>9} {:>9} {:>9}", "document", "tokens", "tp", "fp", "fn", "precision", "recall", "f1");
        for d in &self.documents {
            let _ = writeln!(
                out,
                "{:<24} {:>6} {:>5} {:>5} {:>5} {:>9.4} {:>9.4} {:>9.4}",
                d.source_id,
                d.tokens,
                d.counts.true_positives,
                d.counts.false_positives,
                d.counts.false_negatives,
                d.precision,
                d.recall,
                d.f1
            );
        }
        let tokens: usize = self.documents.iter().map(|d| d.tokens).sum();
        let _ = writeln!(
            out,
            "{:<24} {:>6} {:>5} {:>5} {:>5} {:>9.4} {:>9.4} {:>9.4}",
            "TOTAL (micro)",
            tokens,
            self.counts.true_positives,
            self.counts.false_positives,
            self.counts.false_negatives,
            self.precision,
            self.recall,
            self.f1
        );
        let _ = writeln!(
            out,
            "segments: {} predicted ({} reference), mean length {:.2}, max length {}",
            self.segment_count, self.reference_segment_count, self.mean_segment_len, self.max_segment_len
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n: usize, splits: &[usize]) -> SegmentationLabels {
        SegmentationLabels::from_splits(n, splits).unwrap()
    }

    #[test]
    fn hand_counted_example() {
        let r = boundary_f1(&labels(10, &[3, 8]), &labels(10, &[3, 7])).unwrap();
        assert_eq!(
            r.counts,
            Counts {
                true_positives: 1,
                false_positives: 1,
                false_negatives: 1
            }
        );
        assert_eq!(r.f1, 0.5);
    }

    #[test]
    fn identity_and_degenerate() {
        let x = labels(10, &[4]);
        assert_eq!(boundary_f1(&x, &x).unwrap().f1, 1.0);
        let none = boundary_f1(&labels(10, &[]), &x).unwrap();
        assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
        assert!(boundary_f1(&labels(3, &[]), &labels(4, &[])).is_err());
    }

    #[test]
    fn stats_examples() {
        let s = segment_stats(&labels(20, &[]));
        assert_eq!((s.segment_count, s.mean_segment_len), (1, 20.0));
        let s = segment_stats(&labels(5, &[1, 2, 3, 4]));
        assert_eq!((s.segment_count, s.mean_segment_len), (5, 1.0));
        assert_eq!(segment_lengths(&labels(10, &[3, 7])), vec![3, 4, 3]);
    }

    #[test]
    fn micro_average_pools_counts() {
        let a_pred = labels(10, &[2, 4, 6]);
        let a_ref = labels(10, &[2, 4, 6]);
        let b_pred = labels(10, &[5]);
        let b_ref = labels(10, &[1]);
        let r = evaluate_corpus(&[("a", &a_pred, &a_ref), ("b", &b_pred, &b_ref)]).unwrap();
        assert_eq!(r.f1, 0.75);
        let macro_avg = (r.documents[0].f1 + r.documents[1].f1) / 2.0;
        assert_eq!(macro_avg, 0.5);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["schema_version"], 1);
        assert_eq!(json["true_positives"], 3);
    }

    fn arb_pair() -> impl Strategy<Value = (SegmentationLabels, SegmentationLabels)> {
        (1usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_map(move |(a, b)| {
                    let pick = |v: &[bool]| -> Vec<usize> { (1..n).filter(|&i| v[i]).collect() };
                    (labels(n, &pick(&a)), labels(n, &pick(&b)))
                })
        })
    }

    proptest! {
        #[test]
        fn f1_symmetric_and_bounded((a, b) in arb_pair()) {
            let ab = boundary_f1(&a, &b).unwrap();
            let ba = boundary_f1(&b, &a).unwrap();
            prop_assert_eq!(ab.f1, ba.f1);
            for v in [ab.precision, ab.recall, ab.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if a.split_count() > 1 {
                prop_assert_eq!(boundary_f1(&a, &a).unwrap().f1, 1.0);
            }
        }
    }
}
