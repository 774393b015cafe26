//! Evaluation quantities: doc-level F1, line-wise chunk F1, token
//! retention ratio, and document-length histograms.
//!
//! Accumulators here merge associatively so shard-level results reduce
//! to corpus-level results in any grouping.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{union_removals, ExecPolicy, OutOfRangePolicy};
use crate::program_dsl::RefinementProgram;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("input must be non-empty")]
    EmptyInput,
    #[error("tokens_before must be positive, got {0}")]
    NonPositiveBefore(f64),
    #[error("tokens_after must be non-negative, got {0}")]
    NegativeAfter(f64),
    #[error("bucket edges must be strictly ascending and non-empty")]
    BadEdges,
    #[error("histograms with different bucket edges cannot merge")]
    EdgeMismatch,
}

/// Confusion counts with derived precision, recall, and F1.
///
/// Zero-division conventions: an all-zero confusion matrix scores 1.0
/// everywhere (vacuous perfection); TP = 0 with FP + FN > 0 scores 0.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl F1Report {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else if fn_ == 0 {
            1.0
        } else {
            0.0
        };
        let recall = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else if fp == 0 {
            1.0
        } else {
            0.0
        };
        let f1 = if 2 * tp + fp + fn_ > 0 {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        } else {
            1.0
        };
        F1Report {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Doc-level keep/drop F1 with keep as the positive class.
pub fn doc_f1(predicted_keep: &[bool], gold_keep: &[bool]) -> Result<F1Report, MetricsError> {
    if predicted_keep.len() != gold_keep.len() {
        return Err(MetricsError::LengthMismatch {
            left: predicted_keep.len(),
            right: gold_keep.len(),
        });
    }
    if predicted_keep.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for (p, g) in predicted_keep.iter().zip(gold_keep) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(F1Report::from_counts(tp, fp, fn_))
}

/// The set of line indices a chunk-stage program predicts as noisy.
///
/// Clamped so that stray indices in a malformed prediction are scored
/// rather than crashing the evaluation.
pub fn noisy_line_set(program: &RefinementProgram, line_count: usize) -> BTreeSet<usize> {
    let policy = ExecPolicy {
        out_of_range_lines: OutOfRangePolicy::Clamp,
        ..ExecPolicy::default()
    };
    union_removals(&program.removal_ranges(), line_count, &policy)
        .expect("clamped removal union cannot fail")
}

/// Line-wise F1 between predicted and gold noisy-line index sets.
/// Both sets empty scores 1.0 by convention.
pub fn chunk_line_f1(predicted: &BTreeSet<usize>, gold: &BTreeSet<usize>) -> F1Report {
    let tp = predicted.intersection(gold).count() as u64;
    let fp = predicted.difference(gold).count() as u64;
    let fn_ = gold.difference(predicted).count() as u64;
    F1Report::from_counts(tp, fp, fn_)
}

/// Micro (pooled counts) and macro (mean of per-chunk F1) aggregation of
/// line-wise F1 over many chunks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LineF1Aggregator {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub chunk_count: u64,
    pub per_chunk_f1_sum: f64,
}

impl LineF1Aggregator {
    pub fn add(&mut self, predicted: &BTreeSet<usize>, gold: &BTreeSet<usize>) {
        let report = chunk_line_f1(predicted, gold);
        self.tp += report.tp;
        self.fp += report.fp;
        self.fn_ += report.fn_;
        self.chunk_count += 1;
        self.per_chunk_f1_sum += report.f1;
    }

    pub fn merge(&mut self, other: &LineF1Aggregator) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.chunk_count += other.chunk_count;
        self.per_chunk_f1_sum += other.per_chunk_f1_sum;
    }

    pub fn micro(&self) -> F1Report {
        F1Report::from_counts(self.tp, self.fp, self.fn_)
    }

    pub fn macro_f1(&self) -> Option<f64> {
        (self.chunk_count > 0).then(|| self.per_chunk_f1_sum / self.chunk_count as f64)
    }
}

/// Refined-token count divided by original-token count.
pub fn retention_ratio(tokens_before: f64, tokens_after: f64) -> Result<f64, MetricsError> {
    if tokens_before.is_nan() || tokens_before <= 0.0 {
        return Err(MetricsError::NonPositiveBefore(tokens_before));
    }
    if tokens_after < 0.0 || tokens_after.is_nan() {
        return Err(MetricsError::NegativeAfter(tokens_after));
    }
    Ok(tokens_after / tokens_before)
}

/// Document token-length distribution over half-open buckets
/// `[e_i, e_{i+1})`, the final bucket open-ended. Values below the first
/// edge land in a separately reported underflow bucket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthHistogram {
    pub bucket_edges: Vec<u64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub doc_count: u64,
    pub token_sum: u64,
}

impl LengthHistogram {
    pub fn new(bucket_edges: Vec<u64>) -> Result<Self, MetricsError> {
        if bucket_edges.is_empty() || bucket_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MetricsError::BadEdges);
        }
        let buckets = bucket_edges.len();
        Ok(LengthHistogram {
            bucket_edges,
            counts: vec![0; buckets],
            underflow: 0,
            doc_count: 0,
            token_sum: 0,
        })
    }

    pub fn add(&mut self, tokens: u64) {
        self.doc_count += 1;
        self.token_sum += tokens;
        if tokens < self.bucket_edges[0] {
            self.underflow += 1;
            return;
        }
        let idx = self.bucket_edges.partition_point(|e| *e <= tokens) - 1;
        self.counts[idx] += 1;
    }

    pub fn merge(&mut self, other: &LengthHistogram) -> Result<(), MetricsError> {
        if self.bucket_edges != other.bucket_edges {
            return Err(MetricsError::EdgeMismatch);
        }
        for (mine, theirs) in self.counts.iter_mut().zip(&other.counts) {
            *mine += theirs;
        }
        self.underflow += other.underflow;
        self.doc_count += other.doc_count;
        self.token_sum += other.token_sum;
        Ok(())
    }

    /// Average tokens per document; absent when no documents were added.
    pub fn mean_tokens(&self) -> Option<f64> {
        (self.doc_count > 0).then(|| self.token_sum as f64 / self.doc_count as f64)
    }
}

/// Bin a batch of token counts in one call.
pub fn length_histogram(
    token_counts: &[u64],
    bucket_edges: &[u64],
) -> Result<LengthHistogram, MetricsError> {
    let mut hist = LengthHistogram::new(bucket_edges.to_vec())?;
    for &tokens in token_counts {
        hist.add(tokens);
    }
    Ok(hist)
}

/// Emit the histogram as the comma-separated tabular form consumed by
/// external plotting: a `bucket_low,bucket_high,count` header, an
/// underflow row with an open low end, then one row per bucket, the last
/// with an open high end.
pub fn write_histogram_csv<W: Write>(hist: &LengthHistogram, mut out: W) -> std::io::Result<()> {
    writeln!(out, "bucket_low,bucket_high,count")?;
    writeln!(out, ",{},{}", hist.bucket_edges[0], hist.underflow)?;
    for (i, count) in hist.counts.iter().enumerate() {
        let low = hist.bucket_edges[i];
        match hist.bucket_edges.get(i + 1) {
            Some(high) => writeln!(out, "{low},{high},{count}")?,
            None => writeln!(out, "{low},,{count}")?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program_dsl::{parse_program, Stage};
    use proptest::prelude::*;

    #[test]
    fn perfect_prediction_scores_one() {
        let r = doc_f1(&[true, true, false], &[true, true, false]).unwrap();
        assert_eq!(r.f1, 1.0);
        assert_eq!((r.tp, r.fp, r.fn_), (2, 0, 0));
    }

    #[test]
    fn hand_counted_four_item_case() {
        let r = doc_f1(&[true, true, false, false], &[true, false, true, false]).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (1, 1, 1));
        assert_eq!(r.f1, 0.5);
        assert_eq!(r.precision, 0.5);
        assert_eq!(r.recall, 0.5);
    }

    #[test]
    fn zero_tp_scores_zero() {
        let r = doc_f1(&[false, false], &[true, false]).unwrap();
        assert_eq!(r.f1, 0.0);
    }

    #[test]
    fn length_mismatch_and_empty_are_errors() {
        assert!(matches!(
            doc_f1(&[true], &[true, false]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert_eq!(doc_f1(&[], &[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn noisy_line_sets_from_programs() {
        let program = parse_program("remove_lines(2, 4)", Stage::Chunk).unwrap().program;
        assert_eq!(noisy_line_set(&program, 10), BTreeSet::from([2, 3, 4]));

        let keep = parse_program("keep_chunk()", Stage::Chunk).unwrap().program;
        assert_eq!(noisy_line_set(&keep, 10), BTreeSet::new());

        let clipped = parse_program("remove_lines(0, 1)\nremove_lines(1, 3)", Stage::Chunk)
            .unwrap()
            .program;
        assert_eq!(noisy_line_set(&clipped, 3), BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn line_f1_set_arithmetic() {
        let pred = BTreeSet::from([1, 2, 3]);
        let gold = BTreeSet::from([2, 3, 4]);
        let r = chunk_line_f1(&pred, &gold);
        assert_eq!((r.tp, r.fp, r.fn_), (2, 1, 1));
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn line_f1_identity_and_empty_conventions() {
        let s = BTreeSet::from([0, 5, 9]);
        assert_eq!(chunk_line_f1(&s, &s).f1, 1.0);
        assert_eq!(chunk_line_f1(&BTreeSet::new(), &BTreeSet::new()).f1, 1.0);
    }

    #[test]
    fn retention_ratio_arithmetic() {
        assert_eq!(retention_ratio(100.0, 25.0).unwrap(), 0.25);
        assert!((retention_ratio(62.5e9, 14.5e9).unwrap() - 0.232).abs() < 1e-12);
        assert_eq!(retention_ratio(7.0, 7.0).unwrap(), 1.0);
        assert!(retention_ratio(0.0, 1.0).is_err());
        assert!(retention_ratio(-1.0, 1.0).is_err());
    }

    #[test]
    fn histogram_hand_binning() {
        let hist = length_histogram(&[50, 150, 250], &[0, 100, 200]).unwrap();
        assert_eq!(hist.counts, vec![1, 1, 1]);
        assert_eq!(hist.mean_tokens(), Some(150.0));
        assert_eq!(hist.underflow, 0);
    }

    #[test]
    fn empty_histogram_has_no_mean() {
        let hist = length_histogram(&[], &[0, 100]).unwrap();
        assert_eq!(hist.counts, vec![0, 0]);
        assert_eq!(hist.mean_tokens(), None);
    }

    #[test]
    fn values_below_the_first_edge_underflow() {
        let hist = length_histogram(&[5, 7, 100], &[10, 50]).unwrap();
        assert_eq!(hist.underflow, 2);
        assert_eq!(hist.counts, vec![0, 1]);
        assert_eq!(hist.doc_count, 3);
    }

    #[test]
    fn bucket_boundaries_are_half_open() {
        let hist = length_histogram(&[0, 99, 100, 199, 200], &[0, 100, 200]).unwrap();
        assert_eq!(hist.counts, vec![2, 2, 1]);
    }

    #[test]
    fn unsorted_edges_are_rejected() {
        assert_eq!(length_histogram(&[1], &[10, 5]), Err(MetricsError::BadEdges));
        assert_eq!(length_histogram(&[1], &[5, 5]), Err(MetricsError::BadEdges));
        assert_eq!(length_histogram(&[1], &[]), Err(MetricsError::BadEdges));
    }

    #[test]
    fn histogram_merge_matches_single_pass() {
        let edges = [0u64, 10, 100];
        let a: Vec<u64> = (0..50).collect();
        let b: Vec<u64> = (50..200).collect();
        let mut merged = length_histogram(&a, &edges).unwrap();
        merged.merge(&length_histogram(&b, &edges).unwrap()).unwrap();
        let all: Vec<u64> = (0..200).collect();
        assert_eq!(merged, length_histogram(&all, &edges).unwrap());
    }

    #[test]
    fn histogram_csv_shape() {
        let hist = length_histogram(&[5, 50, 150], &[10, 100]).unwrap();
        let mut buf = Vec::new();
        write_histogram_csv(&hist, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "bucket_low,bucket_high,count\n,10,1\n10,100,1\n100,,1\n");
    }

    #[test]
    fn aggregator_micro_and_macro() {
        let mut agg = LineF1Aggregator::default();
        agg.add(&BTreeSet::from([0, 1]), &BTreeSet::from([0, 1])); // f1 = 1
        agg.add(&BTreeSet::from([0]), &BTreeSet::from([1])); // f1 = 0
        assert_eq!(agg.macro_f1(), Some(0.5));
        // Pooled: tp=2, fp=1, fn=1.
        let micro = agg.micro();
        assert_eq!((micro.tp, micro.fp, micro.fn_), (2, 1, 1));

        let mut left = LineF1Aggregator::default();
        left.add(&BTreeSet::from([0, 1]), &BTreeSet::from([0, 1]));
        let mut right = LineF1Aggregator::default();
        right.add(&BTreeSet::from([0]), &BTreeSet::from([1]));
        left.merge(&right);
        assert_eq!(left, agg);
    }

    proptest! {
        #[test]
        fn f1_is_symmetric_under_pred_gold_swap(
            pred in proptest::collection::vec(any::<bool>(), 1..200),
            seed in any::<u64>(),
        ) {
            // Derive gold from pred deterministically but arbitrarily.
            let gold: Vec<bool> = pred
                .iter()
                .enumerate()
                .map(|(i, p)| p ^ (seed.rotate_left(i as u32 % 64) & 1 == 1))
                .collect();
            let a = doc_f1(&pred, &gold).unwrap();
            let b = doc_f1(&gold, &pred).unwrap();
            prop_assert!((a.f1 - b.f1).abs() < 1e-15);
            prop_assert!((a.precision - b.recall).abs() < 1e-15);
            prop_assert!((a.recall - b.precision).abs() < 1e-15);
        }

        #[test]
        fn doc_f1_matches_confusion_matrix_oracle(
            pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..300),
        ) {
            let pred: Vec<bool> = pairs.iter().map(|(p, _)| *p).collect();
            let gold: Vec<bool> = pairs.iter().map(|(_, g)| *g).collect();
            let r = doc_f1(&pred, &gold).unwrap();

            // Independent route: count each confusion cell separately and
            // derive F1 from precision and recall.
            let tp = pairs.iter().filter(|(p, g)| *p && *g).count() as u64;
            let fp = pairs.iter().filter(|(p, g)| *p && !*g).count() as u64;
            let fn_ = pairs.iter().filter(|(p, g)| !*p && *g).count() as u64;
            prop_assert_eq!((r.tp, r.fp, r.fn_), (tp, fp, fn_));
            if tp + fp > 0 && tp + fn_ > 0 && tp > 0 {
                let p = tp as f64 / (tp + fp) as f64;
                let rec = tp as f64 / (tp + fn_) as f64;
                let f1 = 2.0 * p * rec / (p + rec);
                prop_assert!((r.f1 - f1).abs() < 1e-12);
            }
            prop_assert!((0.0..=1.0).contains(&r.f1));
            prop_assert!((0.0..=1.0).contains(&r.precision));
            prop_assert!((0.0..=1.0).contains(&r.recall));
        }

        #[test]
        fn chunk_f1_identity_holds_for_every_set(
            indices in proptest::collection::btree_set(0usize..500, 0..40),
        ) {
            prop_assert_eq!(chunk_line_f1(&indices, &indices).f1, 1.0);
        }
    }
}
