//! Deterministic application of refinement programs to documents and chunks.
//!
//! Line removals are resolved first, against the original numbering the
//! provider saw, then normalizations run over the surviving lines in
//! program order. A removal-ratio threshold guards against degenerate
//! programs that would wipe most of a chunk.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program_dsl::{RefinementOp, RefinementProgram, Stage};

/// A parsed document: an id plus its lines, split on `\n`.
///
/// Joining `lines` with `\n` (plus a trailing newline iff flagged)
/// reproduces the ingested text byte-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub lines: Vec<String>,
    pub had_trailing_newline: bool,
    pub meta: Option<serde_json::Map<String, serde_json::Value>>,
}

impl Document {
    pub fn from_text(id: impl Into<String>, text: &str) -> Self {
        let (body, had_trailing_newline) = match text.strip_suffix('\n') {
            Some(body) => (body, true),
            None => (text, false),
        };
        Document {
            id: id.into(),
            lines: body.split('\n').map(str::to_string).collect(),
            had_trailing_newline,
            meta: None,
        }
    }

    pub fn with_meta(mut self, meta: Option<serde_json::Map<String, serde_json::Value>>) -> Self {
        self.meta = meta;
        self
    }

    /// Reconstruct the document text byte-exactly.
    pub fn text(&self) -> String {
        let mut out = self.lines.join("\n");
        if self.had_trailing_newline {
            out.push('\n');
        }
        out
    }
}

/// What happened when a program ran against a document or chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedResult {
    pub kept: bool,
    /// Refined lines; empty exactly when `kept` is false.
    pub lines: Vec<String>,
    pub ops_applied: usize,
    pub lines_removed: usize,
    pub replacements_made: usize,
    pub policy_action: PolicyAction,
}

impl RefinedResult {
    fn kept_lines(lines: Vec<String>, ops_applied: usize) -> Self {
        RefinedResult {
            kept: true,
            lines,
            ops_applied,
            lines_removed: 0,
            replacements_made: 0,
            policy_action: PolicyAction::None,
        }
    }
}

/// Safety-policy outcome recorded alongside a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyAction {
    /// Program executed normally.
    None,
    /// Removal ratio exceeded the threshold; the original text was kept.
    KeptOriginal,
    /// Removal ratio exceeded the threshold; the chunk was dropped.
    Rejected,
}

/// What to do when a program would remove more than the threshold
/// fraction of a chunk's lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverThresholdAction {
    KeepOriginal,
    DropChunk,
    Error,
}

/// How to treat `remove_lines` indices beyond the chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutOfRangePolicy {
    /// Out-of-range indices are an error: they indicate provider hallucination.
    Reject,
    /// Ranges are intersected with the chunk; fully out-of-range ranges are
    /// ignored with a warning.
    Clamp,
}

/// Execution policy knobs for the chunk stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecPolicy {
    /// Maximum fraction of a chunk's lines a program may delete (τ).
    pub removal_ratio_threshold: f64,
    pub over_threshold_action: OverThresholdAction,
    pub out_of_range_lines: OutOfRangePolicy,
}

impl Default for ExecPolicy {
    fn default() -> Self {
        ExecPolicy {
            removal_ratio_threshold: 0.8,
            over_threshold_action: OverThresholdAction::KeepOriginal,
            out_of_range_lines: OutOfRangePolicy::Reject,
        }
    }
}

impl ExecPolicy {
    pub fn validate(&self) -> Result<(), ExecError> {
        let tau = self.removal_ratio_threshold;
        if !(0.0..=1.0).contains(&tau) {
            return Err(ExecError::InvalidPolicy(format!(
                "removal ratio threshold {tau} must lie in [0, 1]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ExecError {
    #[error("expected a {expected}-stage program, got {actual}-stage")]
    StageMismatch { expected: Stage, actual: Stage },
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("line index {index} out of range for a {line_count}-line chunk")]
    LineOutOfRange { index: usize, line_count: usize },
    #[error("removal ratio {ratio:.3} exceeds threshold {threshold:.3}")]
    RemovalRatioExceeded { ratio: f64, threshold: f64 },
    #[error("chunk must contain at least one line")]
    EmptyChunk,
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}

fn check_stage(program: &RefinementProgram, expected: Stage) -> Result<(), ExecError> {
    if program.stage != expected {
        return Err(ExecError::StageMismatch {
            expected,
            actual: program.stage,
        });
    }
    // Programs built through the parser are always stage-sound; guard
    // against hand-assembled ones as well.
    RefinementProgram::new(program.stage, program.ops.clone())
        .map(|_| ())
        .map_err(ExecError::InvalidProgram)
}

/// Apply a document-stage program: `drop_doc()` empties the document,
/// `keep_doc()` passes it through untouched.
pub fn apply_doc_program(
    doc: &Document,
    program: &RefinementProgram,
) -> Result<RefinedResult, ExecError> {
    check_stage(program, Stage::Doc)?;
    match program.ops[0] {
        RefinementOp::DropDoc => Ok(RefinedResult {
            kept: false,
            lines: Vec::new(),
            ops_applied: 1,
            lines_removed: doc.lines.len(),
            replacements_made: 0,
            policy_action: PolicyAction::None,
        }),
        RefinementOp::KeepDoc => Ok(RefinedResult::kept_lines(doc.lines.clone(), 1)),
        _ => unreachable!("stage validation admits only doc ops"),
    }
}

/// Union of inclusive `[start, end]` removal ranges, interpreted against
/// the original numbering of a `line_count`-line chunk.
pub fn union_removals(
    ranges: &[(usize, usize)],
    line_count: usize,
    policy: &ExecPolicy,
) -> Result<BTreeSet<usize>, ExecError> {
    let mut removed = BTreeSet::new();
    for &(start, end) in ranges {
        if end >= line_count {
            match policy.out_of_range_lines {
                OutOfRangePolicy::Reject => {
                    let index = if start >= line_count { start } else { end };
                    return Err(ExecError::LineOutOfRange { index, line_count });
                }
                OutOfRangePolicy::Clamp => {
                    if start >= line_count {
                        log::warn!(
                            "ignoring fully out-of-range removal {start}..={end} \
                             (chunk has {line_count} lines)"
                        );
                        continue;
                    }
                    removed.extend(start..line_count);
                    continue;
                }
            }
        }
        removed.extend(start..=end);
    }
    Ok(removed)
}

/// Apply normalizations in program order. Within one op every line is
/// scanned left to right and all non-overlapping occurrences of the source
/// are replaced; later ops see earlier ops' output. Returns the rewritten
/// lines and the total number of occurrences replaced.
pub fn apply_normalizations(lines: &[String], ops: &[(&str, &str)]) -> (Vec<String>, usize) {
    let mut out: Vec<String> = lines.to_vec();
    let mut replaced = 0usize;
    for (source, target) in ops {
        for line in &mut out {
            let hits = line.matches(source).count();
            if hits > 0 {
                *line = line.replace(source, target);
                replaced += hits;
            }
        }
    }
    (out, replaced)
}

/// Apply a chunk-stage program under the given policy.
///
/// Removals resolve first against the original numbering; if the removed
/// fraction exceeds the threshold the policy's over-threshold action
/// takes over. Normalizations then run over the survivors. Lines that
/// become empty through normalization are retained as empty strings;
/// `remove_lines` is the only deletion mechanism.
pub fn apply_chunk_program(
    chunk_lines: &[String],
    program: &RefinementProgram,
    policy: &ExecPolicy,
) -> Result<RefinedResult, ExecError> {
    check_stage(program, Stage::Chunk)?;
    policy.validate()?;
    if chunk_lines.is_empty() {
        return Err(ExecError::EmptyChunk);
    }

    if program.ops.iter().any(|op| matches!(op, RefinementOp::KeepChunk)) {
        return Ok(RefinedResult::kept_lines(chunk_lines.to_vec(), 1));
    }

    let removed = union_removals(&program.removal_ranges(), chunk_lines.len(), policy)?;
    let ratio = removed.len() as f64 / chunk_lines.len() as f64;
    if ratio > policy.removal_ratio_threshold {
        return match policy.over_threshold_action {
            OverThresholdAction::KeepOriginal => Ok(RefinedResult {
                kept: true,
                lines: chunk_lines.to_vec(),
                ops_applied: 0,
                lines_removed: 0,
                replacements_made: 0,
                policy_action: PolicyAction::KeptOriginal,
            }),
            OverThresholdAction::DropChunk => Ok(RefinedResult {
                kept: false,
                lines: Vec::new(),
                ops_applied: 0,
                lines_removed: chunk_lines.len(),
                replacements_made: 0,
                policy_action: PolicyAction::Rejected,
            }),
            OverThresholdAction::Error => Err(ExecError::RemovalRatioExceeded {
                ratio,
                threshold: policy.removal_ratio_threshold,
            }),
        };
    }

    let survivors: Vec<String> = chunk_lines
        .iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, line)| line.clone())
        .collect();
    let (lines, replacements_made) = apply_normalizations(&survivors, &program.normalizations());

    Ok(RefinedResult {
        kept: !lines.is_empty(),
        lines,
        ops_applied: program.ops.len(),
        lines_removed: removed.len(),
        replacements_made,
        policy_action: PolicyAction::None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program_dsl::parse_program;
    use proptest::prelude::*;

    fn doc(lines: &[&str]) -> Document {
        Document {
            id: "d".to_string(),
            lines: lines.iter().map(|s| s.to_string()).collect(),
            had_trailing_newline: false,
            meta: None,
        }
    }

    fn chunk_program(text: &str) -> RefinementProgram {
        parse_program(text, Stage::Chunk).unwrap().program
    }

    fn strs(lines: &[&str]) -> Vec<String> {
        lines.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn document_text_round_trips() {
        for text in ["", "\n", "a", "a\n", "a\nb", "a\nb\n", "a\n\nb", "\r\n", "a\r\nb\r\n"] {
            assert_eq!(Document::from_text("d", text).text(), text);
        }
    }

    #[test]
    fn drop_doc_empties_everything() {
        let d = doc(&["a", "b", "c"]);
        let program = parse_program("drop_doc()", Stage::Doc).unwrap().program;
        let r = apply_doc_program(&d, &program).unwrap();
        assert!(!r.kept);
        assert!(r.lines.is_empty());
        assert_eq!(r.lines_removed, 3);
    }

    #[test]
    fn keep_doc_is_identity() {
        let d = doc(&["a", "b", "c"]);
        let program = parse_program("keep_doc()", Stage::Doc).unwrap().program;
        let r = apply_doc_program(&d, &program).unwrap();
        assert!(r.kept);
        assert_eq!(r.lines, d.lines);
    }

    #[test]
    fn doc_program_stage_mismatch() {
        let d = doc(&["a"]);
        let program = chunk_program("keep_chunk()");
        assert!(matches!(
            apply_doc_program(&d, &program),
            Err(ExecError::StageMismatch { .. })
        ));
    }

    #[test]
    fn union_of_overlapping_ranges() {
        let policy = ExecPolicy::default();
        let got = union_removals(&[(0, 1), (1, 2)], 5, &policy).unwrap();
        assert_eq!(got, BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn union_of_disjoint_ranges() {
        let policy = ExecPolicy::default();
        let got = union_removals(&[(0, 7), (18, 24)], 25, &policy).unwrap();
        assert_eq!(got.len(), 15);
        let expected: BTreeSet<usize> = (0..=7).chain(18..=24).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn out_of_range_rejected_by_default() {
        let policy = ExecPolicy::default();
        assert_eq!(
            union_removals(&[(3, 9)], 5, &policy),
            Err(ExecError::LineOutOfRange {
                index: 9,
                line_count: 5
            })
        );
    }

    #[test]
    fn out_of_range_clamped_when_asked() {
        let policy = ExecPolicy {
            out_of_range_lines: OutOfRangePolicy::Clamp,
            ..ExecPolicy::default()
        };
        assert_eq!(
            union_removals(&[(3, 9)], 5, &policy).unwrap(),
            BTreeSet::from([3, 4])
        );
        // Fully out-of-range ranges are ignored.
        assert_eq!(union_removals(&[(7, 9)], 5, &policy).unwrap(), BTreeSet::new());
    }

    #[test]
    fn normalization_scan_is_left_to_right_non_overlapping() {
        let (lines, n) = apply_normalizations(&strs(&["aaa"]), &[("aa", "b")]);
        assert_eq!(lines, strs(&["ba"]));
        assert_eq!(n, 1);
    }

    #[test]
    fn normalization_removes_page_index_noise() {
        let (lines, n) =
            apply_normalizations(&strs(&["Pages:  1    3  4 end"]), &[("Pages:  1    3  4", "")]);
        assert_eq!(lines, strs(&[" end"]));
        assert_eq!(n, 1);
    }

    #[test]
    fn empty_op_list_is_identity() {
        let (lines, n) = apply_normalizations(&strs(&["x"]), &[]);
        assert_eq!(lines, strs(&["x"]));
        assert_eq!(n, 0);
    }

    #[test]
    fn chunk_removal_of_nav_line() {
        let r = apply_chunk_program(
            &strs(&["nav|bar", "body"]),
            &chunk_program("remove_lines(start=0, end=0)"),
            &ExecPolicy::default(),
        )
        .unwrap();
        assert_eq!(r.lines, strs(&["body"]));
        assert_eq!(r.lines_removed, 1);
        assert!(r.kept);
    }

    #[test]
    fn keep_chunk_is_identity() {
        let lines = strs(&["a", "b"]);
        let r = apply_chunk_program(&lines, &chunk_program("keep_chunk()"), &ExecPolicy::default())
            .unwrap();
        assert_eq!(r.lines, lines);
        assert_eq!(r.ops_applied, 1);
        assert_eq!(r.policy_action, PolicyAction::None);
    }

    #[test]
    fn over_threshold_keeps_original() {
        let lines: Vec<String> = (0..10).map(|i| format!("line {i}")).collect();
        let r = apply_chunk_program(
            &lines,
            &chunk_program("remove_lines(line_start=0, line_end=9)"),
            &ExecPolicy::default(),
        )
        .unwrap();
        assert!(r.kept);
        assert_eq!(r.lines, lines);
        assert_eq!(r.policy_action, PolicyAction::KeptOriginal);
        assert_eq!(r.lines_removed, 0);
    }

    #[test]
    fn over_threshold_can_drop_or_error() {
        let lines: Vec<String> = (0..10).map(|i| format!("line {i}")).collect();
        let program = chunk_program("remove_lines(line_start=0, line_end=9)");

        let drop_policy = ExecPolicy {
            over_threshold_action: OverThresholdAction::DropChunk,
            ..ExecPolicy::default()
        };
        let r = apply_chunk_program(&lines, &program, &drop_policy).unwrap();
        assert!(!r.kept);
        assert!(r.lines.is_empty());
        assert_eq!(r.policy_action, PolicyAction::Rejected);

        let error_policy = ExecPolicy {
            over_threshold_action: OverThresholdAction::Error,
            ..ExecPolicy::default()
        };
        assert!(matches!(
            apply_chunk_program(&lines, &program, &error_policy),
            Err(ExecError::RemovalRatioExceeded { .. })
        ));
    }

    #[test]
    fn full_removal_allowed_at_tau_one() {
        let policy = ExecPolicy {
            removal_ratio_threshold: 1.0,
            ..ExecPolicy::default()
        };
        let r = apply_chunk_program(
            &strs(&["a", "b"]),
            &chunk_program("remove_lines(0, 1)"),
            &policy,
        )
        .unwrap();
        assert!(!r.kept);
        assert!(r.lines.is_empty());
        assert_eq!(r.lines_removed, 2);
    }

    #[test]
    fn removals_then_normalizations() {
        let r = apply_chunk_program(
            &strs(&["a b", "c"]),
            &chunk_program("remove_lines(1, 1)\nnormalize(source_str=\"b\", target_str=\"\")"),
            &ExecPolicy::default(),
        )
        .unwrap();
        assert_eq!(r.lines, strs(&["a "]));
        assert_eq!(r.lines_removed, 1);
        assert_eq!(r.replacements_made, 1);
    }

    #[test]
    fn lines_emptied_by_normalize_are_retained() {
        let r = apply_chunk_program(
            &strs(&["noise", "keep"]),
            &chunk_program("normalize(source_str=\"noise\", target_str=\"\")"),
            &ExecPolicy::default(),
        )
        .unwrap();
        assert_eq!(r.lines, strs(&["", "keep"]));
        assert!(r.kept);
    }

    #[test]
    fn empty_chunk_is_an_error() {
        let r = apply_chunk_program(&[], &chunk_program("keep_chunk()"), &ExecPolicy::default());
        assert_eq!(r, Err(ExecError::EmptyChunk));
    }

    // --- reference implementation used as the brute-force oracle ---------

    /// Naive re-implementation: mark lines, filter, then manual
    /// find-and-splice replacement. Kept independent of the production
    /// path on purpose.
    #[allow(clippy::needless_range_loop)] // explicit marking is the oracle
    pub(crate) fn naive_chunk_execute(
        lines: &[String],
        program: &RefinementProgram,
        policy: &ExecPolicy,
    ) -> Option<Vec<String>> {
        if program.ops.iter().any(|op| matches!(op, RefinementOp::KeepChunk)) {
            return Some(lines.to_vec());
        }
        let mut marked = vec![false; lines.len()];
        for op in &program.ops {
            if let RefinementOp::RemoveLines { start, end } = op {
                for i in *start..=*end {
                    if i < lines.len() {
                        marked[i] = true;
                    } else if policy.out_of_range_lines == OutOfRangePolicy::Reject {
                        return None; // signals error; caller checks
                    }
                }
            }
        }
        let removed_count = marked.iter().filter(|m| **m).count();
        if removed_count as f64 / lines.len() as f64 > policy.removal_ratio_threshold {
            return match policy.over_threshold_action {
                OverThresholdAction::KeepOriginal => Some(lines.to_vec()),
                OverThresholdAction::DropChunk => Some(Vec::new()),
                OverThresholdAction::Error => None,
            };
        }
        let mut out: Vec<String> = lines
            .iter()
            .zip(&marked)
            .filter(|(_, m)| !**m)
            .map(|(l, _)| l.clone())
            .collect();
        for op in &program.ops {
            if let RefinementOp::Normalize { source, target } = op {
                for line in &mut out {
                    let mut rebuilt = String::new();
                    let mut rest = line.as_str();
                    while let Some(at) = rest.find(source.as_str()) {
                        rebuilt.push_str(&rest[..at]);
                        rebuilt.push_str(target);
                        rest = &rest[at + source.len()..];
                    }
                    rebuilt.push_str(rest);
                    *line = rebuilt;
                }
            }
        }
        Some(out)
    }

    pub(crate) fn arb_chunk_lines(max_lines: usize) -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec("[a-d #]{0,12}", 1..=max_lines)
    }

    pub(crate) fn arb_chunk_program(line_count: usize) -> impl Strategy<Value = RefinementProgram> {
        let remove = (0..line_count, 0..line_count).prop_map(|(a, b)| RefinementOp::RemoveLines {
            start: a.min(b),
            end: a.max(b),
        });
        let normalize = ("[a-d ]{1,4}", "[a-d]{0,3}").prop_map(|(source, target)| {
            RefinementOp::Normalize { source, target }
        });
        let op = prop_oneof![3 => remove, 2 => normalize];
        prop_oneof![
            1 => Just(vec![RefinementOp::KeepChunk]),
            6 => proptest::collection::vec(op, 1..6),
        ]
        .prop_map(|ops| RefinementProgram::new(Stage::Chunk, ops).unwrap())
    }

    proptest! {
        #[test]
        fn matches_naive_reference(
            lines in arb_chunk_lines(50),
            seed in any::<u64>(),
        ) {
            use proptest::strategy::ValueTree;
            use proptest::test_runner::{TestRng, TestRunner, RngAlgorithm};
            // Derive a program whose indices are valid for this chunk.
            let mut runner = TestRunner::new_with_rng(
                proptest::test_runner::Config::default(),
                TestRng::from_seed(RngAlgorithm::ChaCha, &{
                    let mut bytes = [0u8; 32];
                    bytes[..8].copy_from_slice(&seed.to_le_bytes());
                    bytes
                }),
            );
            let program = arb_chunk_program(lines.len())
                .new_tree(&mut runner)
                .unwrap()
                .current();
            let policy = ExecPolicy::default();
            let expected = naive_chunk_execute(&lines, &program, &policy);
            let got = apply_chunk_program(&lines, &program, &policy).unwrap();
            prop_assert_eq!(Some(got.lines), expected);
        }

        #[test]
        fn removal_order_does_not_matter(
            lines in arb_chunk_lines(30),
            ranges in proptest::collection::vec((0usize..30, 0usize..30), 1..5),
        ) {
            let len = lines.len();
            let ops: Vec<RefinementOp> = ranges
                .iter()
                .map(|(a, b)| {
                    let (a, b) = (a % len, b % len);
                    RefinementOp::RemoveLines { start: a.min(b), end: a.max(b) }
                })
                .collect();
            let policy = ExecPolicy { removal_ratio_threshold: 1.0, ..ExecPolicy::default() };
            let forward = RefinementProgram::new(Stage::Chunk, ops.clone()).unwrap();
            let mut rev = ops;
            rev.reverse();
            let reversed = RefinementProgram::new(Stage::Chunk, rev).unwrap();
            let a = apply_chunk_program(&lines, &forward, &policy).unwrap();
            let b = apply_chunk_program(&lines, &reversed, &policy).unwrap();
            prop_assert_eq!(a.lines, b.lines);
        }

        #[test]
        fn keep_ops_are_byte_identity(lines in arb_chunk_lines(20)) {
            let keep = RefinementProgram::new(Stage::Chunk, vec![RefinementOp::KeepChunk]).unwrap();
            let r = apply_chunk_program(&lines, &keep, &ExecPolicy::default()).unwrap();
            prop_assert_eq!(&r.lines, &lines);

            let d = Document {
                id: "d".to_string(),
                lines: lines.clone(),
                had_trailing_newline: false,
                meta: None,
            };
            let keep_doc = RefinementProgram::new(Stage::Doc, vec![RefinementOp::KeepDoc]).unwrap();
            prop_assert_eq!(apply_doc_program(&d, &keep_doc).unwrap().lines, lines);

            let drop_doc = RefinementProgram::new(Stage::Doc, vec![RefinementOp::DropDoc]).unwrap();
            prop_assert!(apply_doc_program(&d, &drop_doc).unwrap().lines.is_empty());
        }

        #[test]
        fn output_never_grows(
            lines in arb_chunk_lines(30),
            seed in any::<u64>(),
        ) {
            use proptest::strategy::ValueTree;
            use proptest::test_runner::{TestRng, TestRunner, RngAlgorithm};
            let mut runner = TestRunner::new_with_rng(
                proptest::test_runner::Config::default(),
                TestRng::from_seed(RngAlgorithm::ChaCha, &{
                    let mut bytes = [0u8; 32];
                    bytes[..8].copy_from_slice(&seed.to_le_bytes());
                    bytes
                }),
            );
            let program = arb_chunk_program(lines.len())
                .new_tree(&mut runner)
                .unwrap()
                .current();
            let r = apply_chunk_program(&lines, &program, &ExecPolicy::default()).unwrap();
            prop_assert!(r.lines.len() <= lines.len());
            let all_targets_empty = program.normalizations().iter().all(|(_, t)| t.is_empty());
            if all_targets_empty {
                let before: usize = lines.iter().map(String::len).sum();
                let after: usize = r.lines.iter().map(String::len).sum();
                prop_assert!(after <= before);
            }
        }
    }
}
