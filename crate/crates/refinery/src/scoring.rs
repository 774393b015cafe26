//! Quality-score extraction from critique text and the document
//! filtering criteria built on top of the two scores.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Additive 0..5 quality scores for one document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityScores {
    pub edu: u8,
    pub format: u8,
}

impl QualityScores {
    pub fn new(edu: u8, format: u8) -> Result<Self, ScoreError> {
        if edu > 5 || format > 5 {
            return Err(ScoreError::OutOfRange { edu, format });
        }
        Ok(QualityScores { edu, format })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterDecision {
    Keep,
    Drop,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("marker `{0}` not found in critique")]
    MarkerNotFound(&'static str),
    #[error("no integer follows the `{0}` marker")]
    MissingInteger(&'static str),
    #[error("scores (edu={edu}, format={format}) outside 0..=5")]
    OutOfRange { edu: u8, format: u8 },
}

static EDU_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)educational\s+score\s*:").unwrap());
static FORMAT_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)extraction\s+quality\s+score\s*:").unwrap());

/// Parse the educational score concluded in a critique: the integer after
/// the last `Educational score:` marker, clamped to 0..=5.
pub fn parse_edu_score(critique: &str) -> Result<u8, ScoreError> {
    parse_marker_score(critique, &EDU_MARKER, "Educational score:")
}

/// Parse the extraction-quality (format) score: the integer after the
/// last `Extraction Quality Score:` marker, clamped to 0..=5.
pub fn parse_format_score(critique: &str) -> Result<u8, ScoreError> {
    parse_marker_score(critique, &FORMAT_MARKER, "Extraction Quality Score:")
}

fn parse_marker_score(
    critique: &str,
    marker: &Regex,
    marker_name: &'static str,
) -> Result<u8, ScoreError> {
    // Critiques may quote the scoring instructions verbatim before
    // concluding; the last marker occurrence is the answer.
    let found = marker
        .find_iter(critique)
        .last()
        .ok_or(ScoreError::MarkerNotFound(marker_name))?;
    let rest = critique[found.end()..].trim_start();
    let (rest, negative) = match rest.strip_prefix('-') {
        Some(tail) => (tail, true),
        None => (rest, false),
    };
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return Err(ScoreError::MissingInteger(marker_name));
    }
    // Generation noise degrades gracefully: out-of-band values clamp.
    let magnitude: i64 = digits.parse().unwrap_or(i64::MAX);
    let value = if negative { -magnitude } else { magnitude };
    Ok(value.clamp(0, 5) as u8)
}

/// The document filtering criteria over the two scores:
/// keep when `edu >= 3`, or when `edu == 2` and `format >= 4`;
/// drop everything else.
pub fn filter_decision(scores: QualityScores) -> FilterDecision {
    if scores.edu >= 3 || (scores.edu == 2 && scores.format >= 4) {
        FilterDecision::Keep
    } else {
        FilterDecision::Drop
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_concluding_edu_score() {
        let critique = "The extract gives a coherent tutorial with exercises.\n\
                        Educational score: 4";
        assert_eq!(parse_edu_score(critique).unwrap(), 4);
    }

    #[test]
    fn last_marker_wins() {
        let critique = "Conclude with the score using the format: \"Educational score: <total points>\"\n\
                        Justification follows.\n\
                        Educational score: 2";
        assert_eq!(parse_edu_score(critique).unwrap(), 2);
    }

    #[test]
    fn out_of_band_scores_clamp() {
        assert_eq!(parse_edu_score("Educational score: 9").unwrap(), 5);
        assert_eq!(parse_edu_score("Educational score: -3").unwrap(), 0);
        assert_eq!(
            parse_edu_score("Educational score: 99999999999999999999999").unwrap(),
            5
        );
    }

    #[test]
    fn marker_absent_or_without_integer_errors() {
        assert_eq!(
            parse_edu_score("no score here"),
            Err(ScoreError::MarkerNotFound("Educational score:"))
        );
        assert_eq!(
            parse_format_score("Extraction Quality Score: five"),
            Err(ScoreError::MissingInteger("Extraction Quality Score:"))
        );
    }

    #[test]
    fn markers_are_case_insensitive_and_whitespace_tolerant() {
        assert_eq!(parse_edu_score("EDUCATIONAL  SCORE :  3").unwrap(), 3);
        assert_eq!(
            parse_format_score("extraction quality score:\n 5").unwrap(),
            5
        );
    }

    #[test]
    fn format_score_boundaries() {
        assert_eq!(parse_format_score("... Extraction Quality Score: 5").unwrap(), 5);
        assert_eq!(parse_format_score("Extraction Quality Score: 0").unwrap(), 0);
    }

    #[test]
    fn only_the_final_marker_is_consulted() {
        // An earlier marker carries a value but the final one does not:
        // the final occurrence is the model's answer, so this is an error.
        let critique = "Educational score: 4 ... Educational score: unknown";
        assert_eq!(
            parse_edu_score(critique),
            Err(ScoreError::MissingInteger("Educational score:"))
        );
    }

    #[test]
    fn filter_decision_spot_checks() {
        let keep = |edu, format| {
            filter_decision(QualityScores::new(edu, format).unwrap()) == FilterDecision::Keep
        };
        assert!(keep(3, 0));
        assert!(keep(2, 4));
        assert!(!keep(1, 5));
        assert!(!keep(2, 3));
    }

    #[test]
    #[allow(clippy::if_same_then_else)] // branch-per-case mirrors the criteria
    fn truth_table_is_total_and_matches_the_criteria() {
        for edu in 0..=5u8 {
            for format in 0..=5u8 {
                let decision = filter_decision(QualityScores::new(edu, format).unwrap());
                let expected = if edu >= 3 {
                    FilterDecision::Keep
                } else if edu == 2 && format >= 4 {
                    FilterDecision::Keep
                } else {
                    // edu < 2, or edu == 2 with format < 4: the complement.
                    FilterDecision::Drop
                };
                assert_eq!(decision, expected, "(edu={edu}, format={format})");
            }
        }
    }

    #[test]
    fn raising_a_score_never_flips_keep_to_drop() {
        for edu in 0..=5u8 {
            for format in 0..=5u8 {
                let here = filter_decision(QualityScores::new(edu, format).unwrap());
                if here == FilterDecision::Keep {
                    for edu2 in edu..=5 {
                        for format2 in format..=5 {
                            assert_eq!(
                                filter_decision(QualityScores::new(edu2, format2).unwrap()),
                                FilterDecision::Keep
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn relaxation_keeps_everything_the_stricter_edu_rule_keeps() {
        // Stricter rule: keep only when edu > 2.
        for edu in 0..=5u8 {
            for format in 0..=5u8 {
                if edu > 2 {
                    assert_eq!(
                        filter_decision(QualityScores::new(edu, format).unwrap()),
                        FilterDecision::Keep
                    );
                }
            }
        }
    }

    #[test]
    fn scores_out_of_range_are_rejected() {
        assert!(QualityScores::new(6, 0).is_err());
        assert!(QualityScores::new(0, 6).is_err());
    }
}
