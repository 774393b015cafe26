//! Word-bounded document chunking and post-refinement reassembly.
//!
//! Documents are split greedily: lines accumulate into the current chunk
//! while the cumulative word count stays within the window; a single line
//! that alone exceeds the window becomes a `skipped` chunk that bypasses
//! refinement entirely and is copied through verbatim.

use thiserror::Error;

use crate::executor::{Document, RefinedResult};

/// Default chunk window, in words.
pub const DEFAULT_WINDOW: usize = 1500;

/// A contiguous slice of document lines bounded by a word window.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub doc_id: String,
    /// Ordinal of this chunk within its document.
    pub index: usize,
    /// Global index of the chunk's first line in the parent document.
    pub base_line: usize,
    pub lines: Vec<String>,
    pub word_count: usize,
    /// True when this is a single over-long line passed through unrefined.
    pub skipped: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum ChunkError {
    #[error("chunk window must be at least 1 word")]
    WindowTooSmall,
    #[error("chunk index mismatch: expected {expected}, found {found}")]
    IndexMismatch { expected: usize, found: usize },
}

/// Number of maximal non-whitespace runs in a line.
pub fn count_words(line: &str) -> usize {
    line.split_whitespace().count()
}

/// Split a document into word-bounded chunks using the default
/// whitespace word counter.
pub fn split_into_chunks(doc: &Document, window: usize) -> Result<Vec<Chunk>, ChunkError> {
    split_into_chunks_with(doc, window, count_words)
}

/// Split with a caller-supplied per-line count source, e.g. exact
/// tokenizer counts computed externally.
pub fn split_into_chunks_with<F>(
    doc: &Document,
    window: usize,
    counter: F,
) -> Result<Vec<Chunk>, ChunkError>
where
    F: Fn(&str) -> usize,
{
    if window < 1 {
        return Err(ChunkError::WindowTooSmall);
    }

    let mut chunks: Vec<Chunk> = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let mut current_words = 0usize;
    let mut current_base = 0usize;

    let emit = |chunks: &mut Vec<Chunk>, lines: Vec<String>, base, words, skipped| {
        chunks.push(Chunk {
            doc_id: doc.id.clone(),
            index: chunks.len(),
            base_line: base,
            lines,
            word_count: words,
            skipped,
        });
    };

    for (i, line) in doc.lines.iter().enumerate() {
        let words = counter(line);
        if current_words + words <= window {
            if current.is_empty() {
                current_base = i;
            }
            current.push(line.clone());
            current_words += words;
        } else {
            if !current.is_empty() {
                emit(
                    &mut chunks,
                    std::mem::take(&mut current),
                    current_base,
                    current_words,
                    false,
                );
            }
            if words <= window {
                current_base = i;
                current.push(line.clone());
                current_words = words;
            } else {
                emit(&mut chunks, vec![line.clone()], i, words, true);
                current_words = 0;
            }
        }
    }
    if !current.is_empty() {
        emit(&mut chunks, current, current_base, current_words, false);
    }
    Ok(chunks)
}

/// Stitch refined chunks back into a single line sequence.
///
/// Chunks must arrive sorted by index with none missing. Skipped chunks
/// contribute their original line, dropped chunks contribute nothing,
/// and everything else contributes its refined lines, in order.
pub fn reassemble(chunks: &[(Chunk, RefinedResult)]) -> Result<Vec<String>, ChunkError> {
    let mut out = Vec::new();
    for (expected, (chunk, result)) in chunks.iter().enumerate() {
        if chunk.index != expected {
            return Err(ChunkError::IndexMismatch {
                expected,
                found: chunk.index,
            });
        }
        if chunk.skipped {
            out.extend(chunk.lines.iter().cloned());
        } else if result.kept {
            out.extend(result.lines.iter().cloned());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::PolicyAction;
    use proptest::prelude::*;

    fn doc_with_word_counts(counts: &[usize]) -> Document {
        Document {
            id: "d".to_string(),
            lines: counts.iter().map(|n| vec!["w"; *n].join(" ")).collect(),
            had_trailing_newline: false,
            meta: None,
        }
    }

    fn kept(lines: Vec<String>) -> RefinedResult {
        RefinedResult {
            kept: true,
            lines,
            ops_applied: 1,
            lines_removed: 0,
            replacements_made: 0,
            policy_action: PolicyAction::None,
        }
    }

    fn dropped() -> RefinedResult {
        RefinedResult {
            kept: false,
            lines: Vec::new(),
            ops_applied: 1,
            lines_removed: 0,
            replacements_made: 0,
            policy_action: PolicyAction::None,
        }
    }

    #[test]
    fn counts_whitespace_runs() {
        assert_eq!(count_words("a  b\tc"), 3);
        assert_eq!(count_words(""), 0);
        assert_eq!(count_words("word"), 1);
        assert_eq!(count_words("  leading and trailing  "), 3);
    }

    #[test]
    fn word_count_matches_run_oracle() {
        // Brute-force oracle: count transitions into non-whitespace runs.
        let oracle = |s: &str| {
            let mut runs = 0;
            let mut in_run = false;
            for c in s.chars() {
                if c.is_whitespace() {
                    in_run = false;
                } else if !in_run {
                    runs += 1;
                    in_run = true;
                }
            }
            runs
        };
        let alphabet = [' ', '\t', 'a', 'b'];
        for len in 0..=6 {
            let mut indices = vec![0usize; len];
            loop {
                let s: String = indices.iter().map(|i| alphabet[*i]).collect();
                assert_eq!(count_words(&s), oracle(&s), "mismatch on {s:?}");
                let mut carry = true;
                for idx in indices.iter_mut() {
                    if carry {
                        *idx += 1;
                        if *idx == alphabet.len() {
                            *idx = 0;
                        } else {
                            carry = false;
                        }
                    }
                }
                if carry {
                    break;
                }
            }
        }
    }

    #[test]
    fn greedy_split_follows_the_window() {
        let doc = doc_with_word_counts(&[600, 600, 600]);
        let chunks = split_into_chunks(&doc, 1500).unwrap();
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0].lines, vec![doc.lines[0].clone(), doc.lines[1].clone()]);
        assert_eq!(chunks[1].lines, vec![doc.lines[2].clone()]);
        assert_eq!(chunks[0].word_count, 1200);
        assert_eq!(chunks[0].base_line, 0);
        assert_eq!(chunks[1].base_line, 2);
        assert!(!chunks[0].skipped && !chunks[1].skipped);
    }

    #[test]
    fn overlong_line_becomes_skipped_chunk() {
        let doc = doc_with_word_counts(&[2000]);
        let chunks = split_into_chunks(&doc, 1500).unwrap();
        assert_eq!(chunks.len(), 1);
        assert!(chunks[0].skipped);
        assert_eq!(chunks[0].word_count, 2000);
    }

    #[test]
    fn skipped_chunk_between_regular_chunks() {
        let doc = doc_with_word_counts(&[900, 2000, 900]);
        let chunks = split_into_chunks(&doc, 1500).unwrap();
        assert_eq!(chunks.len(), 3);
        assert!(!chunks[0].skipped);
        assert!(chunks[1].skipped);
        assert!(!chunks[2].skipped);
        assert_eq!(chunks[1].base_line, 1);
        assert_eq!(chunks[2].base_line, 2);
    }

    #[test]
    fn empty_line_doc_is_one_chunk() {
        let doc = Document::from_text("d", "");
        let chunks = split_into_chunks(&doc, 1500).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].lines, vec![String::new()]);
        assert_eq!(chunks[0].word_count, 0);
        assert!(!chunks[0].skipped);
    }

    #[test]
    fn chunk_may_exactly_reach_the_window() {
        let doc = doc_with_word_counts(&[750, 750, 1]);
        let chunks = split_into_chunks(&doc, 1500).unwrap();
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0].word_count, 1500);
    }

    #[test]
    fn zero_window_is_rejected() {
        let doc = doc_with_word_counts(&[1]);
        assert_eq!(split_into_chunks(&doc, 0), Err(ChunkError::WindowTooSmall));
    }

    #[test]
    fn pluggable_counter_is_used() {
        let doc = doc_with_word_counts(&[1, 1, 1]);
        // Every line "costs" the whole window under this counter.
        let chunks = split_into_chunks_with(&doc, 2, |_| 2).unwrap();
        assert_eq!(chunks.len(), 3);
    }

    #[test]
    fn reassemble_identity_and_drops() {
        let doc = doc_with_word_counts(&[2, 2, 2]);
        let chunks = split_into_chunks_with(&doc, 2, count_words).unwrap();
        assert_eq!(chunks.len(), 3);

        let identity: Vec<(Chunk, RefinedResult)> = chunks
            .iter()
            .cloned()
            .map(|c| {
                let lines = c.lines.clone();
                (c, kept(lines))
            })
            .collect();
        assert_eq!(reassemble(&identity).unwrap(), doc.lines);

        let with_middle_dropped: Vec<(Chunk, RefinedResult)> = chunks
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, c)| {
                let lines = c.lines.clone();
                if i == 1 {
                    (c, dropped())
                } else {
                    (c, kept(lines))
                }
            })
            .collect();
        assert_eq!(
            reassemble(&with_middle_dropped).unwrap(),
            vec![doc.lines[0].clone(), doc.lines[2].clone()]
        );
    }

    #[test]
    fn reassemble_passes_skipped_lines_verbatim() {
        let doc = doc_with_word_counts(&[900, 2000, 900]);
        let chunks = split_into_chunks(&doc, 1500).unwrap();
        let pairs: Vec<(Chunk, RefinedResult)> = chunks
            .into_iter()
            .map(|c| {
                // Refined chunks replace their lines; skipped chunks
                // must still surface the original.
                let result = if c.skipped {
                    dropped() // would lose the line if skipped were ignored
                } else {
                    kept(vec!["refined".to_string()])
                };
                (c, result)
            })
            .collect();
        let lines = reassemble(&pairs).unwrap();
        assert_eq!(lines[0], "refined");
        assert_eq!(lines[1], doc.lines[1]);
        assert_eq!(lines[2], "refined");
    }

    #[test]
    fn reassemble_rejects_missing_or_duplicate_indices() {
        let doc = doc_with_word_counts(&[2, 2]);
        let chunks = split_into_chunks_with(&doc, 2, count_words).unwrap();
        let mut pairs: Vec<(Chunk, RefinedResult)> = chunks
            .into_iter()
            .map(|c| {
                let lines = c.lines.clone();
                (c, kept(lines))
            })
            .collect();
        pairs.remove(0);
        assert_eq!(
            reassemble(&pairs),
            Err(ChunkError::IndexMismatch {
                expected: 0,
                found: 1
            })
        );
    }

    prop_compose! {
        fn arb_doc()(
            lines in proptest::collection::vec("[a-f ]{0,40}", 1..60),
        ) -> Document {
            Document {
                id: "p".to_string(),
                lines,
                had_trailing_newline: false,
                meta: None,
            }
        }
    }

    proptest! {
        #[test]
        fn split_partitions_the_document(doc in arb_doc(), window in 1usize..12) {
            let chunks = split_into_chunks(&doc, window).unwrap();
            let flat: Vec<String> = chunks.iter().flat_map(|c| c.lines.clone()).collect();
            prop_assert_eq!(flat, doc.lines.clone());

            for c in &chunks {
                if c.skipped {
                    prop_assert_eq!(c.lines.len(), 1);
                    prop_assert!(c.word_count > window);
                } else {
                    prop_assert!(c.word_count <= window);
                }
                prop_assert_eq!(
                    c.word_count,
                    c.lines.iter().map(|l| count_words(l)).sum::<usize>()
                );
            }

            // base_line strictly increasing and consistent with flattening.
            let mut expected_base = 0;
            for c in &chunks {
                prop_assert_eq!(c.base_line, expected_base);
                expected_base += c.lines.len();
            }
        }

        #[test]
        fn split_keep_reassemble_is_identity(doc in arb_doc(), window in 1usize..12) {
            let chunks = split_into_chunks(&doc, window).unwrap();
            let pairs: Vec<(Chunk, RefinedResult)> = chunks
                .into_iter()
                .map(|c| {
                    let lines = c.lines.clone();
                    (c, kept(lines))
                })
                .collect();
            prop_assert_eq!(reassemble(&pairs).unwrap(), doc.lines);
        }
    }
}
