//! Synthetic corpus harness: clean pseudo-text documents, injected web
//! noise, and the gold programs that invert every injection.
//!
//! Three noise families are injected: navigation-bar lines prepended at
//! the top, URL noise (whole lines or substrings glued onto a word), and
//! footer lines appended at the end. A configurable fraction of documents
//! is pure noise and carries a gold `drop_doc()` program. Executing the
//! gold programs on a noisy document recovers the clean one byte-exactly,
//! which makes the harness usable as an end-to-end oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chunker::{count_words, split_into_chunks, DEFAULT_WINDOW};
use crate::executor::Document;
use crate::program_dsl::{RefinementOp, RefinementProgram, Stage};

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("words per line must be at least 1")]
    ZeroWords,
    #[error("line count range is empty or zero")]
    BadLineRange,
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("noise template `{0}` must be shorter than the chunk window")]
    TemplateTooLong(String),
}

/// Length distribution for generated clean documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthParams {
    pub min_lines: usize,
    pub max_lines: usize,
    /// Target words per line; actual counts are uniform in ±20%.
    pub words_per_line: usize,
}

impl Default for LengthParams {
    fn default() -> Self {
        LengthParams {
            min_lines: 10,
            max_lines: 20,
            words_per_line: 10,
        }
    }
}

impl LengthParams {
    fn validate(&self) -> Result<(), NoiseError> {
        if self.words_per_line == 0 {
            return Err(NoiseError::ZeroWords);
        }
        if self.min_lines == 0 || self.min_lines > self.max_lines {
            return Err(NoiseError::BadLineRange);
        }
        Ok(())
    }

    fn words_bounds(&self) -> (usize, usize) {
        let lo = ((self.words_per_line * 8) / 10).max(1);
        let hi = ((self.words_per_line * 12) / 10).max(lo);
        (lo, hi)
    }
}

/// Noise-injection configuration. Identical spec (including seed) yields
/// an identical corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub nav_probability: f64,
    pub url_probability: f64,
    pub footer_probability: f64,
    /// Fraction of documents that are entirely noise, gold-labelled drop.
    pub pure_noise_probability: f64,
    pub seed: u64,
    pub nav_templates: Vec<String>,
    pub footer_templates: Vec<String>,
    pub max_nav_lines: usize,
    pub max_footer_lines: usize,
    /// Chunk window the gold chunk programs are laid out against.
    pub window: usize,
    /// Injections are trimmed until no chunk's gold removal ratio exceeds
    /// this bound, keeping gold programs executable under the usual
    /// removal-ratio threshold.
    pub max_chunk_removal_ratio: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            nav_probability: 0.7,
            url_probability: 0.5,
            footer_probability: 0.7,
            pure_noise_probability: 0.1,
            seed: 0,
            nav_templates: default_nav_templates(),
            footer_templates: default_footer_templates(),
            max_nav_lines: 3,
            max_footer_lines: 3,
            window: DEFAULT_WINDOW,
            max_chunk_removal_ratio: 0.5,
        }
    }
}

/// Navigation-bar lines modelled after common web boilerplate.
pub fn default_nav_templates() -> Vec<String> {
    [
        "Home | Products | About Us | Contact",
        "Home > News > Archive",
        "Menu Login Register Search",
        "Skip to main content | Sitemap | Help",
    ]
    .map(str::to_string)
    .to_vec()
}

/// Footer lines modelled after common web boilerplate.
pub fn default_footer_templates() -> Vec<String> {
    [
        "Unsubscribe | Privacy Policy | Terms of Service",
        "Copyright 2023 Example Media. All rights reserved.",
        "Contact: info@example-site.test",
        "Follow us on social media",
    ]
    .map(str::to_string)
    .to_vec()
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), NoiseError> {
        for p in [
            self.nav_probability,
            self.url_probability,
            self.footer_probability,
            self.pure_noise_probability,
            self.max_chunk_removal_ratio,
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(NoiseError::BadProbability(p));
            }
        }
        for t in self.nav_templates.iter().chain(&self.footer_templates) {
            if count_words(t) > self.window {
                return Err(NoiseError::TemplateTooLong(t.clone()));
            }
        }
        Ok(())
    }
}

/// A generated document together with its gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDoc {
    pub noisy: Document,
    /// The clean lines this document should refine back to; `None` for
    /// pure-noise documents, which should be dropped whole.
    pub clean_lines: Option<Vec<String>>,
    pub doc_program: RefinementProgram,
    /// Gold chunk programs keyed by chunk index within the noisy document.
    pub chunk_programs: Vec<(usize, RefinementProgram)>,
}

const WORD_POOL: &[&str] = &[
    "the", "quick", "model", "learns", "from", "clean", "text", "while", "noisy", "lines",
    "reduce", "quality", "of", "training", "data", "and", "careful", "curation", "helps",
    "small", "systems", "reach", "strong", "results", "with", "fewer", "tokens", "each",
    "document", "carries", "several", "sentences", "that", "describe", "ordinary", "topics",
    "like", "science", "history", "cooking", "travel", "music", "gardens", "weather",
    "numbers", "letters", "stories", "ideas", "plans", "notes",
];

fn mix_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined value.
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn clean_line(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words)
        .map(|_| WORD_POOL[rng.random_range(0..WORD_POOL.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Deterministic clean pseudo-text document. Contains none of the noise
/// template substrings and no URLs, so gold inversions are exact.
pub fn generate_clean_doc(seed: u64, params: &LengthParams) -> Result<Document, NoiseError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lines = rng.random_range(params.min_lines..=params.max_lines);
    let (lo, hi) = params.words_bounds();
    let lines: Vec<String> = (0..lines)
        .map(|_| {
            let words = rng.random_range(lo..=hi);
            clean_line(&mut rng, words)
        })
        .collect();
    Ok(Document {
        id: format!("doc-{seed:016x}"),
        lines,
        had_trailing_newline: false,
        meta: None,
    })
}

/// Where each noisy line came from.
#[derive(Debug, Clone, PartialEq)]
enum LineOrigin {
    /// The clean line at this index, possibly carrying glued URL noise
    /// that the paired normalize ops strip.
    Clean(usize),
    Noise,
}

struct InjectionPlan {
    nav: Vec<String>,
    footer: Vec<String>,
    /// (clean line index, url) for substrings glued onto a word.
    inline_urls: Vec<(usize, String)>,
    /// (insert position among clean lines, url line) for whole-line noise.
    url_lines: Vec<(usize, String)>,
}

impl InjectionPlan {
    fn noise_line_count(&self) -> usize {
        self.nav.len() + self.footer.len() + self.url_lines.len()
    }

    /// Drop one whole-line injection: footer tail first, then nav head,
    /// then url lines. Used when a chunk's removal ratio would exceed the
    /// configured bound.
    fn trim_one(&mut self) -> bool {
        if self.footer.pop().is_some() {
            return true;
        }
        if !self.nav.is_empty() {
            self.nav.remove(0);
            return true;
        }
        !self.url_lines.is_empty() && {
            self.url_lines.pop();
            true
        }
    }
}

fn build_noisy_lines(clean: &[String], plan: &InjectionPlan) -> (Vec<String>, Vec<LineOrigin>) {
    let mut body: Vec<(String, LineOrigin)> = clean
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), LineOrigin::Clean(i)))
        .collect();

    for (line_idx, url) in &plan.inline_urls {
        let (line, _) = &mut body[*line_idx];
        // Glue the URL onto the front of a word, the way stray links sit
        // in scraped text; removing exactly the URL restores the line.
        let words: Vec<&str> = line.split(' ').collect();
        let target = words.len() / 2;
        let mut rebuilt: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        rebuilt[target] = format!("{url}{}", rebuilt[target]);
        *line = rebuilt.join(" ");
    }

    // Insert whole-line URLs back to front so positions stay valid.
    let mut url_lines = plan.url_lines.clone();
    url_lines.sort_by_key(|(pos, _)| *pos);
    for (pos, url) in url_lines.iter().rev() {
        body.insert(*pos, (url.clone(), LineOrigin::Noise));
    }

    let mut lines = Vec::with_capacity(plan.nav.len() + body.len() + plan.footer.len());
    let mut origins = Vec::with_capacity(plan.nav.len() + body.len() + plan.footer.len());
    for nav in &plan.nav {
        lines.push(nav.clone());
        origins.push(LineOrigin::Noise);
    }
    for (line, origin) in body {
        lines.push(line);
        origins.push(origin);
    }
    for footer in &plan.footer {
        lines.push(footer.clone());
        origins.push(LineOrigin::Noise);
    }
    (lines, origins)
}

/// Group the noisy lines into chunks and derive the gold program for each:
/// maximal runs of noise lines become `remove_lines` ranges, glued URLs
/// become `normalize` ops, untouched chunks get `keep_chunk()`.
fn gold_chunk_programs(
    noisy: &Document,
    origins: &[LineOrigin],
    inline_urls: &[(usize, String)],
    window: usize,
) -> Vec<(usize, RefinementProgram)> {
    let chunks = split_into_chunks(noisy, window).expect("window is validated");
    let mut programs = Vec::with_capacity(chunks.len());
    for chunk in &chunks {
        if chunk.skipped {
            continue; // skipped chunks bypass the provider entirely
        }
        let mut ops: Vec<RefinementOp> = Vec::new();
        let mut run_start: Option<usize> = None;
        for local in 0..chunk.lines.len() {
            let noise = matches!(origins[chunk.base_line + local], LineOrigin::Noise);
            match (noise, run_start) {
                (true, None) => run_start = Some(local),
                (false, Some(start)) => {
                    ops.push(RefinementOp::RemoveLines {
                        start,
                        end: local - 1,
                    });
                    run_start = None;
                }
                _ => {}
            }
        }
        if let Some(start) = run_start {
            ops.push(RefinementOp::RemoveLines {
                start,
                end: chunk.lines.len() - 1,
            });
        }
        for local in 0..chunk.lines.len() {
            if let LineOrigin::Clean(clean_idx) = origins[chunk.base_line + local] {
                for (line_idx, url) in inline_urls {
                    if *line_idx == clean_idx {
                        ops.push(RefinementOp::Normalize {
                            source: url.clone(),
                            target: String::new(),
                        });
                    }
                }
            }
        }
        if ops.is_empty() {
            ops.push(RefinementOp::KeepChunk);
        }
        let program =
            RefinementProgram::new(Stage::Chunk, ops).expect("gold ops satisfy stage invariants");
        programs.push((chunk.index, program));
    }
    programs
}

fn max_chunk_removal_ratio(noisy: &Document, origins: &[LineOrigin], window: usize) -> f64 {
    let chunks = split_into_chunks(noisy, window).expect("window is validated");
    chunks
        .iter()
        .filter(|c| !c.skipped)
        .map(|c| {
            let noise = (0..c.lines.len())
                .filter(|local| matches!(origins[c.base_line + local], LineOrigin::Noise))
                .count();
            noise as f64 / c.lines.len() as f64
        })
        .fold(0.0, f64::max)
}

fn pure_noise_lines(rng: &mut ChaCha8Rng, spec: &NoiseSpec, doc_index: u64) -> Vec<String> {
    let count = rng.random_range(4..=8);
    (0..count)
        .map(|k| match rng.random_range(0..3u8) {
            0 => spec.nav_templates[rng.random_range(0..spec.nav_templates.len())].clone(),
            1 => spec.footer_templates[rng.random_range(0..spec.footer_templates.len())].clone(),
            _ => format!("http://link{doc_index}-{k}.example/page"),
        })
        .collect()
}

/// Inject noise into a clean document, returning the noisy document plus
/// the gold programs that invert every injection.
pub fn inject_noise(
    doc: &Document,
    spec: &NoiseSpec,
    noise_seed: u64,
) -> Result<SynthDoc, NoiseError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, noise_seed));

    if rng.random_bool(spec.pure_noise_probability) {
        let lines = pure_noise_lines(&mut rng, spec, noise_seed);
        let noisy = Document {
            id: doc.id.clone(),
            lines,
            had_trailing_newline: doc.had_trailing_newline,
            meta: None,
        };
        return Ok(SynthDoc {
            noisy,
            clean_lines: None,
            doc_program: RefinementProgram::new(Stage::Doc, vec![RefinementOp::DropDoc]).unwrap(),
            chunk_programs: Vec::new(),
        });
    }

    let mut plan = InjectionPlan {
        nav: Vec::new(),
        footer: Vec::new(),
        inline_urls: Vec::new(),
        url_lines: Vec::new(),
    };
    if rng.random_bool(spec.nav_probability) && spec.max_nav_lines > 0 {
        let k = rng.random_range(1..=spec.max_nav_lines);
        plan.nav = (0..k)
            .map(|_| spec.nav_templates[rng.random_range(0..spec.nav_templates.len())].clone())
            .collect();
    }
    if rng.random_bool(spec.url_probability) {
        let insertions = rng.random_range(1..=2u32);
        for k in 0..insertions {
            let url = format!("http://site{noise_seed}-{k}.example/p");
            if rng.random_bool(0.5) {
                plan.url_lines.push((rng.random_range(0..=doc.lines.len()), url));
            } else {
                plan.inline_urls.push((rng.random_range(0..doc.lines.len()), url));
            }
        }
    }
    if rng.random_bool(spec.footer_probability) && spec.max_footer_lines > 0 {
        let m = rng.random_range(1..=spec.max_footer_lines);
        plan.footer = (0..m)
            .map(|_| {
                spec.footer_templates[rng.random_range(0..spec.footer_templates.len())].clone()
            })
            .collect();
    }

    // Trim whole-line injections until every chunk's gold removal ratio
    // stays within bounds, so executing gold never trips the threshold.
    let (lines, origins) = loop {
        let (lines, origins) = build_noisy_lines(&doc.lines, &plan);
        let noisy_probe = Document {
            id: doc.id.clone(),
            lines: lines.clone(),
            had_trailing_newline: doc.had_trailing_newline,
            meta: None,
        };
        if plan.noise_line_count() == 0
            || max_chunk_removal_ratio(&noisy_probe, &origins, spec.window)
                <= spec.max_chunk_removal_ratio
        {
            break (lines, origins);
        }
        if !plan.trim_one() {
            break (lines, origins);
        }
    };

    let noisy = Document {
        id: doc.id.clone(),
        lines,
        had_trailing_newline: doc.had_trailing_newline,
        meta: None,
    };
    let chunk_programs = gold_chunk_programs(&noisy, &origins, &plan.inline_urls, spec.window);
    Ok(SynthDoc {
        noisy,
        clean_lines: Some(doc.lines.clone()),
        doc_program: RefinementProgram::new(Stage::Doc, vec![RefinementOp::KeepDoc]).unwrap(),
        chunk_programs,
    })
}

/// Generate a corpus of `count` documents. Ids are `synth-NNNNNN`; the
/// per-document seed space partitions, so generation parallelises.
pub fn generate_corpus(
    spec: &NoiseSpec,
    params: &LengthParams,
    count: usize,
) -> Result<Vec<SynthDoc>, NoiseError> {
    spec.validate()?;
    params.validate()?;
    (0..count)
        .map(|i| {
            let mut clean = generate_clean_doc(mix_seed(spec.seed, i as u64), params)?;
            clean.id = format!("synth-{i:06}");
            inject_noise(&clean, spec, i as u64)
        })
        .collect()
}

/// Noisy corpus records in the pipeline's input format.
pub fn to_corpus_records(docs: &[SynthDoc]) -> Vec<crate::pipeline::records::CorpusRecord> {
    docs.iter()
        .map(|d| crate::pipeline::records::CorpusRecord::new(d.noisy.id.clone(), d.noisy.text()))
        .collect()
}

/// Gold programs in the pipeline's sidecar format: one doc-stage entry
/// per document plus one chunk-stage entry per refinable chunk.
pub fn to_sidecar_records(docs: &[SynthDoc]) -> Vec<crate::pipeline::records::SidecarRecord> {
    use crate::pipeline::records::SidecarRecord;
    use crate::program_dsl::serialize_program;
    let mut out = Vec::new();
    for d in docs {
        out.push(SidecarRecord {
            id: d.noisy.id.clone(),
            stage: Stage::Doc,
            chunk_index: None,
            program: serialize_program(&d.doc_program),
        });
        for (index, program) in &d.chunk_programs {
            out.push(SidecarRecord {
                id: d.noisy.id.clone(),
                stage: Stage::Chunk,
                chunk_index: Some(*index),
                program: serialize_program(program),
            });
        }
    }
    out
}

/// The clean reference corpus: what a perfect refinement run should emit.
/// Pure-noise documents are absent, matching their gold `drop_doc()`.
pub fn to_clean_records(docs: &[SynthDoc]) -> Vec<crate::pipeline::records::CorpusRecord> {
    docs.iter()
        .filter_map(|d| {
            d.clean_lines.as_ref().map(|lines| {
                crate::pipeline::records::CorpusRecord::new(d.noisy.id.clone(), lines.join("\n"))
            })
        })
        .collect()
}

/// Analytically expected token (word) retention of the generated corpus:
/// clean words over noisy words, in expectation. Valid when injections
/// are never trimmed, which holds for the default parameters.
pub fn expected_retention(spec: &NoiseSpec, params: &LengthParams) -> f64 {
    let mean_words = |templates: &[String]| {
        templates.iter().map(|t| count_words(t) as f64).sum::<f64>() / templates.len() as f64
    };
    let (lo, hi) = params.words_bounds();
    let clean_words_per_line = (lo + hi) as f64 / 2.0;
    let clean_lines = (params.min_lines + params.max_lines) as f64 / 2.0;
    let clean_words = clean_lines * clean_words_per_line;

    let nav_words = spec.nav_probability * (1 + spec.max_nav_lines) as f64 / 2.0
        * mean_words(&spec.nav_templates);
    let footer_words = spec.footer_probability * (1 + spec.max_footer_lines) as f64 / 2.0
        * mean_words(&spec.footer_templates);
    // URL insertions: 1..=2 per hit, half whole-line (one word each);
    // glued substrings add zero words.
    let url_words = spec.url_probability * 1.5 * 0.5;
    let noise_words = nav_words + footer_words + url_words;

    // Pure-noise docs: 4..=8 lines, categories uniform over nav, footer,
    // and single-word url lines.
    let pure_line_words =
        (mean_words(&spec.nav_templates) + mean_words(&spec.footer_templates) + 1.0) / 3.0;
    let pure_words = 6.0 * pure_line_words;

    let p = spec.pure_noise_probability;
    let kept = (1.0 - p) * clean_words;
    let total = (1.0 - p) * (clean_words + noise_words) + p * pure_words;
    kept / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunker::reassemble;
    use crate::executor::{apply_chunk_program, ExecPolicy};
    use crate::metrics::{chunk_line_f1, noisy_line_set};

    fn spec_with_seed(seed: u64) -> NoiseSpec {
        NoiseSpec {
            seed,
            ..NoiseSpec::default()
        }
    }

    /// Run the gold chunk programs over a noisy doc, the way the chunk
    /// stage would, and return the reassembled lines.
    fn execute_gold(synth: &SynthDoc, window: usize) -> Vec<String> {
        let chunks = split_into_chunks(&synth.noisy, window).unwrap();
        let policy = ExecPolicy::default();
        let pairs: Vec<_> = chunks
            .into_iter()
            .map(|c| {
                let program = synth
                    .chunk_programs
                    .iter()
                    .find(|(i, _)| *i == c.index)
                    .map(|(_, p)| p.clone());
                let result = match program {
                    Some(p) => apply_chunk_program(&c.lines, &p, &policy).unwrap(),
                    None => {
                        assert!(c.skipped, "only skipped chunks may lack a gold program");
                        apply_chunk_program(
                            &c.lines,
                            &RefinementProgram::new(Stage::Chunk, vec![RefinementOp::KeepChunk])
                                .unwrap(),
                            &policy,
                        )
                        .unwrap()
                    }
                };
                (c, result)
            })
            .collect();
        reassemble(&pairs).unwrap()
    }

    #[test]
    fn clean_doc_generation_is_deterministic() {
        let params = LengthParams::default();
        let a = generate_clean_doc(7, &params).unwrap();
        let b = generate_clean_doc(7, &params).unwrap();
        assert_eq!(a, b);
        let c = generate_clean_doc(8, &params).unwrap();
        assert_ne!(a.lines, c.lines);
    }

    #[test]
    fn clean_doc_respects_length_params() {
        let params = LengthParams {
            min_lines: 5,
            max_lines: 5,
            words_per_line: 10,
        };
        let doc = generate_clean_doc(123, &params).unwrap();
        assert_eq!(doc.lines.len(), 5);
        for line in &doc.lines {
            let words = count_words(line);
            assert!((8..=12).contains(&words), "line has {words} words");
        }
    }

    #[test]
    fn zero_words_is_rejected() {
        let params = LengthParams {
            words_per_line: 0,
            ..LengthParams::default()
        };
        assert_eq!(generate_clean_doc(1, &params), Err(NoiseError::ZeroWords));
    }

    #[test]
    fn clean_docs_contain_no_noise_substrings() {
        let spec = NoiseSpec::default();
        for seed in 0..50 {
            let doc = generate_clean_doc(seed, &LengthParams::default()).unwrap();
            let text = doc.text();
            assert!(!text.contains("http"));
            for t in spec.nav_templates.iter().chain(&spec.footer_templates) {
                assert!(!text.contains(t.as_str()));
            }
        }
    }

    #[test]
    fn nav_only_injection_yields_leading_removal() {
        let spec = NoiseSpec {
            nav_probability: 1.0,
            url_probability: 0.0,
            footer_probability: 0.0,
            pure_noise_probability: 0.0,
            max_nav_lines: 2,
            ..spec_with_seed(11)
        };
        // Find a draw that inserts exactly two nav lines.
        for noise_seed in 0..64 {
            let clean = generate_clean_doc(noise_seed, &LengthParams::default()).unwrap();
            let synth = inject_noise(&clean, &spec, noise_seed).unwrap();
            let nav_lines = synth.noisy.lines.len() - clean.lines.len();
            assert!(nav_lines == 1 || nav_lines == 2);
            if nav_lines == 2 {
                assert_eq!(synth.chunk_programs.len(), 1);
                assert_eq!(
                    synth.chunk_programs[0].1.ops,
                    vec![RefinementOp::RemoveLines { start: 0, end: 1 }]
                );
                return;
            }
        }
        panic!("no two-line nav draw in 64 seeds");
    }

    #[test]
    fn inline_url_injection_yields_normalize_gold() {
        let spec = NoiseSpec {
            nav_probability: 0.0,
            url_probability: 1.0,
            footer_probability: 0.0,
            pure_noise_probability: 0.0,
            ..spec_with_seed(5)
        };
        let mut saw_inline = false;
        for noise_seed in 0..64 {
            let clean = generate_clean_doc(noise_seed + 1000, &LengthParams::default()).unwrap();
            let synth = inject_noise(&clean, &spec, noise_seed).unwrap();
            for (_, program) in &synth.chunk_programs {
                for op in &program.ops {
                    if let RefinementOp::Normalize { source, target } = op {
                        saw_inline = true;
                        assert!(source.starts_with("http://"));
                        assert!(target.is_empty());
                        assert!(synth.noisy.text().contains(source.as_str()));
                    }
                }
            }
            assert_eq!(execute_gold(&synth, spec.window), clean.lines);
        }
        assert!(saw_inline, "no inline url draw in 64 seeds");
    }

    #[test]
    fn zero_probability_spec_is_identity_with_keep_gold() {
        let spec = NoiseSpec {
            nav_probability: 0.0,
            url_probability: 0.0,
            footer_probability: 0.0,
            pure_noise_probability: 0.0,
            ..spec_with_seed(3)
        };
        let clean = generate_clean_doc(42, &LengthParams::default()).unwrap();
        let synth = inject_noise(&clean, &spec, 42).unwrap();
        assert_eq!(synth.noisy.lines, clean.lines);
        assert_eq!(synth.chunk_programs.len(), 1);
        assert_eq!(synth.chunk_programs[0].1.ops, vec![RefinementOp::KeepChunk]);
    }

    #[test]
    fn gold_execution_inverts_every_injection() {
        let spec = spec_with_seed(99);
        let corpus = generate_corpus(&spec, &LengthParams::default(), 300).unwrap();
        let mut pure = 0;
        for synth in &corpus {
            match &synth.clean_lines {
                None => {
                    pure += 1;
                    assert_eq!(synth.doc_program.ops, vec![RefinementOp::DropDoc]);
                }
                Some(clean) => {
                    assert_eq!(synth.doc_program.ops, vec![RefinementOp::KeepDoc]);
                    let recovered = execute_gold(synth, spec.window);
                    assert_eq!(&recovered, clean, "doc {}", synth.noisy.id);
                }
            }
        }
        assert!(pure > 0, "expected some pure-noise documents");
    }

    #[test]
    fn gold_against_gold_line_f1_is_one() {
        let spec = spec_with_seed(17);
        let corpus = generate_corpus(&spec, &LengthParams::default(), 50).unwrap();
        for synth in &corpus {
            let chunks = split_into_chunks(&synth.noisy, spec.window).unwrap();
            for (idx, program) in &synth.chunk_programs {
                let line_count = chunks[*idx].lines.len();
                let gold = noisy_line_set(program, line_count);
                assert_eq!(chunk_line_f1(&gold, &gold).f1, 1.0);
            }
        }
    }

    #[test]
    fn corpus_generation_is_deterministic() {
        let spec = spec_with_seed(1234);
        let a = generate_corpus(&spec, &LengthParams::default(), 40).unwrap();
        let b = generate_corpus(&spec, &LengthParams::default(), 40).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn measured_retention_approaches_the_analytic_value() {
        let spec = spec_with_seed(2024);
        let params = LengthParams::default();
        let corpus = generate_corpus(&spec, &params, 4000).unwrap();
        let mut noisy_words = 0usize;
        let mut clean_words = 0usize;
        for synth in &corpus {
            noisy_words += synth.noisy.lines.iter().map(|l| count_words(l)).sum::<usize>();
            if let Some(clean) = &synth.clean_lines {
                clean_words += clean.iter().map(|l| count_words(l)).sum::<usize>();
            }
        }
        let measured = clean_words as f64 / noisy_words as f64;
        let expected = expected_retention(&spec, &params);
        assert!(
            (measured - expected).abs() / expected < 0.02,
            "measured {measured:.4} vs expected {expected:.4}"
        );
    }
}
