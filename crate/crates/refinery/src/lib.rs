//! Refinery — a two-stage corpus refinement engine for pre-training data.
//!
//! Documents flow through two refining stages. The document stage makes a
//! whole-document keep/drop decision; the chunk stage splits surviving
//! documents into word-bounded chunks and applies fine-grained line removal
//! and string normalization. Both stages are driven by small programs in a
//! restricted function-call DSL that an external text-generation provider
//! emits, and a deterministic executor applies.
//!
//! The crate also carries the surrounding machinery: quality-score parsing
//! and filtering criteria ([`scoring`]), evaluation metrics ([`metrics`]),
//! compute-overhead accounting ([`flops`]), a sharded corpus pipeline
//! ([`pipeline`]), and a synthetic-noise harness with known gold programs
//! ([`noiseforge`]).

pub mod chunker;
pub mod executor;
pub mod flops;
pub mod metrics;
pub mod noiseforge;
pub mod pipeline;
pub mod program_dsl;
pub mod prompts;
pub mod scoring;

pub use chunker::{count_words, reassemble, split_into_chunks, Chunk};
pub use executor::{
    apply_chunk_program, apply_doc_program, Document, ExecPolicy, OutOfRangePolicy,
    OverThresholdAction, PolicyAction, RefinedResult,
};
pub use metrics::F1Report;
pub use program_dsl::{
    extract_fenced_code, parse_program, render_numbered, serialize_program, ParseDiagnostics,
    RefinementOp, RefinementProgram, Stage,
};
pub use scoring::{filter_decision, parse_edu_score, parse_format_score, FilterDecision, QualityScores};
