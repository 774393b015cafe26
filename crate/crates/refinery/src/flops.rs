//! Compute accounting under the 6ND / 2ND approximations.
//!
//! Parameter counts are non-embedding parameters throughout. Token and
//! parameter counts are integers and all FLOPs products are computed in
//! u128, so identities like distributivity hold exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FlopsError {
    #[error("model parameter count must be positive")]
    ZeroModelParams,
    #[error("`{0}` is not a valid token/parameter count")]
    BadCount(String),
}

/// Parameter and token counts feeding the accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopsParams {
    /// Non-embedding parameters of the model being trained.
    pub n_params: u64,
    /// Non-embedding parameters of the refining model.
    pub n_refine: u64,
    pub d_train: u64,
    pub d_prefill: u64,
    pub d_decode: u64,
    /// Raw corpus tokens entering the document stage.
    pub d_raw: u64,
    /// Tokens surviving the document stage, entering the chunk stage.
    pub d_doc: u64,
    /// Tokens in the final refined corpus.
    pub d_refined: u64,
}

/// Training compute: `6 · N · D`, exactly.
pub fn train_flops(n_params: u64, d_train: u64) -> u128 {
    6 * n_params as u128 * d_train as u128
}

/// Inference compute: `2 · N · (D_prefill + D_decode)`, exactly.
pub fn inference_flops(n_params: u64, d_prefill: u64, d_decode: u64) -> u128 {
    2 * n_params as u128 * (d_prefill as u128 + d_decode as u128)
}

/// Total refining overhead for the two stages with equally sized refining
/// models: `2 · N_refine · (D_raw + D_doc)`. Decode tokens are treated as
/// negligible; use [`refining_overhead_flops_with_decode`] to include them.
pub fn refining_overhead_flops(n_refine: u64, d_raw: u64, d_doc: u64) -> u128 {
    if d_doc > d_raw {
        log::warn!("d_doc ({d_doc}) exceeds d_raw ({d_raw}); stage-two input is usually smaller");
    }
    2 * n_refine as u128 * (d_raw as u128 + d_doc as u128)
}

/// Overhead with explicit per-stage decode token counts, for sensitivity
/// analysis against the decode-is-negligible approximation.
pub fn refining_overhead_flops_with_decode(
    n_refine: u64,
    d_raw: u64,
    decode_doc_stage: u64,
    d_doc: u64,
    decode_chunk_stage: u64,
) -> u128 {
    inference_flops(n_refine, d_raw, decode_doc_stage)
        + inference_flops(n_refine, d_doc, decode_chunk_stage)
}

/// Invert the training formula: how many training tokens a compute budget
/// buys on a model of `n_model` non-embedding parameters.
pub fn equivalent_train_tokens(flops: u128, n_model: u64) -> Result<f64, FlopsError> {
    if n_model == 0 {
        return Err(FlopsError::ZeroModelParams);
    }
    Ok(flops as f64 / (6.0 * n_model as f64))
}

/// Per-stage overhead breakdown for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverheadBreakdown {
    pub doc_stage: u128,
    pub chunk_stage: u128,
    pub total: u128,
}

pub fn overhead_breakdown(n_refine: u64, d_raw: u64, d_doc: u64) -> OverheadBreakdown {
    let doc_stage = inference_flops(n_refine, d_raw, 0);
    let chunk_stage = inference_flops(n_refine, d_doc, 0);
    OverheadBreakdown {
        doc_stage,
        chunk_stage,
        total: doc_stage + chunk_stage,
    }
}

/// Parse a token or parameter count given as an integer, possibly with a
/// decimal point or exponent (`62.5e9`). The value must be a whole
/// non-negative number.
pub fn parse_count(text: &str) -> Result<u64, FlopsError> {
    let cleaned = text.trim().replace(['_', ','], "");
    if let Ok(v) = cleaned.parse::<u64>() {
        return Ok(v);
    }
    let bad = || FlopsError::BadCount(text.to_string());
    let v: f64 = cleaned.parse().map_err(|_| bad())?;
    if !v.is_finite() || v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(bad());
    }
    Ok(v as u64)
}
