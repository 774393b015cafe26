//! Python bindings for the corpus-refinement engine: the program DSL,
//! the executor, the chunker, score parsing, evaluation metrics, and
//! FLOPs accounting. File-level pipeline orchestration stays in the
//! `refinery` CLI; these bindings expose the pure compute kernel.

use std::collections::BTreeSet;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyTuple};

use refinery::chunker;
use refinery::executor::{
    self, Document, ExecPolicy, OutOfRangePolicy, OverThresholdAction, PolicyAction, RefinedResult,
};
use refinery::flops;
use refinery::metrics::{self, F1Report};
use refinery::program_dsl::{self, RefinementOp, RefinementProgram, Stage};
use refinery::prompts;
use refinery::scoring::{self, FilterDecision, QualityScores};

fn parse_stage(stage: &str) -> PyResult<Stage> {
    match stage {
        "doc" => Ok(Stage::Doc),
        "chunk" => Ok(Stage::Chunk),
        other => Err(PyValueError::new_err(format!(
            "unknown stage `{other}` (doc|chunk)"
        ))),
    }
}

fn build_policy(tau: f64, on_over_threshold: &str, out_of_range: &str) -> PyResult<ExecPolicy> {
    let over = match on_over_threshold {
        "keep-original" => OverThresholdAction::KeepOriginal,
        "drop-chunk" => OverThresholdAction::DropChunk,
        "error" => OverThresholdAction::Error,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown over-threshold action `{other}` (keep-original|drop-chunk|error)"
            )));
        }
    };
    let range = match out_of_range {
        "reject" => OutOfRangePolicy::Reject,
        "clamp" => OutOfRangePolicy::Clamp,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown out-of-range policy `{other}` (reject|clamp)"
            )));
        }
    };
    let policy = ExecPolicy {
        removal_ratio_threshold: tau,
        over_threshold_action: over,
        out_of_range_lines: range,
    };
    policy
        .validate()
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(policy)
}

fn policy_action_name(action: PolicyAction) -> &'static str {
    match action {
        PolicyAction::None => "none",
        PolicyAction::KeptOriginal => "kept_original",
        PolicyAction::Rejected => "rejected",
    }
}

fn result_dict<'py>(py: Python<'py>, result: &RefinedResult) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("kept", result.kept)?;
    dict.set_item("lines", result.lines.clone())?;
    dict.set_item("ops_applied", result.ops_applied)?;
    dict.set_item("lines_removed", result.lines_removed)?;
    dict.set_item("replacements_made", result.replacements_made)?;
    dict.set_item("policy_action", policy_action_name(result.policy_action))?;
    Ok(dict)
}

fn f1_dict<'py>(py: Python<'py>, report: &F1Report) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("tp", report.tp)?;
    dict.set_item("fp", report.fp)?;
    dict.set_item("fn", report.fn_)?;
    dict.set_item("precision", report.precision)?;
    dict.set_item("recall", report.recall)?;
    dict.set_item("f1", report.f1)?;
    Ok(dict)
}

/// A validated refinement program.
#[pyclass(name = "Program", frozen)]
struct PyProgram {
    inner: RefinementProgram,
}

#[pymethods]
impl PyProgram {
    /// Stage this program belongs to: "doc" or "chunk".
    #[getter]
    fn stage(&self) -> String {
        self.inner.stage.to_string()
    }

    /// Operations as tuples: ("drop_doc",), ("keep_doc",), ("keep_chunk",),
    /// ("remove_lines", start, end), ("normalize", source, target).
    #[getter]
    fn ops<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyTuple>>> {
        self.inner
            .ops
            .iter()
            .map(|op| match op {
                RefinementOp::DropDoc => PyTuple::new(py, ["drop_doc"]),
                RefinementOp::KeepDoc => PyTuple::new(py, ["keep_doc"]),
                RefinementOp::KeepChunk => PyTuple::new(py, ["keep_chunk"]),
                RefinementOp::RemoveLines { start, end } => {
                    ("remove_lines", *start, *end).into_pyobject(py)
                }
                RefinementOp::Normalize { source, target } => {
                    ("normalize", source.clone(), target.clone()).into_pyobject(py)
                }
            })
            .collect()
    }

    /// Canonical program text; parsing it back yields an equal program.
    fn to_text(&self) -> String {
        program_dsl::serialize_program(&self.inner)
    }

    /// Inclusive (start, end) ranges of every remove_lines op.
    fn removal_ranges(&self) -> Vec<(usize, usize)> {
        self.inner.removal_ranges()
    }

    /// Line indices this program predicts as noisy, clamped to the chunk.
    fn noisy_lines(&self, line_count: usize) -> BTreeSet<usize> {
        metrics::noisy_line_set(&self.inner, line_count)
    }

    fn __len__(&self) -> usize {
        self.inner.ops.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Program(stage={:?}, text={:?})",
            self.inner.stage.to_string(),
            self.to_text()
        )
    }
}

/// Parse program text for a stage ("doc" or "chunk"). Raises ValueError
/// with the full diagnostics when the program is rejected.
#[pyfunction]
fn parse_program(text: &str, stage: &str) -> PyResult<PyProgram> {
    let stage = parse_stage(stage)?;
    match program_dsl::parse_program(text, stage) {
        Ok(parsed) => Ok(PyProgram {
            inner: parsed.program,
        }),
        Err(diagnostics) => Err(PyValueError::new_err(diagnostics.to_string())),
    }
}

/// Interior of the first triple-backtick fence, or the input trimmed of
/// blank lines when no fence exists.
#[pyfunction]
fn extract_fenced_code(raw: &str) -> PyResult<String> {
    program_dsl::extract_fenced_code(raw).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Render lines in the numbered `[NNN]` form providers consume.
#[pyfunction]
fn render_numbered(lines: Vec<String>) -> String {
    program_dsl::render_numbered(&lines)
}

/// Apply a doc-stage program to document text. Returns the refined text,
/// or None when the document is dropped.
#[pyfunction]
fn refine_document(text: &str, program: &PyProgram) -> PyResult<Option<String>> {
    let doc = Document::from_text("py", text);
    let result = executor::apply_doc_program(&doc, &program.inner)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(result.kept.then(|| {
        let mut out = result.lines.join("\n");
        if doc.had_trailing_newline {
            out.push('\n');
        }
        out
    }))
}

/// Apply a chunk-stage program to chunk lines under the given policy.
/// Returns a dict with kept, lines, and the applied-operation counters.
#[pyfunction]
#[pyo3(signature = (lines, program, tau=0.8, on_over_threshold="keep-original", out_of_range="reject"))]
fn refine_chunk<'py>(
    py: Python<'py>,
    lines: Vec<String>,
    program: &PyProgram,
    tau: f64,
    on_over_threshold: &str,
    out_of_range: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let policy = build_policy(tau, on_over_threshold, out_of_range)?;
    let result = executor::apply_chunk_program(&lines, &program.inner, &policy)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    result_dict(py, &result)
}

/// Number of whitespace-separated words in a line.
#[pyfunction]
fn count_words(line: &str) -> usize {
    chunker::count_words(line)
}

/// Split document text into word-bounded chunks. Each chunk is a dict
/// with index, base_line, word_count, skipped, and lines.
#[pyfunction]
#[pyo3(signature = (text, window=1500))]
fn split_chunks<'py>(
    py: Python<'py>,
    text: &str,
    window: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let doc = Document::from_text("py", text);
    let chunks =
        chunker::split_into_chunks(&doc, window).map_err(|e| PyValueError::new_err(e.to_string()))?;
    chunks
        .into_iter()
        .map(|chunk| {
            let dict = PyDict::new(py);
            dict.set_item("index", chunk.index)?;
            dict.set_item("base_line", chunk.base_line)?;
            dict.set_item("word_count", chunk.word_count)?;
            dict.set_item("skipped", chunk.skipped)?;
            dict.set_item("lines", chunk.lines)?;
            Ok(dict)
        })
        .collect()
}

/// Doc-level keep/drop F1 with keep as the positive class.
#[pyfunction]
fn doc_f1<'py>(
    py: Python<'py>,
    predicted_keep: Vec<bool>,
    gold_keep: Vec<bool>,
) -> PyResult<Bound<'py, PyDict>> {
    let report = metrics::doc_f1(&predicted_keep, &gold_keep)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    f1_dict(py, &report)
}

/// Line-wise F1 between predicted and gold noisy-line index sets.
#[pyfunction]
fn chunk_line_f1<'py>(
    py: Python<'py>,
    predicted: BTreeSet<usize>,
    gold: BTreeSet<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    f1_dict(py, &metrics::chunk_line_f1(&predicted, &gold))
}

/// Refined-token count over original-token count.
#[pyfunction]
fn retention_ratio(tokens_before: f64, tokens_after: f64) -> PyResult<f64> {
    metrics::retention_ratio(tokens_before, tokens_after)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Bin token counts into half-open buckets; the final bucket is
/// open-ended and values below the first edge land in `underflow`.
#[pyfunction]
fn length_histogram<'py>(
    py: Python<'py>,
    token_counts: Vec<u64>,
    bucket_edges: Vec<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let hist = metrics::length_histogram(&token_counts, &bucket_edges)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let dict = PyDict::new(py);
    dict.set_item("bucket_edges", hist.bucket_edges.clone())?;
    dict.set_item("counts", hist.counts.clone())?;
    dict.set_item("underflow", hist.underflow)?;
    dict.set_item("doc_count", hist.doc_count)?;
    dict.set_item("mean_tokens", hist.mean_tokens())?;
    Ok(dict)
}

/// Training compute: 6 * N * D.
#[pyfunction]
fn train_flops(n_params: u64, d_train: u64) -> u128 {
    flops::train_flops(n_params, d_train)
}

/// Inference compute: 2 * N * (prefill + decode).
#[pyfunction]
#[pyo3(signature = (n_params, d_prefill, d_decode=0))]
fn inference_flops(n_params: u64, d_prefill: u64, d_decode: u64) -> u128 {
    flops::inference_flops(n_params, d_prefill, d_decode)
}

/// Two-stage refining overhead: 2 * N_refine * (d_raw + d_doc).
#[pyfunction]
fn refining_overhead_flops(n_refine: u64, d_raw: u64, d_doc: u64) -> u128 {
    flops::refining_overhead_flops(n_refine, d_raw, d_doc)
}

/// Training tokens a compute budget buys on a model of n_model params.
#[pyfunction]
fn equivalent_train_tokens(flops_budget: u128, n_model: u64) -> PyResult<f64> {
    flops::equivalent_train_tokens(flops_budget, n_model)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Integer after the last `Educational score:` marker, clamped to 0..=5.
#[pyfunction]
fn parse_edu_score(critique: &str) -> PyResult<u8> {
    scoring::parse_edu_score(critique).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Integer after the last `Extraction Quality Score:` marker, clamped to 0..=5.
#[pyfunction]
fn parse_format_score(critique: &str) -> PyResult<u8> {
    scoring::parse_format_score(critique).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Apply the document filtering criteria; returns "keep" or "drop".
#[pyfunction]
fn filter_decision(edu: u8, format: u8) -> PyResult<&'static str> {
    let scores = QualityScores::new(edu, format).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(match scoring::filter_decision(scores) {
        FilterDecision::Keep => "keep",
        FilterDecision::Drop => "drop",
    })
}

/// Names of the bundled prompt templates.
#[pyfunction]
fn prompt_names() -> Vec<&'static str> {
    prompts::all().map(|(name, _)| name).to_vec()
}

/// A bundled prompt template by name.
#[pyfunction]
fn prompt_template(name: &str) -> PyResult<&'static str> {
    prompts::all()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| text)
        .ok_or_else(|| PyValueError::new_err(format!("unknown prompt `{name}`")))
}

#[pymodule]
fn refinery_rs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProgram>()?;
    m.add_function(wrap_pyfunction!(parse_program, m)?)?;
    m.add_function(wrap_pyfunction!(extract_fenced_code, m)?)?;
    m.add_function(wrap_pyfunction!(render_numbered, m)?)?;
    m.add_function(wrap_pyfunction!(refine_document, m)?)?;
    m.add_function(wrap_pyfunction!(refine_chunk, m)?)?;
    m.add_function(wrap_pyfunction!(count_words, m)?)?;
    m.add_function(wrap_pyfunction!(split_chunks, m)?)?;
    m.add_function(wrap_pyfunction!(doc_f1, m)?)?;
    m.add_function(wrap_pyfunction!(chunk_line_f1, m)?)?;
    m.add_function(wrap_pyfunction!(retention_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(length_histogram, m)?)?;
    m.add_function(wrap_pyfunction!(train_flops, m)?)?;
    m.add_function(wrap_pyfunction!(inference_flops, m)?)?;
    m.add_function(wrap_pyfunction!(refining_overhead_flops, m)?)?;
    m.add_function(wrap_pyfunction!(equivalent_train_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(parse_edu_score, m)?)?;
    m.add_function(wrap_pyfunction!(parse_format_score, m)?)?;
    m.add_function(wrap_pyfunction!(filter_decision, m)?)?;
    m.add_function(wrap_pyfunction!(prompt_names, m)?)?;
    m.add_function(wrap_pyfunction!(prompt_template, m)?)?;
    Ok(())
}
