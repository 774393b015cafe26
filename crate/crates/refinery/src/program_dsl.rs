//! The restricted function-call DSL that refinement programs are written in.
//!
//! A program is a sequence of calls, one per line. `#` starts a comment
//! line, blank lines are skipped, and every call is one of the fixed
//! function set: `drop_doc()` / `keep_doc()` at document stage,
//! `keep_chunk()` / `remove_lines(line_start, line_end)` /
//! `normalize(source_str, target_str)` at chunk stage. There is no
//! expression evaluation, arithmetic, or control flow; anything outside
//! this grammar is rejected, never executed.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Which refining stage a program belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Doc,
    Chunk,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Doc => write!(f, "doc"),
            Stage::Chunk => write!(f, "chunk"),
        }
    }
}

/// A single refinement operation.
///
/// `RemoveLines` bounds are zero-based and inclusive, interpreted against
/// the numbering the provider saw in [`render_numbered`] output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefinementOp {
    DropDoc,
    KeepDoc,
    KeepChunk,
    RemoveLines { start: usize, end: usize },
    Normalize { source: String, target: String },
}

/// A validated sequence of refinement operations for one stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinementProgram {
    pub stage: Stage,
    pub ops: Vec<RefinementOp>,
    /// The raw text the program was parsed from, kept for audit trails.
    pub source_text: String,
}

impl RefinementProgram {
    /// Build a program directly from ops, validating the stage invariants.
    pub fn new(stage: Stage, ops: Vec<RefinementOp>) -> Result<Self, String> {
        validate_stage_ops(stage, &ops)?;
        let source_text = serialize_ops(&ops);
        Ok(RefinementProgram {
            stage,
            ops,
            source_text,
        })
    }

    /// Inclusive line ranges of every `remove_lines` op, in program order.
    pub fn removal_ranges(&self) -> Vec<(usize, usize)> {
        self.ops
            .iter()
            .filter_map(|op| match op {
                RefinementOp::RemoveLines { start, end } => Some((*start, *end)),
                _ => None,
            })
            .collect()
    }

    /// `normalize` replacements, in program order.
    pub fn normalizations(&self) -> Vec<(&str, &str)> {
        self.ops
            .iter()
            .filter_map(|op| match op {
                RefinementOp::Normalize { source, target } => {
                    Some((source.as_str(), target.as_str()))
                }
                _ => None,
            })
            .collect()
    }
}

/// One parse error, anchored to a byte offset in the input text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseIssue {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (at byte {})", self.message, self.offset)
    }
}

impl std::error::Error for ParseIssue {}

/// Errors and warnings produced while parsing program text.
///
/// A program is accepted iff `errors` is empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub errors: Vec<ParseIssue>,
    pub warnings: Vec<String>,
}

impl fmt::Display for ParseDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f)?;
            write!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseDiagnostics {}

/// An accepted program plus any non-fatal warnings raised during parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedProgram {
    pub program: RefinementProgram,
    pub warnings: Vec<String>,
}

/// Pull the program text out of a provider response.
///
/// Returns the interior of the first triple-backtick fence (the fence line
/// may carry a language tag) when one exists, otherwise the input itself.
/// Either way the result is trimmed of leading and trailing blank lines.
/// An opening fence without a closing fence is an error.
pub fn extract_fenced_code(raw: &str) -> Result<String, ParseIssue> {
    let mut opening: Option<usize> = None;
    let mut interior_start = 0usize;

    for (line, line_offset) in lines_with_offsets(raw) {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("```") {
            let fence_offset = line_offset + (line.len() - trimmed.len());
            match opening {
                None => {
                    opening = Some(fence_offset);
                    interior_start = line_offset + line.len() + 1; // past the newline
                    let _language_tag = rest; // ignored
                }
                Some(_) => {
                    let interior_end = line_offset.saturating_sub(1).max(interior_start);
                    let interior = raw
                        .get(interior_start..interior_end.min(raw.len()))
                        .unwrap_or("");
                    return Ok(trim_blank_lines(interior).to_string());
                }
            }
        }
    }

    match opening {
        Some(offset) => Err(ParseIssue {
            offset,
            message: "unterminated code fence".to_string(),
        }),
        None => Ok(trim_blank_lines(raw).to_string()),
    }
}

/// Render lines in the numbered form providers consume: each line `i`
/// prefixed with `[NNN]`, zero-padded to width `max(3, digits of the last
/// index)`, lines joined by newline and otherwise unchanged.
pub fn render_numbered<S: AsRef<str>>(lines: &[S]) -> String {
    if lines.is_empty() {
        return String::new();
    }
    let width = digits(lines.len() - 1).max(3);
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("[{i:0width$}]"));
        out.push_str(line.as_ref());
    }
    out
}

/// Canonical textual form: one call per line, keyword arguments,
/// double-quoted escaped strings. `parse_program` of the output yields a
/// structurally equal program.
pub fn serialize_program(program: &RefinementProgram) -> String {
    serialize_ops(&program.ops)
}

fn serialize_ops(ops: &[RefinementOp]) -> String {
    let mut out = String::new();
    for (i, op) in ops.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match op {
            RefinementOp::DropDoc => out.push_str("drop_doc()"),
            RefinementOp::KeepDoc => out.push_str("keep_doc()"),
            RefinementOp::KeepChunk => out.push_str("keep_chunk()"),
            RefinementOp::RemoveLines { start, end } => {
                out.push_str(&format!("remove_lines(line_start={start}, line_end={end})"));
            }
            RefinementOp::Normalize { source, target } => {
                out.push_str(&format!(
                    "normalize(source_str=\"{}\", target_str=\"{}\")",
                    escape_string(source),
                    escape_string(target)
                ));
            }
        }
    }
    out
}

fn escape_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out
}

/// Parse program text into a validated [`RefinementProgram`] for the given
/// stage, or diagnostics describing every problem found.
///
/// Comment and blank lines are skipped. Both positional and keyword
/// arguments are accepted, with `start`/`end` as alternate spellings of
/// `line_start`/`line_end`. `untouch_doc()` is a prompt-era alias for the
/// stage's keep op. Empty program text is treated as "no change": the
/// stage's keep op, flagged with a warning for audit.
pub fn parse_program(text: &str, stage: Stage) -> Result<ParsedProgram, ParseDiagnostics> {
    let mut diags = ParseDiagnostics::default();
    let mut ops: Vec<(usize, RefinementOp)> = Vec::new();

    for (line, line_offset) in lines_with_offsets(text) {
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match parse_call_line(line, line_offset) {
            Ok(call) => match lower_call(&call, stage) {
                Ok(op) => ops.push((call.offset, op)),
                Err(issue) => diags.errors.push(issue),
            },
            Err(issue) => diags.errors.push(issue),
        }
    }

    if ops.is_empty() && diags.errors.is_empty() {
        diags
            .warnings
            .push(format!("empty program; defaulting to the {stage}-stage keep op"));
        let op = match stage {
            Stage::Doc => RefinementOp::KeepDoc,
            Stage::Chunk => RefinementOp::KeepChunk,
        };
        return Ok(ParsedProgram {
            program: RefinementProgram {
                stage,
                ops: vec![op],
                source_text: text.to_string(),
            },
            warnings: diags.warnings,
        });
    }

    // Program-shape checks across the whole op list.
    match stage {
        Stage::Doc => {
            for (offset, _) in ops.iter().skip(1) {
                diags.errors.push(ParseIssue {
                    offset: *offset,
                    message: "document-stage program must contain exactly one operation"
                        .to_string(),
                });
            }
        }
        Stage::Chunk => {
            if ops.len() > 1 {
                for (offset, op) in &ops {
                    if matches!(op, RefinementOp::KeepChunk) {
                        diags.errors.push(ParseIssue {
                            offset: *offset,
                            message: "keep_chunk() must be the only operation in a program"
                                .to_string(),
                        });
                    }
                }
            }
        }
    }

    if diags.errors.is_empty() {
        Ok(ParsedProgram {
            program: RefinementProgram {
                stage,
                ops: ops.into_iter().map(|(_, op)| op).collect(),
                source_text: text.to_string(),
            },
            warnings: diags.warnings,
        })
    } else {
        Err(diags)
    }
}

fn validate_stage_ops(stage: Stage, ops: &[RefinementOp]) -> Result<(), String> {
    match stage {
        Stage::Doc => {
            if ops.len() != 1 {
                return Err("document-stage program must contain exactly one operation".into());
            }
            if !matches!(ops[0], RefinementOp::DropDoc | RefinementOp::KeepDoc) {
                return Err("document-stage program may only contain drop_doc or keep_doc".into());
            }
        }
        Stage::Chunk => {
            for op in ops {
                match op {
                    RefinementOp::DropDoc | RefinementOp::KeepDoc => {
                        return Err(
                            "chunk-stage program may not contain document-stage operations".into()
                        );
                    }
                    RefinementOp::KeepChunk if ops.len() > 1 => {
                        return Err("keep_chunk() must be the only operation in a program".into());
                    }
                    RefinementOp::RemoveLines { start, end } if start > end => {
                        return Err(format!("line_start {start} exceeds line_end {end}"));
                    }
                    RefinementOp::Normalize { source, .. } if source.is_empty() => {
                        return Err("normalize source_str must be non-empty".into());
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(())
}

// --- call parsing ------------------------------------------------------

#[derive(Debug)]
struct Call {
    name: String,
    args: Vec<Arg>,
    offset: usize,
}

#[derive(Debug)]
struct Arg {
    keyword: Option<String>,
    value: Value,
    offset: usize,
}

#[derive(Debug)]
enum Value {
    Int(usize),
    Str(String),
}

struct Scanner<'a> {
    line: &'a str,
    /// Byte position within `line`.
    pos: usize,
    /// Byte offset of the line start within the whole input.
    base: usize,
}

impl<'a> Scanner<'a> {
    fn new(line: &'a str, base: usize) -> Self {
        Scanner { line, pos: 0, base }
    }

    fn offset(&self) -> usize {
        self.base + self.pos
    }

    fn rest(&self) -> &'a str {
        &self.line[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.bump();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err(&self, message: impl Into<String>) -> ParseIssue {
        ParseIssue {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                self.bump();
            }
            _ => return None,
        }
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            self.bump();
        }
        Some(&self.line[start..self.pos])
    }

    fn int(&mut self) -> Result<usize, ParseIssue> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        let digits = &self.line[start..self.pos];
        digits.parse::<usize>().map_err(|_| ParseIssue {
            offset: self.base + start,
            message: format!("integer literal `{digits}` out of range"),
        })
    }

    fn string(&mut self, quote: char) -> Result<String, ParseIssue> {
        let start_offset = self.offset();
        self.bump(); // opening quote
        let mut out = String::new();
        loop {
            match self.bump() {
                None => {
                    return Err(ParseIssue {
                        offset: start_offset,
                        message: "unterminated string literal".to_string(),
                    });
                }
                Some('\\') => match self.bump() {
                    Some('\\') => out.push('\\'),
                    Some('\'') => out.push('\''),
                    Some('"') => out.push('"'),
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some(other) => {
                        return Err(ParseIssue {
                            offset: self.offset().saturating_sub(other.len_utf8()),
                            message: format!("invalid escape sequence `\\{other}`"),
                        });
                    }
                    None => {
                        return Err(ParseIssue {
                            offset: start_offset,
                            message: "unterminated string literal".to_string(),
                        });
                    }
                },
                Some(c) if c == quote => return Ok(out),
                Some(c) => out.push(c),
            }
        }
    }
}

fn parse_call_line(line: &str, base: usize) -> Result<Call, ParseIssue> {
    let mut s = Scanner::new(line, base);
    s.skip_ws();
    let call_offset = s.offset();
    let name = s
        .ident()
        .ok_or_else(|| s.err("expected a function name"))?
        .to_string();
    s.skip_ws();
    if !s.eat('(') {
        return Err(s.err(format!("expected `(` after `{name}`")));
    }

    let mut args = Vec::new();
    let mut seen_keyword = false;
    s.skip_ws();
    if !s.eat(')') {
        loop {
            s.skip_ws();
            let arg_offset = s.offset();

            // Try `keyword=value` first; fall back to a positional value.
            let mut keyword = None;
            let checkpoint = s.pos;
            if let Some(ident) = s.ident() {
                let ident = ident.to_string();
                s.skip_ws();
                if s.eat('=') {
                    keyword = Some(ident);
                    s.skip_ws();
                } else {
                    return Err(ParseIssue {
                        offset: base + checkpoint,
                        message: format!("bare identifier `{ident}` is not a valid argument"),
                    });
                }
            }
            if keyword.is_some() {
                seen_keyword = true;
            } else if seen_keyword {
                return Err(ParseIssue {
                    offset: arg_offset,
                    message: "positional argument follows keyword argument".to_string(),
                });
            }

            let value = match s.peek() {
                Some(c) if c.is_ascii_digit() => Value::Int(s.int()?),
                Some(c @ ('"' | '\'')) => Value::Str(s.string(c)?),
                Some(c) => return Err(s.err(format!("unexpected character `{c}` in argument"))),
                None => return Err(s.err("unexpected end of argument list")),
            };
            args.push(Arg {
                keyword,
                value,
                offset: arg_offset,
            });

            s.skip_ws();
            if s.eat(',') {
                continue;
            }
            if s.eat(')') {
                break;
            }
            return Err(s.err("expected `,` or `)` in argument list"));
        }
    }

    s.skip_ws();
    if let Some(c) = s.peek() {
        if c != '#' {
            return Err(s.err(format!("unexpected trailing characters `{}`", s.rest().trim_end())));
        }
    }

    Ok(Call {
        name,
        args,
        offset: call_offset,
    })
}

fn lower_call(call: &Call, stage: Stage) -> Result<RefinementOp, ParseIssue> {
    let issue = |offset: usize, message: String| ParseIssue { offset, message };
    let require_no_args = |op: RefinementOp| -> Result<RefinementOp, ParseIssue> {
        if call.args.is_empty() {
            Ok(op)
        } else {
            Err(issue(
                call.args[0].offset,
                format!("{}() takes no arguments", call.name),
            ))
        }
    };

    match call.name.as_str() {
        "drop_doc" => match stage {
            Stage::Doc => require_no_args(RefinementOp::DropDoc),
            Stage::Chunk => Err(issue(
                call.offset,
                "drop_doc() is not allowed in a chunk-stage program".to_string(),
            )),
        },
        "keep_doc" => match stage {
            Stage::Doc => require_no_args(RefinementOp::KeepDoc),
            Stage::Chunk => Err(issue(
                call.offset,
                "keep_doc() is not allowed in a chunk-stage program".to_string(),
            )),
        },
        "keep_chunk" => match stage {
            Stage::Chunk => require_no_args(RefinementOp::KeepChunk),
            Stage::Doc => Err(issue(
                call.offset,
                "keep_chunk() is not allowed in a document-stage program".to_string(),
            )),
        },
        // Prompt-era alias for the stage's keep op.
        "untouch_doc" => require_no_args(match stage {
            Stage::Doc => RefinementOp::KeepDoc,
            Stage::Chunk => RefinementOp::KeepChunk,
        }),
        "remove_lines" => {
            if stage == Stage::Doc {
                return Err(issue(
                    call.offset,
                    "remove_lines() is not allowed in a document-stage program".to_string(),
                ));
            }
            let (start, end) = bind_remove_lines(call)?;
            if start > end {
                return Err(issue(
                    call.offset,
                    format!("line_start {start} exceeds line_end {end}"),
                ));
            }
            Ok(RefinementOp::RemoveLines { start, end })
        }
        "normalize" => {
            if stage == Stage::Doc {
                return Err(issue(
                    call.offset,
                    "normalize() is not allowed in a document-stage program".to_string(),
                ));
            }
            let (source, target) = bind_normalize(call)?;
            if source.is_empty() {
                return Err(issue(
                    call.offset,
                    "normalize source_str must be non-empty".to_string(),
                ));
            }
            for (name, value) in [("source_str", &source), ("target_str", &target)] {
                if value.contains('\n') {
                    return Err(issue(
                        call.offset,
                        format!("normalize {name} may not contain a newline"),
                    ));
                }
            }
            Ok(RefinementOp::Normalize { source, target })
        }
        other => Err(issue(call.offset, format!("unknown function `{other}`"))),
    }
}

fn bind_remove_lines(call: &Call) -> Result<(usize, usize), ParseIssue> {
    let mut start: Option<usize> = None;
    let mut end: Option<usize> = None;
    for (pos, arg) in call.args.iter().enumerate() {
        let slot = match arg.keyword.as_deref() {
            Some("line_start") | Some("start") => &mut start,
            Some("line_end") | Some("end") => &mut end,
            Some(other) => {
                return Err(ParseIssue {
                    offset: arg.offset,
                    message: format!("unknown keyword argument `{other}` for remove_lines()"),
                });
            }
            None => match pos {
                0 => &mut start,
                1 => &mut end,
                _ => {
                    return Err(ParseIssue {
                        offset: arg.offset,
                        message: "remove_lines() takes exactly two arguments".to_string(),
                    });
                }
            },
        };
        if slot.is_some() {
            return Err(ParseIssue {
                offset: arg.offset,
                message: "duplicate argument for remove_lines()".to_string(),
            });
        }
        match &arg.value {
            Value::Int(n) => *slot = Some(*n),
            Value::Str(_) => {
                return Err(ParseIssue {
                    offset: arg.offset,
                    message: "remove_lines() arguments must be integers".to_string(),
                });
            }
        }
    }
    match (start, end) {
        (Some(s), Some(e)) => Ok((s, e)),
        _ => Err(ParseIssue {
            offset: call.offset,
            message: "remove_lines() requires both line_start and line_end".to_string(),
        }),
    }
}

fn bind_normalize(call: &Call) -> Result<(String, String), ParseIssue> {
    let mut source: Option<String> = None;
    let mut target: Option<String> = None;
    for (pos, arg) in call.args.iter().enumerate() {
        let slot = match arg.keyword.as_deref() {
            Some("source_str") => &mut source,
            Some("target_str") => &mut target,
            Some(other) => {
                return Err(ParseIssue {
                    offset: arg.offset,
                    message: format!("unknown keyword argument `{other}` for normalize()"),
                });
            }
            None => match pos {
                0 => &mut source,
                1 => &mut target,
                _ => {
                    return Err(ParseIssue {
                        offset: arg.offset,
                        message: "normalize() takes at most two arguments".to_string(),
                    });
                }
            },
        };
        if slot.is_some() {
            return Err(ParseIssue {
                offset: arg.offset,
                message: "duplicate argument for normalize()".to_string(),
            });
        }
        match &arg.value {
            Value::Str(s) => *slot = Some(s.clone()),
            Value::Int(_) => {
                return Err(ParseIssue {
                    offset: arg.offset,
                    message: "normalize() arguments must be strings".to_string(),
                });
            }
        }
    }
    match source {
        // target_str defaults to "" per the provider-facing signature.
        Some(s) => Ok((s, target.unwrap_or_default())),
        None => Err(ParseIssue {
            offset: call.offset,
            message: "normalize() requires source_str".to_string(),
        }),
    }
}

// --- helpers ------------------------------------------------------------

/// Iterate `(line, byte_offset_of_line_start)` without allocating.
fn lines_with_offsets(text: &str) -> impl Iterator<Item = (&str, usize)> {
    let mut offset = 0;
    text.split('\n').map(move |line| {
        let start = offset;
        offset += line.len() + 1;
        (line, start)
    })
}

fn trim_blank_lines(text: &str) -> &str {
    let mut start = 0;
    let mut end = text.len();
    for (line, off) in lines_with_offsets(text) {
        if line.trim().is_empty() {
            start = (off + line.len() + 1).min(text.len());
        } else {
            start = off;
            break;
        }
    }
    if start >= end {
        return "";
    }
    while let Some(idx) = text[start..end].rfind('\n') {
        if text[start + idx + 1..end].trim().is_empty() {
            end = start + idx;
        } else {
            break;
        }
    }
    if text[start..end].trim().is_empty() {
        ""
    } else {
        &text[start..end]
    }
}

fn digits(mut n: usize) -> usize {
    let mut d = 1;
    while n >= 10 {
        n /= 10;
        d += 1;
    }
    d
}
