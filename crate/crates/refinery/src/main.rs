use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use refinery::chunker::{count_words, split_into_chunks};
use refinery::flops::{
    equivalent_train_tokens, overhead_breakdown, parse_count, refining_overhead_flops_with_decode,
    train_flops,
};
use refinery::metrics::{
    doc_f1, length_histogram, noisy_line_set, retention_ratio, write_histogram_csv,
    LineF1Aggregator,
};
use refinery::noiseforge::{
    expected_retention, generate_corpus, to_clean_records, to_corpus_records, to_sidecar_records,
    LengthParams, NoiseSpec,
};
use refinery::pipeline::records::{read_jsonl, write_jsonl, CorpusRecord, SidecarRecord};
use refinery::pipeline::{build_provider, shard_and_run, PipelineConfig, StageSelection};
use refinery::program_dsl::{
    extract_fenced_code, parse_program, serialize_program, RefinementOp, Stage,
};
use refinery::scoring::{filter_decision, parse_edu_score, parse_format_score, QualityScores};

#[derive(Parser)]
#[command(
    name = "refinery",
    version,
    about = "Program-driven two-stage corpus refinement for pre-training data"
)]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run the document-level refining stage over a corpus.
    RefineDoc(RefineArgs),
    /// Run the chunk-level refining stage over a corpus.
    RefineChunk(RefineArgs),
    /// Split documents into word-bounded chunks and dump them as JSONL.
    Chunk {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = refinery::chunker::DEFAULT_WINDOW)]
        window: usize,
        /// Output path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Parse program text and print the canonical form or diagnostics.
    Parse {
        #[arg(long, value_parser = parse_stage)]
        stage: Stage,
        /// Program text; read from --input or stdin when omitted.
        text: Option<String>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Validate corpus records and/or sidecar programs.
    Validate {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Parse critique scores and apply the document filtering criteria.
    ScoreFilter(ScoreFilterArgs),
    /// Evaluation metrics over prediction and gold files.
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Compute-overhead accounting for two-stage refinement.
    Flops(FlopsArgs),
    /// Generate a synthetic noisy corpus with gold programs.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RefineArgs {
    /// Input corpus (JSONL records with id and text).
    #[arg(long)]
    input: PathBuf,
    /// Directory receiving per-shard output files.
    #[arg(long)]
    output: PathBuf,
    /// Flat `key = value` config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Provider kind: sidecar, command, or http.
    #[arg(long)]
    provider: Option<String>,
    /// Sidecar path, command line, or URL, depending on --provider.
    #[arg(long)]
    provider_endpoint: Option<String>,
    /// Recorded-response cache file for deterministic replay.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    shards: Option<usize>,
    /// Chunk window in words (chunk stage).
    #[arg(long)]
    window: Option<usize>,
    /// Removal-ratio threshold in [0, 1].
    #[arg(long)]
    tau: Option<f64>,
    /// keep-original, drop-chunk, or error.
    #[arg(long)]
    on_over_threshold: Option<String>,
    /// reject or clamp.
    #[arg(long)]
    out_of_range: Option<String>,
    /// keep, drop, or fail.
    #[arg(long)]
    on_error: Option<String>,
    /// Directory receiving per-shard audit files.
    #[arg(long)]
    audit_out: Option<PathBuf>,
    /// Directory receiving merged statistics.
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreFilterArgs {
    /// JSONL records {id, edu_critique, format_critique}.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Decide directly from numeric scores instead of critique text.
    #[arg(long)]
    edu: Option<u8>,
    #[arg(long)]
    format: Option<u8>,
}

#[derive(Subcommand)]
enum MetricsCommand {
    /// Doc-level keep/drop F1 between prediction and gold sidecars.
    DocF1 {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
    /// Line-wise chunk F1 between prediction and gold sidecars.
    ChunkF1 {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Corpus the programs refer to (for chunk layout).
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = refinery::chunker::DEFAULT_WINDOW)]
        window: usize,
    },
    /// Token retention ratio from counts or corpus files.
    Retention {
        /// Token count, e.g. 62.5e9.
        #[arg(long)]
        before: Option<String>,
        #[arg(long)]
        after: Option<String>,
        #[arg(long)]
        before_corpus: Option<PathBuf>,
        #[arg(long)]
        after_corpus: Option<PathBuf>,
    },
    /// Token-length histogram of a corpus as CSV.
    Histogram {
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated ascending bucket edges.
        #[arg(long, default_value = "0,50,100,200,500,1000,2000,5000,10000")]
        edges: String,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FlopsArgs {
    /// Refining model non-embedding parameters.
    #[arg(long)]
    n_refine: String,
    /// Raw corpus tokens entering the doc stage.
    #[arg(long)]
    d_raw: String,
    /// Tokens surviving the doc stage.
    #[arg(long)]
    d_doc: String,
    /// Decode tokens per stage; 0 models decode as negligible.
    #[arg(long, default_value = "0")]
    d_decode_doc: String,
    #[arg(long, default_value = "0")]
    d_decode_chunk: String,
    /// Model sizes for train-token equivalents, as NAME=PARAMS.
    #[arg(long = "model", value_name = "NAME=PARAMS")]
    models: Vec<String>,
    /// Also print 6ND training FLOPs of each --model for this many tokens.
    #[arg(long)]
    d_train: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    docs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_corpus: PathBuf,
    #[arg(long)]
    out_gold: PathBuf,
    /// Also write the clean reference corpus.
    #[arg(long)]
    out_clean: Option<PathBuf>,
    #[arg(long, default_value_t = 0.7)]
    nav_prob: f64,
    #[arg(long, default_value_t = 0.5)]
    url_prob: f64,
    #[arg(long, default_value_t = 0.7)]
    footer_prob: f64,
    #[arg(long, default_value_t = 0.1)]
    pure_noise_prob: f64,
    #[arg(long, default_value_t = 10)]
    min_lines: usize,
    #[arg(long, default_value_t = 20)]
    max_lines: usize,
    #[arg(long, default_value_t = 10)]
    words: usize,
    #[arg(long, default_value_t = refinery::chunker::DEFAULT_WINDOW)]
    window: usize,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    match s {
        "doc" => Ok(Stage::Doc),
        "chunk" => Ok(Stage::Chunk),
        other => Err(format!("unknown stage `{other}` (doc|chunk)")),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match cli.command {
        Commands::RefineDoc(args) => run_refine(args, StageSelection::Doc),
        Commands::RefineChunk(args) => run_refine(args, StageSelection::Chunk),
        Commands::Chunk {
            input,
            window,
            output,
        } => run_chunk_dump(&input, window, output.as_deref()),
        Commands::Parse { stage, text, input } => run_parse(stage, text, input.as_deref()),
        Commands::Validate { corpus, sidecar } => run_validate(corpus.as_deref(), sidecar.as_deref()),
        Commands::ScoreFilter(args) => run_score_filter(args),
        Commands::Metrics(command) => run_metrics(command),
        Commands::Flops(args) => run_flops(args),
        Commands::Synth(args) => run_synth(args),
    }
}

impl RefineArgs {
    fn build_config(&self, stage: StageSelection) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::default();
        if let Some(path) = &self.config {
            config.apply_file(path)?;
        }
        config.stage = stage;
        if let Some(v) = &self.provider {
            config.apply_kv("provider", v)?;
        }
        if let Some(v) = &self.provider_endpoint {
            config.provider_endpoint = Some(v.clone());
        }
        if let Some(v) = &self.cache {
            config.cache_path = Some(v.clone());
        }
        if let Some(v) = self.shards {
            config.shard_count = v;
        }
        if let Some(v) = self.window {
            config.window = v;
        }
        if let Some(v) = self.tau {
            config.policy.removal_ratio_threshold = v;
        }
        if let Some(v) = &self.on_over_threshold {
            config.apply_kv("on_over_threshold", v)?;
        }
        if let Some(v) = &self.out_of_range {
            config.apply_kv("out_of_range", v)?;
        }
        if let Some(v) = &self.on_error {
            config.apply_kv("on_error", v)?;
        }
        if let Some(v) = &self.audit_out {
            config.audit_out = Some(v.clone());
        }
        if let Some(v) = &self.stats_out {
            config.stats_out = Some(v.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

fn run_refine(args: RefineArgs, stage: StageSelection) -> Result<()> {
    let config = args.build_config(stage)?;
    let provider = build_provider(&config)?;
    let summary = shard_and_run(&args.input, &args.output, provider, &config)
        .context("pipeline run failed")?;

    for stats in &summary.stats {
        let retention = stats
            .retention()
            .map(|r| format!("{:.4}", r))
            .unwrap_or_else(|| "n/a".to_string());
        println!(
            "{} stage: {} in, {} kept, {} errored, tokens {} -> {} (retention {retention})",
            stats.stage,
            stats.docs_in,
            stats.docs_kept,
            stats.docs_errored,
            stats.tokens_before,
            stats.tokens_after,
        );
    }
    println!(
        "wrote {} output shard(s) under {}",
        summary.output_files.len(),
        args.output.display()
    );
    if !summary.failed_shards.is_empty() {
        for (index, message) in &summary.failed_shards {
            eprintln!("shard {index} failed: {message}");
        }
        bail!(
            "{} of {} shards failed",
            summary.failed_shards.len(),
            summary.shard_count
        );
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ChunkDumpRecord {
    doc_id: String,
    index: usize,
    base_line: usize,
    word_count: usize,
    skipped: bool,
    lines: Vec<String>,
}

fn run_chunk_dump(input: &std::path::Path, window: usize, output: Option<&std::path::Path>) -> Result<()> {
    let records: Vec<CorpusRecord> = read_jsonl(input)?;
    let mut dump = Vec::new();
    for record in &records {
        let chunks = split_into_chunks(&record.to_document(), window)?;
        for chunk in chunks {
            dump.push(ChunkDumpRecord {
                doc_id: chunk.doc_id,
                index: chunk.index,
                base_line: chunk.base_line,
                word_count: chunk.word_count,
                skipped: chunk.skipped,
                lines: chunk.lines,
            });
        }
    }
    match output {
        Some(path) => write_jsonl(path, &dump)?,
        None => {
            for item in &dump {
                println!("{}", serde_json::to_string(item)?);
            }
        }
    }
    eprintln!("{} chunks from {} records", dump.len(), records.len());
    Ok(())
}

fn run_parse(stage: Stage, text: Option<String>, input: Option<&std::path::Path>) -> Result<()> {
    let raw = match (text, input) {
        (Some(t), None) => t,
        (None, Some(path)) => std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?,
        (None, None) => {
            let mut buffer = String::new();
            std::io::stdin().read_to_string(&mut buffer)?;
            buffer
        }
        (Some(_), Some(_)) => bail!("pass program text either inline or via --input, not both"),
    };
    let code = match extract_fenced_code(&raw) {
        Ok(code) => code,
        Err(issue) => {
            eprintln!("error: {issue}");
            std::process::exit(1);
        }
    };
    match parse_program(&code, stage) {
        Ok(parsed) => {
            for warning in &parsed.warnings {
                eprintln!("warning: {warning}");
            }
            println!("{}", serialize_program(&parsed.program));
            Ok(())
        }
        Err(diagnostics) => {
            eprintln!("{diagnostics}");
            std::process::exit(1);
        }
    }
}

fn run_validate(corpus: Option<&std::path::Path>, sidecar: Option<&std::path::Path>) -> Result<()> {
    if corpus.is_none() && sidecar.is_none() {
        bail!("pass --corpus and/or --sidecar");
    }
    let mut problems = 0usize;

    if let Some(path) = corpus {
        let records: Vec<CorpusRecord> = read_jsonl(path)?;
        let mut seen = BTreeSet::new();
        for record in &records {
            if record.id.is_empty() {
                eprintln!("corpus: empty id");
                problems += 1;
            }
            if !seen.insert(record.id.as_str()) {
                eprintln!("corpus: duplicate id `{}`", record.id);
                problems += 1;
            }
        }
        println!("corpus: {} records, {} unique ids", records.len(), seen.len());
    }

    if let Some(path) = sidecar {
        let records: Vec<SidecarRecord> = read_jsonl(path)?;
        let mut parsed_ok = 0usize;
        for record in &records {
            match parse_program(&record.program, record.stage) {
                Ok(_) => parsed_ok += 1,
                Err(diagnostics) => {
                    let place = match record.chunk_index {
                        Some(i) => format!("{} (chunk {i})", record.id),
                        None => record.id.clone(),
                    };
                    for error in &diagnostics.errors {
                        eprintln!("sidecar {place}: {error}");
                    }
                    problems += diagnostics.errors.len();
                }
            }
        }
        println!("sidecar: {} programs, {} valid", records.len(), parsed_ok);
    }

    if problems > 0 {
        bail!("{problems} problem(s) found");
    }
    Ok(())
}

#[derive(Deserialize)]
struct CritiqueRecord {
    id: String,
    edu_critique: String,
    format_critique: String,
}

#[derive(Serialize)]
struct DecisionRecord {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    edu: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decision: Option<refinery::scoring::FilterDecision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn run_score_filter(args: ScoreFilterArgs) -> Result<()> {
    if let (Some(edu), Some(format)) = (args.edu, args.format) {
        let decision = filter_decision(QualityScores::new(edu, format)?);
        println!("{}", serde_json::to_string(&decision)?);
        return Ok(());
    }
    let input = args
        .input
        .context("pass --input, or both --edu and --format")?;
    let records: Vec<CritiqueRecord> = read_jsonl(&input)?;
    let decisions: Vec<DecisionRecord> = records
        .iter()
        .map(|r| {
            let scores = parse_edu_score(&r.edu_critique).and_then(|edu| {
                parse_format_score(&r.format_critique).map(|format| (edu, format))
            });
            match scores {
                Ok((edu, format)) => DecisionRecord {
                    id: r.id.clone(),
                    edu: Some(edu),
                    format: Some(format),
                    decision: Some(filter_decision(
                        QualityScores::new(edu, format).expect("parsed scores are clamped"),
                    )),
                    error: None,
                },
                Err(e) => DecisionRecord {
                    id: r.id.clone(),
                    edu: None,
                    format: None,
                    decision: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    match &args.output {
        Some(path) => write_jsonl(path, &decisions)?,
        None => {
            for d in &decisions {
                println!("{}", serde_json::to_string(d)?);
            }
        }
    }
    let kept = decisions
        .iter()
        .filter(|d| matches!(d.decision, Some(refinery::scoring::FilterDecision::Keep)))
        .count();
    let errored = decisions.iter().filter(|d| d.error.is_some()).count();
    eprintln!(
        "{} records: {} keep, {} drop, {} errored",
        decisions.len(),
        kept,
        decisions.len() - kept - errored,
        errored
    );
    Ok(())
}

/// Doc-stage keep decision encoded by a sidecar program. Malformed
/// predictions score as keep, matching the pipeline's conservative
/// default; malformed gold is an error.
fn doc_keep_decision(record: &SidecarRecord, is_gold: bool) -> Result<bool> {
    match parse_program(&record.program, Stage::Doc) {
        Ok(parsed) => Ok(matches!(parsed.program.ops[0], RefinementOp::KeepDoc)),
        Err(diagnostics) if is_gold => {
            bail!("gold program for {} is malformed: {diagnostics}", record.id)
        }
        Err(_) => {
            log::warn!("malformed prediction for {}; scoring as keep", record.id);
            Ok(true)
        }
    }
}

fn load_doc_sidecar(path: &std::path::Path, is_gold: bool) -> Result<BTreeMap<String, bool>> {
    let records: Vec<SidecarRecord> = read_jsonl(path)?;
    let mut out = BTreeMap::new();
    for record in records.iter().filter(|r| r.stage == Stage::Doc) {
        out.insert(record.id.clone(), doc_keep_decision(record, is_gold)?);
    }
    Ok(out)
}

fn print_f1(label: &str, report: &refinery::metrics::F1Report) {
    println!(
        "{label}: tp={} fp={} fn={} precision={:.4} recall={:.4} f1={:.4}",
        report.tp, report.fp, report.fn_, report.precision, report.recall, report.f1
    );
}

fn run_metrics(command: MetricsCommand) -> Result<()> {
    match command {
        MetricsCommand::DocF1 { pred, gold } => {
            let pred_map = load_doc_sidecar(&pred, false)?;
            let gold_map = load_doc_sidecar(&gold, true)?;
            let mut predicted = Vec::new();
            let mut actual = Vec::new();
            for (id, gold_keep) in &gold_map {
                match pred_map.get(id) {
                    Some(pred_keep) => {
                        predicted.push(*pred_keep);
                        actual.push(*gold_keep);
                    }
                    None => bail!("prediction file is missing id `{id}`"),
                }
            }
            let report = doc_f1(&predicted, &actual)?;
            print_f1("doc-level", &report);
        }
        MetricsCommand::ChunkF1 {
            pred,
            gold,
            corpus,
            window,
        } => {
            let index = |path: &std::path::Path| -> Result<HashMap<(String, usize), String>> {
                let records: Vec<SidecarRecord> = read_jsonl(path)?;
                Ok(records
                    .into_iter()
                    .filter(|r| r.stage == Stage::Chunk)
                    .filter_map(|r| r.chunk_index.map(|i| ((r.id, i), r.program)))
                    .collect())
            };
            let pred_index = index(&pred)?;
            let gold_index = index(&gold)?;
            let records: Vec<CorpusRecord> = read_jsonl(&corpus)?;

            // Malformed or missing predictions score as "no lines removed"
            // rather than crashing the evaluation.
            let line_set = |programs: &HashMap<(String, usize), String>,
                            id: &str,
                            chunk: usize,
                            line_count: usize|
             -> BTreeSet<usize> {
                programs
                    .get(&(id.to_string(), chunk))
                    .and_then(|text| parse_program(text, Stage::Chunk).ok())
                    .map(|parsed| noisy_line_set(&parsed.program, line_count))
                    .unwrap_or_default()
            };

            let mut aggregator = LineF1Aggregator::default();
            for record in &records {
                let chunks = split_into_chunks(&record.to_document(), window)?;
                for chunk in chunks.iter().filter(|c| !c.skipped) {
                    let predicted =
                        line_set(&pred_index, &record.id, chunk.index, chunk.lines.len());
                    let gold_set =
                        line_set(&gold_index, &record.id, chunk.index, chunk.lines.len());
                    aggregator.add(&predicted, &gold_set);
                }
            }
            print_f1("line-wise micro", &aggregator.micro());
            match aggregator.macro_f1() {
                Some(macro_f1) => println!(
                    "line-wise macro: f1={macro_f1:.4} over {} chunks",
                    aggregator.chunk_count
                ),
                None => println!("line-wise macro: no chunks"),
            }
        }
        MetricsCommand::Retention {
            before,
            after,
            before_corpus,
            after_corpus,
        } => {
            let corpus_tokens = |path: &std::path::Path| -> Result<f64> {
                let records: Vec<CorpusRecord> = read_jsonl(path)?;
                Ok(records.iter().map(|r| count_words(&r.text) as f64).sum())
            };
            let before = match (before, before_corpus) {
                (Some(count), None) => parse_count(&count)? as f64,
                (None, Some(path)) => corpus_tokens(&path)?,
                _ => bail!("pass exactly one of --before or --before-corpus"),
            };
            let after = match (after, after_corpus) {
                (Some(count), None) => parse_count(&count)? as f64,
                (None, Some(path)) => corpus_tokens(&path)?,
                _ => bail!("pass exactly one of --after or --after-corpus"),
            };
            let ratio = retention_ratio(before, after)?;
            println!("tokens_before={before} tokens_after={after} retention={ratio:.6}");
        }
        MetricsCommand::Histogram { corpus, edges, out } => {
            let edges: Vec<u64> = edges
                .split(',')
                .map(|e| e.trim().parse::<u64>().context("bad bucket edge"))
                .collect::<Result<_>>()?;
            let records: Vec<CorpusRecord> = read_jsonl(&corpus)?;
            let counts: Vec<u64> = records.iter().map(|r| count_words(&r.text) as u64).collect();
            let hist = length_histogram(&counts, &edges)?;
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path)?;
                    let mut writer = std::io::BufWriter::new(file);
                    write_histogram_csv(&hist, &mut writer)?;
                }
                None => write_histogram_csv(&hist, std::io::stdout().lock())?,
            }
            if let Some(mean) = hist.mean_tokens() {
                eprintln!("{} documents, mean {mean:.1} tokens", hist.doc_count);
            }
        }
    }
    Ok(())
}

fn run_flops(args: FlopsArgs) -> Result<()> {
    let n_refine = parse_count(&args.n_refine)?;
    let d_raw = parse_count(&args.d_raw)?;
    let d_doc = parse_count(&args.d_doc)?;
    let decode_doc = parse_count(&args.d_decode_doc)?;
    let decode_chunk = parse_count(&args.d_decode_chunk)?;

    let breakdown = overhead_breakdown(n_refine, d_raw, d_doc);
    let total_with_decode =
        refining_overhead_flops_with_decode(n_refine, d_raw, decode_doc, d_doc, decode_chunk);

    println!("refining overhead (n_refine = {n_refine}):");
    println!("  {:<22} {:>12.4e}", "doc stage", breakdown.doc_stage as f64);
    println!("  {:<22} {:>12.4e}", "chunk stage", breakdown.chunk_stage as f64);
    println!("  {:<22} {:>12.4e}", "total", breakdown.total as f64);
    if decode_doc > 0 || decode_chunk > 0 {
        println!("  {:<22} {:>12.4e}", "total with decode", total_with_decode as f64);
    }

    let mut models = Vec::new();
    for spec in &args.models {
        let (name, params) = spec
            .split_once('=')
            .with_context(|| format!("--model expects NAME=PARAMS, got `{spec}`"))?;
        models.push((name.to_string(), parse_count(params)?));
    }
    if !models.is_empty() {
        println!("\ntrain-token equivalents of the total overhead:");
        for (name, params) in &models {
            let tokens = equivalent_train_tokens(breakdown.total, *params)?;
            println!("  {:<12} {:>14} params {:>12.4e} tokens", name, params, tokens);
        }
        if let Some(d_train) = &args.d_train {
            let d_train = parse_count(d_train)?;
            println!("\ntraining FLOPs for {d_train} tokens:");
            for (name, params) in &models {
                println!(
                    "  {:<12} {:>12.4e}",
                    name,
                    train_flops(*params, d_train) as f64
                );
            }
        }
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let spec = NoiseSpec {
        nav_probability: args.nav_prob,
        url_probability: args.url_prob,
        footer_probability: args.footer_prob,
        pure_noise_probability: args.pure_noise_prob,
        seed: args.seed,
        window: args.window,
        ..NoiseSpec::default()
    };
    let params = LengthParams {
        min_lines: args.min_lines,
        max_lines: args.max_lines,
        words_per_line: args.words,
    };
    let corpus = generate_corpus(&spec, &params, args.docs)?;
    write_jsonl(&args.out_corpus, &to_corpus_records(&corpus))?;
    write_jsonl(&args.out_gold, &to_sidecar_records(&corpus))?;
    if let Some(path) = &args.out_clean {
        write_jsonl(path, &to_clean_records(&corpus))?;
    }
    let pure = corpus.iter().filter(|d| d.clean_lines.is_none()).count();
    println!(
        "{} documents ({} pure noise), expected word retention {:.4}",
        corpus.len(),
        pure,
        expected_retention(&spec, &params)
    );
    Ok(())
}
