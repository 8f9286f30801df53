//! Command-line interface: argument definitions and command implementations.
//!
//! Exit codes: 0 success, 1 other failure, 2 missing input, 3 invalid
//! configuration, 4 endpoint failure, 5 unpaired or mismatched documents.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::automaton::SearchStrategy;
use crate::config::{ConfigError, ConstraintMode, FallbackKind, PipelineConfig, RerankerKind, SegmenterKind};
use crate::corpus::{self, CorpusError, LabelsEntry};
use crate::eval::evaluate_corpus;
use crate::pipeline::{FixedLabels, Pipeline};
use crate::segmenter::external::{MockEndpoint, MockMode};
use crate::segmenter::rerank::AgreementReranker;
use crate::segmenter::{
    Autoregressive, ExternalClient, FeatureConfig, FeatureModel, FixedLength, ModelReranker, Projected,
    RerankingSegmenter, RulePunctuation, SegmentError, TrainConfig, TrainError, WindowSegmenter,
};
use crate::transcript::{labels_to_segments, Delimiter, SegmentationLabels, Transcript};
use crate::window::WindowConfig;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_MISSING_INPUT: i32 = 2;
pub const EXIT_INVALID_CONFIG: i32 = 3;
pub const EXIT_ENDPOINT: i32 = 4;
pub const EXIT_UNPAIRED: i32 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(EXIT_INVALID_CONFIG, e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        let code = match &e {
            CorpusError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING_INPUT,
            CorpusError::OutOfRange { .. } | CorpusError::Duplicate { .. } => EXIT_UNPAIRED,
            _ => EXIT_FAILURE,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<SegmentError> for CliError {
    fn from(e: SegmentError) -> Self {
        let code = match &e {
            SegmentError::Endpoint { .. } => EXIT_ENDPOINT,
            SegmentError::InvalidParameter(_) | SegmentError::Window(_) => EXIT_INVALID_CONFIG,
            _ => EXIT_FAILURE,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let code = match &e {
            TrainError::Misaligned { .. } => EXIT_UNPAIRED,
            TrainError::InvalidConfig(_) => EXIT_INVALID_CONFIG,
            _ => EXIT_FAILURE,
        };
        CliError::new(code, e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "longseg", version, about = "Sentence segmentation of long unpunctuated transcripts")]
pub struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment transcripts: one output line per segment plus a labels file.
    Segment(SegmentArgs),
    /// Train a feature model from transcripts and a labels file.
    Train(TrainArgs),
    /// Normalize punctuated text and derive boundary labels from its punctuation.
    DeriveLabels(DeriveArgs),
    /// Project reference punctuation boundaries onto ASR transcripts.
    Oracle(OracleArgs),
    /// Boundary precision/recall/F1 of predicted against reference labels.
    Eval(EvalArgs),
    /// Serve the endpoint protocol locally for testing.
    MockEndpoint(MockArgs),
}

#[derive(Debug, Args, Default)]
pub struct PipelineFlags {
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "window-size")]
    pub window_size: Option<usize>,
    #[arg(long = "window-left")]
    pub window_left: Option<usize>,
    #[arg(long = "window-right")]
    pub window_right: Option<usize>,
    #[arg(long, value_enum)]
    pub segmenter: Option<SegmenterKind>,
    /// Feature model file (autoregressive and rerank segmenters).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub segment_len: Option<usize>,
    #[arg(long)]
    pub abbreviations: Option<PathBuf>,
    /// Labels file replayed by the `labels` segmenter.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub nbest: Option<usize>,
    #[arg(long, value_enum)]
    pub reranker: Option<RerankerKind>,
    #[arg(long)]
    pub reranker_model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub fallback: Option<FallbackKind>,
    #[arg(long, value_enum)]
    pub constraint: Option<ConstraintMode>,
    #[arg(long, value_enum)]
    pub search: Option<SearchKind>,
    #[arg(long)]
    pub beam_width: Option<usize>,
    #[arg(long)]
    pub leading_delimiter: Option<bool>,
    #[arg(long)]
    pub endpoint_url: Option<String>,
    #[arg(long)]
    pub endpoint_timeout_ms: Option<u64>,
    #[arg(long)]
    pub endpoint_retries: Option<usize>,
    #[arg(long)]
    pub endpoint_backoff_ms: Option<u64>,
    #[arg(long)]
    pub endpoint_concurrency: Option<usize>,
    /// Lowercase and strip punctuation from input tokens.
    #[arg(long)]
    pub normalize: Option<bool>,
    #[arg(long)]
    pub delimiter: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchKind {
    Greedy,
    Beam,
    Exact,
}

impl PipelineFlags {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) if !p.exists() => {
                return Err(CliError::new(EXIT_MISSING_INPUT, format!("config file {} not found", p.display())))
            }
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($flag:expr => $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
            ($flag:expr => some $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = Some(v);
                }
            };
        }
        set!(self.window_size => cfg.window.size);
        set!(self.window_left => cfg.window.left);
        set!(self.window_right => cfg.window.right);
        set!(self.segmenter => cfg.segmenter.kind);
        set!(self.model => some cfg.segmenter.model);
        set!(self.segment_len => cfg.segmenter.segment_len);
        set!(self.abbreviations => some cfg.segmenter.abbreviations);
        set!(self.labels => some cfg.segmenter.labels);
        set!(self.nbest => cfg.segmenter.nbest);
        set!(self.reranker => cfg.segmenter.reranker);
        set!(self.reranker_model => some cfg.segmenter.reranker_model);
        set!(self.fallback => cfg.segmenter.fallback);
        set!(self.constraint => cfg.constraint);
        set!(self.leading_delimiter => cfg.leading_delimiter);
        set!(self.endpoint_url => cfg.endpoint.url);
        set!(self.endpoint_timeout_ms => cfg.endpoint.timeout_ms);
        set!(self.endpoint_retries => cfg.endpoint.retries);
        set!(self.endpoint_backoff_ms => cfg.endpoint.backoff_ms);
        set!(self.endpoint_concurrency => cfg.endpoint.concurrency);
        set!(self.normalize => cfg.normalize);
        set!(self.delimiter => cfg.delimiter);
        set!(self.workers => cfg.workers);
        set!(self.seed => cfg.seed);
        let width = self.beam_width.or(match cfg.search {
            SearchStrategy::Beam(k) => Some(k),
            _ => None,
        });
        match (self.search, width) {
            (Some(SearchKind::Greedy), _) => cfg.search = SearchStrategy::Greedy,
            (Some(SearchKind::Exact), _) => cfg.search = SearchStrategy::Exact,
            (Some(SearchKind::Beam), w) => cfg.search = SearchStrategy::Beam(w.unwrap_or(4)),
            (None, Some(w)) => cfg.search = SearchStrategy::Beam(w),
            (None, None) => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub pipeline: PipelineFlags,
    /// Write `<id>.seg.txt` and `<id>.labels.tsv` here instead of printing
    /// segments to stdout.
    #[arg(long, short)]
    pub output_dir: Option<PathBuf>,
    /// Labels file for all documents (stdout mode).
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    /// Transcript files or directories of `*.txt` files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labels file with one line per training document.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Continue training from this model; its feature settings are kept.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub step_size: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Feature space size is 2^hash_bits.
    #[arg(long, default_value_t = 20)]
    pub hash_bits: u32,
    #[arg(long, value_delimiter = ',', default_values_t = vec![2, 3, 4])]
    pub ngram_orders: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub context_radius: usize,
    #[arg(long, default_value_t = 4)]
    pub history: usize,
    /// Mini-batch size; batches are computed in parallel.
    #[arg(long, default_value_t = 1)]
    pub batch_size: usize,
    /// Train on whole documents instead of windows.
    #[arg(long)]
    pub no_windows: bool,
    #[arg(long, default_value_t = 40)]
    pub window_size: usize,
    #[arg(long, default_value_t = 5)]
    pub window_left: usize,
    #[arg(long, default_value_t = 5)]
    pub window_right: usize,
    #[arg(long)]
    pub normalize: bool,
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeriveArgs {
    /// Receives normalized `<id>.txt` files and `labels.tsv`.
    #[arg(long, short)]
    pub output_dir: PathBuf,
    #[arg(long)]
    pub abbreviations: Option<PathBuf>,
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Punctuated reference transcripts.
    #[arg(long, required = true, num_args = 1..)]
    pub reference: Vec<PathBuf>,
    /// ASR transcripts, paired with references by file stem.
    #[arg(long, required = true, num_args = 1..)]
    pub asr: Vec<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long)]
    pub abbreviations: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub predicted: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    pub format: ReportFormat,
    /// Transcripts giving each document's token count; without them the
    /// length is inferred from the largest boundary.
    #[arg(long, num_args = 1..)]
    pub transcripts: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MockKind {
    Echo,
    Rule,
    Corrupt,
    Garbage,
    FailFirst,
    Down,
}

#[derive(Debug, Args)]
pub struct MockArgs {
    #[arg(long, default_value = "127.0.0.1:8088")]
    pub bind: String,
    #[arg(long, value_enum, default_value = "rule")]
    pub mode: MockKind,
    /// Words followed by a delimiter in rule and corrupt modes.
    #[arg(long, value_delimiter = ',', default_values_t = vec!["stop".to_string()])]
    pub triggers: Vec<String>,
    /// Corruption rate per token.
    #[arg(long, default_value_t = 0.1)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Requests failed before recovering in fail-first mode.
    #[arg(long, default_value_t = 1)]
    pub fail_count: usize,
    #[arg(long, default_value = crate::transcript::DEFAULT_DELIMITER)]
    pub delimiter: String,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Segment(a) => cmd_segment(&a),
        Command::Train(a) => cmd_train(&a),
        Command::DeriveLabels(a) => cmd_derive_labels(&a),
        Command::Oracle(a) => cmd_oracle(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::MockEndpoint(a) => cmd_mock_endpoint(&a),
    }
}

fn require_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    for p in paths {
        if !p.exists() {
            return Err(CliError::new(EXIT_MISSING_INPUT, format!("input {} not found", p.display())));
        }
    }
    Ok(corpus::collect_inputs(paths)?)
}

fn load_model(path: &Path, window: &WindowConfig) -> Result<Arc<FeatureModel>, CliError> {
    let model = FeatureModel::load(path)
        .map_err(|e| CliError::new(EXIT_INVALID_CONFIG, format!("model {}: {e}", path.display())))?;
    let radius = model.config().context_radius;
    if radius > window.left.min(window.right) {
        return Err(CliError::new(
            EXIT_INVALID_CONFIG,
            format!(
                "model {} uses context radius {radius}, more than the window context (left {}, right {})",
                path.display(),
                window.left,
                window.right
            ),
        ));
    }
    Ok(Arc::new(model))
}

fn rules(path: Option<&Path>) -> Result<RulePunctuation, CliError> {
    match path {
        None => Ok(RulePunctuation::default()),
        Some(p) => RulePunctuation::from_file(p)
            .map_err(|e| CliError::new(EXIT_MISSING_INPUT, format!("abbreviations {}: {e}", p.display()))),
    }
}

/// The window segmenter described by `cfg`. `punctuate` and `labels` work
/// per document and are not built here.
pub fn build_window_segmenter(cfg: &PipelineConfig) -> Result<Box<dyn WindowSegmenter>, CliError> {
    let seg = &cfg.segmenter;
    let delimiter = cfg.delimiter()?;
    let autoregressive = || -> Result<Autoregressive, CliError> {
        let path = seg.model.as_deref().ok_or_else(|| CliError::new(EXIT_INVALID_CONFIG, "no model configured"))?;
        Ok(Autoregressive::new(load_model(path, &cfg.window)?, cfg.search).with_leading_delimiter(cfg.leading_delimiter))
    };
    let external = || -> Result<ExternalClient, CliError> {
        Ok(ExternalClient::new(cfg.endpoint.clone(), delimiter.clone())?)
    };
    Ok(match seg.kind {
        SegmenterKind::Fixed => Box::new(FixedLength::new(seg.segment_len)?),
        SegmenterKind::Autoregressive => match cfg.constraint {
            ConstraintMode::Fst => Box::new(autoregressive()?),
            ConstraintMode::Levenshtein => Box::new(Projected::new(autoregressive()?, delimiter)),
        },
        SegmenterKind::External => {
            let client = external()?;
            match seg.fallback {
                FallbackKind::None => Box::new(client),
                FallbackKind::Fixed => Box::new(client.with_fallback(Box::new(FixedLength::new(seg.segment_len)?))),
                FallbackKind::Autoregressive => Box::new(client.with_fallback(Box::new(autoregressive()?))),
            }
        }
        SegmenterKind::Rerank => {
            let generator = autoregressive()?;
            match seg.reranker {
                RerankerKind::Model => {
                    let path = seg
                        .reranker_model
                        .as_deref()
                        .ok_or_else(|| CliError::new(EXIT_INVALID_CONFIG, "no reranker model configured"))?;
                    let reranker = ModelReranker::new(load_model(path, &cfg.window)?);
                    Box::new(RerankingSegmenter::new(generator, reranker, seg.nbest)?)
                }
                RerankerKind::Endpoint => Box::new(RerankingSegmenter::new(
                    generator,
                    AgreementReranker::new(external()?),
                    seg.nbest,
                )?),
            }
        }
        SegmenterKind::Punctuate | SegmenterKind::Labels => {
            return Err(CliError::new(
                EXIT_INVALID_CONFIG,
                format!("segmenter {:?} works on whole documents", seg.kind),
            ))
        }
    })
}

/// Segments every input according to `cfg`, in input order.
pub fn segment_documents(cfg: &PipelineConfig, files: &[PathBuf]) -> Result<Vec<(Transcript, SegmentationLabels)>, CliError> {
    let delimiter = cfg.delimiter()?;
    if cfg.segmenter.kind == SegmenterKind::Punctuate {
        let rules = rules(cfg.segmenter.abbreviations.as_deref())?;
        return files
            .iter()
            .map(|f| {
                let text = std::fs::read_to_string(f).map_err(|source| CorpusError::Io {
                    path: f.clone(),
                    source,
                })?;
                Ok(rules.derive_labels(&corpus::source_id_of(f), &text))
            })
            .collect();
    }
    let docs = files
        .iter()
        .map(|f| corpus::read_transcript(f, cfg.normalize, &delimiter))
        .collect::<Result<Vec<_>, _>>()?;
    let pipeline = Pipeline::new(cfg.window, cfg.workers)?;
    let labels = if cfg.segmenter.kind == SegmenterKind::Labels {
        let path = cfg.segmenter.labels.as_deref().expect("validated");
        let entries: HashMap<String, LabelsEntry> = corpus::read_labels(path)?
            .into_iter()
            .map(|e| (e.source_id.clone(), e))
            .collect();
        let mut out = Vec::with_capacity(docs.len());
        for d in &docs {
            let entry = entries.get(d.source_id()).ok_or_else(|| {
                CliError::new(EXIT_UNPAIRED, format!("no labels for document {:?} in {}", d.source_id(), path.display()))
            })?;
            let fixed = FixedLabels::new(entry.to_labels(d.len())?);
            out.push(pipeline.segment(d.tokens(), &fixed)?);
        }
        out
    } else {
        let segmenter = build_window_segmenter(cfg)?;
        pipeline.segment_corpus(&docs, segmenter.as_ref())?
    };
    Ok(docs.into_iter().zip(labels).collect())
}

pub fn render_segments(t: &Transcript, labels: &SegmentationLabels) -> String {
    let mut out = String::new();
    for s in labels_to_segments(labels) {
        out.push_str(&t.tokens()[s.start..s.end].join(" "));
        out.push('\n');
    }
    out
}

fn cmd_segment(a: &SegmentArgs) -> Result<(), CliError> {
    let files = require_inputs(&a.inputs)?;
    let cfg = a.pipeline.resolve()?;
    log::info!("config:\n{}", cfg.to_toml());
    let results = segment_documents(&cfg, &files)?;
    match &a.output_dir {
        Some(dir) => {
            for (t, l) in &results {
                corpus::write_file(&dir.join(format!("{}.seg.txt", t.source_id())), &render_segments(t, l))?;
                corpus::write_file(
                    &dir.join(format!("{}.labels.tsv", t.source_id())),
                    &corpus::format_labels([(t.source_id(), l)]),
                )?;
            }
        }
        None => {
            let text: String = results.iter().map(|(t, l)| render_segments(t, l)).collect();
            print!("{text}");
        }
    }
    if let Some(path) = &a.labels_out {
        corpus::write_file(path, &corpus::format_labels(results.iter().map(|(t, l)| (t.source_id(), l))))?;
    }
    Ok(())
}

/// Pairs transcripts with labels entries by source id.
fn paired_corpus(
    files: &[PathBuf],
    labels_path: &Path,
    normalize: bool,
) -> Result<Vec<(Transcript, SegmentationLabels)>, CliError> {
    let entries: HashMap<String, LabelsEntry> = corpus::read_labels(labels_path)?
        .into_iter()
        .map(|e| (e.source_id.clone(), e))
        .collect();
    let mut corpus_out = Vec::new();
    let mut unpaired = Vec::new();
    for f in files {
        let t = corpus::read_transcript(f, normalize, &Delimiter::default())?;
        match entries.get(t.source_id()) {
            Some(e) => {
                let l = e.to_labels(t.len())?;
                corpus_out.push((t, l));
            }
            None => unpaired.push(t.source_id().to_string()),
        }
    }
    if !unpaired.is_empty() {
        return Err(CliError::new(
            EXIT_UNPAIRED,
            format!("no labels for documents: {}", unpaired.join(", ")),
        ));
    }
    Ok(corpus_out)
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let files = require_inputs(&a.inputs)?;
    if !a.labels.exists() {
        return Err(CliError::new(EXIT_MISSING_INPUT, format!("labels {} not found", a.labels.display())));
    }
    let windows = if a.no_windows {
        None
    } else {
        Some(
            WindowConfig::new(a.window_size, a.window_left, a.window_right)
                .map_err(|e| CliError::new(EXIT_INVALID_CONFIG, e.to_string()))?,
        )
    };
    if a.hash_bits == 0 || a.hash_bits > 32 {
        return Err(CliError::new(EXIT_INVALID_CONFIG, "hash bits must be in 1..=32"));
    }
    let data = paired_corpus(&files, &a.labels, a.normalize)?;
    let train_cfg = TrainConfig {
        epochs: a.epochs,
        step_size: a.step_size,
        seed: a.seed,
        batch_size: a.batch_size,
        windows,
    };
    let (model, report) = match &a.warm_start {
        Some(p) => FeatureModel::load(p)
            .map_err(|e| CliError::new(EXIT_INVALID_CONFIG, format!("warm-start model {}: {e}", p.display())))?
            .fine_tune(&data, &train_cfg)?,
        None => {
            let features = FeatureConfig {
                hash_dims: 1usize << a.hash_bits,
                ngram_orders: a.ngram_orders.clone(),
                context_radius: a.context_radius,
                history: a.history,
                salt: a.seed,
            };
            FeatureModel::train(&data, features, &train_cfg)?
        }
    };
    for (i, loss) in report.epoch_losses.iter().enumerate() {
        println!("epoch {} loss {loss:.6}", i + 1);
    }
    model
        .save(&a.output)
        .map_err(|e| CliError::new(EXIT_FAILURE, format!("writing {}: {e}", a.output.display())))?;
    println!("wrote {} ({} training examples)", a.output.display(), report.examples);
    Ok(())
}

fn cmd_derive_labels(a: &DeriveArgs) -> Result<(), CliError> {
    let files = require_inputs(&a.inputs)?;
    let rules = rules(a.abbreviations.as_deref())?;
    let mut docs = Vec::new();
    for f in &files {
        let text = std::fs::read_to_string(f).map_err(|source| CorpusError::Io {
            path: f.clone(),
            source,
        })?;
        let (t, l) = rules.derive_labels(&corpus::source_id_of(f), &text);
        corpus::write_file(&a.output_dir.join(format!("{}.txt", t.source_id())), &format!("{}\n", t.text()))?;
        docs.push((t, l));
    }
    corpus::write_file(
        &a.output_dir.join("labels.tsv"),
        &corpus::format_labels(docs.iter().map(|(t, l)| (t.source_id(), l))),
    )?;
    Ok(())
}

fn cmd_oracle(a: &OracleArgs) -> Result<(), CliError> {
    let refs = require_inputs(&a.reference)?;
    let asr = require_inputs(&a.asr)?;
    let rules = rules(a.abbreviations.as_deref())?;
    let by_id: BTreeMap<String, PathBuf> = refs.iter().map(|p| (corpus::source_id_of(p), p.clone())).collect();
    let asr_ids: BTreeMap<String, PathBuf> = asr.iter().map(|p| (corpus::source_id_of(p), p.clone())).collect();
    let mut unpaired: Vec<String> = by_id
        .keys()
        .filter(|k| !asr_ids.contains_key(*k))
        .map(|k| format!("{k} (reference only)"))
        .collect();
    unpaired.extend(asr_ids.keys().filter(|k| !by_id.contains_key(*k)).map(|k| format!("{k} (asr only)")));
    let mut out = Vec::new();
    for (id, asr_path) in &asr_ids {
        let Some(ref_path) = by_id.get(id) else { continue };
        let reference = std::fs::read_to_string(ref_path).map_err(|source| CorpusError::Io {
            path: ref_path.clone(),
            source,
        })?;
        let asr_t = corpus::read_transcript(asr_path, true, &Delimiter::default())?;
        let labels = crate::align::project_oracle(&rules, &reference, &asr_t);
        out.push((id.clone(), labels));
    }
    corpus::write_file(&a.output, &corpus::format_labels(out.iter().map(|(id, l)| (id.as_str(), l))))?;
    if !unpaired.is_empty() {
        return Err(CliError::new(EXIT_UNPAIRED, format!("unpaired documents: {}", unpaired.join(", "))));
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    for p in [&a.predicted, &a.reference] {
        if !p.exists() {
            return Err(CliError::new(EXIT_MISSING_INPUT, format!("{} not found", p.display())));
        }
    }
    let predicted = corpus::read_labels(&a.predicted)?;
    let reference: HashMap<String, LabelsEntry> = corpus::read_labels(&a.reference)?
        .into_iter()
        .map(|e| (e.source_id.clone(), e))
        .collect();
    let lengths: HashMap<String, usize> = if a.transcripts.is_empty() {
        HashMap::new()
    } else {
        require_inputs(&a.transcripts)?
            .iter()
            .map(|f| corpus::read_transcript(f, false, &Delimiter::default()).map(|t| (t.source_id().to_string(), t.len())))
            .collect::<Result<_, _>>()?
    };
    let mut unpaired: Vec<String> = predicted
        .iter()
        .filter(|p| !reference.contains_key(&p.source_id))
        .map(|p| format!("{} (predicted only)", p.source_id))
        .collect();
    let predicted_ids: std::collections::HashSet<&str> = predicted.iter().map(|p| p.source_id.as_str()).collect();
    let mut ref_only: Vec<String> = reference
        .keys()
        .filter(|k| !predicted_ids.contains(k.as_str()))
        .map(|k| format!("{k} (reference only)"))
        .collect();
    ref_only.sort();
    unpaired.extend(ref_only);
    if !unpaired.is_empty() {
        return Err(CliError::new(EXIT_UNPAIRED, format!("unpaired documents: {}", unpaired.join(", "))));
    }
    let mut pairs = Vec::with_capacity(predicted.len());
    for p in &predicted {
        let r = &reference[&p.source_id];
        let n = match lengths.get(&p.source_id) {
            Some(&n) => n,
            None if lengths.is_empty() => p.min_len().max(r.min_len()),
            None => {
                return Err(CliError::new(
                    EXIT_UNPAIRED,
                    format!("no transcript for document {:?}", p.source_id),
                ))
            }
        };
        pairs.push((p.source_id.clone(), p.to_labels(n)?, r.to_labels(n)?));
    }
    let triples: Vec<(&str, &SegmentationLabels, &SegmentationLabels)> =
        pairs.iter().map(|(id, p, r)| (id.as_str(), p, r)).collect();
    let report = evaluate_corpus(&triples).map_err(|e| CliError::new(EXIT_UNPAIRED, e.to_string()))?;
    match a.format {
        ReportFormat::Table => print!("{}", report.to_table()),
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    Ok(())
}

fn cmd_mock_endpoint(a: &MockArgs) -> Result<(), CliError> {
    let delimiter = Delimiter::new(a.delimiter.clone()).map_err(|e| CliError::new(EXIT_INVALID_CONFIG, e.to_string()))?;
    let mode = match a.mode {
        MockKind::Echo => MockMode::Echo,
        MockKind::Rule => MockMode::Rule {
            triggers: a.triggers.clone(),
        },
        MockKind::Corrupt => MockMode::Corrupt {
            triggers: a.triggers.clone(),
            rate: a.rate,
            seed: a.seed,
        },
        MockKind::Garbage => MockMode::Garbage { seed: a.seed },
        MockKind::FailFirst => MockMode::FailFirst(a.fail_count),
        MockKind::Down => MockMode::Down,
    };
    let server = MockEndpoint::start(&a.bind, mode, delimiter)
        .map_err(|e| CliError::new(EXIT_FAILURE, format!("cannot bind {}: {e}", a.bind)))?;
    println!("listening on {}", server.url());
    server.join();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("c.toml");
        std::fs::write(&cfg_path, "[window]\nsize = 20\nleft = 3\n[segmenter]\nkind = \"fixed\"\nsegment_len = 9\n").unwrap();
        let flags = PipelineFlags {
            config: Some(cfg_path),
            window_left: Some(2),
            segment_len: Some(4),
            ..PipelineFlags::default()
        };
        let cfg = flags.resolve().unwrap();
        assert_eq!(cfg.window, WindowConfig { size: 20, left: 2, right: 5 });
        assert_eq!(cfg.segmenter.segment_len, 4);
        assert_eq!(cfg.search, SearchStrategy::Beam(4));
    }

    #[test]
    fn beam_width_flag() {
        let flags = PipelineFlags {
            segmenter: Some(SegmenterKind::Fixed),
            beam_width: Some(100),
            ..PipelineFlags::default()
        };
        assert_eq!(flags.resolve().unwrap().search, SearchStrategy::Beam(100));
        let flags = PipelineFlags {
            segmenter: Some(SegmenterKind::Fixed),
            search: Some(SearchKind::Exact),
            ..PipelineFlags::default()
        };
        assert_eq!(flags.resolve().unwrap().search, SearchStrategy::Exact);
    }

    #[test]
    fn invalid_config_exit_code() {
        let flags = PipelineFlags {
            segmenter: Some(SegmenterKind::External),
            ..PipelineFlags::default()
        };
        assert_eq!(flags.resolve().unwrap_err().code, EXIT_INVALID_CONFIG);
    }
}
