//! Command-line front end.
//!
//! Every command resolves an [`EngineConfig`] the same way: defaults, then the
//! file named by `--config` (or `HOPCHAIN_CONFIG`), then `--preset` (replaces
//! the pipeline section), then individual overrides. Path flags fall back to
//! the config's `[paths]` table and are not part of the config digest, so runs
//! in different directories stay byte-comparable.
//!
//! Failures print one line, `error:<category>: <message>`, to stderr and exit
//! with the category's code (see [`ExitCode`]).

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::chain_builder::{
    load_predictions, merge_candidates, predictions_to_jsonl, semantic_chains, syntactic_chains, Predictions,
};
use crate::config::{EngineConfig, Preset, Violation, CONFIG_ENV};
use crate::corpus::{load_questions, Corpus, QaPair, QuestionRecord, Tokenizer};
use crate::dense_index::{load_embeddings, DenseIndex, Embedding};
use crate::error::Error;
use crate::eval::{compare_runs, gold_from_records, gold_retrieval_rate, EvalReport};
use crate::io;
use crate::lexical_index::{build_index, InvertedIndex};
use crate::reencoder::{train, ChainTriple, ReEncoderModel};
use crate::reranker::{baseline_scores, build_rerank_dataset, rerank, ScoreTable};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Internal = 1,
    Usage = 2,
    Config = 3,
    Io = 4,
    Data = 5,
    Training = 6,
}

impl ExitCode {
    pub fn category(self) -> &'static str {
        match self {
            ExitCode::Ok => "ok",
            ExitCode::Internal => "internal",
            ExitCode::Usage => "usage",
            ExitCode::Config => "config",
            ExitCode::Io => "io",
            ExitCode::Data => "data",
            ExitCode::Training => "training",
        }
    }
}

#[derive(Debug)]
struct Failure {
    code: ExitCode,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: ExitCode::Config,
            message: message.into(),
        }
    }

    fn missing(field: &str, flag: &str) -> Self {
        Failure::config(
            Violation {
                field: format!("paths.{field}"),
                message: format!("required; pass {flag} or set it in the config file"),
            }
            .to_string(),
        )
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } => ExitCode::Io,
            Error::Config(_) | Error::UnknownPreset { .. } => ExitCode::Config,
            Error::Divergence { .. } => ExitCode::Training,
            _ => ExitCode::Data,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Attaches the file name to data errors raised while reading it.
fn in_file<T>(path: &Path, r: crate::Result<T>) -> CliResult<T> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        if f.code == ExitCode::Data {
            f.message = format!("{}: {}", path.display(), f.message);
        }
        f
    })
}

#[derive(Debug, Parser)]
#[command(name = "hopchain", version, about = "Two-hop explanation chain retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a BM25 index snapshot from a corpus.
    BuildIndex(BuildIndexArgs),
    /// Validate an externally produced embeddings file and rewrite it canonically.
    ImportEmbeddings(ImportEmbeddingsArgs),
    /// Train the second-hop query re-encoder on gold chains.
    TrainReencoder(TrainArgs),
    /// Generate ranked chains for every question.
    Generate(GenerateArgs),
    /// Reorder chains by an external score file (or keep retrieval order).
    Rerank(RerankArgs),
    /// Export labelled chains for training a validity classifier.
    BuildRerankDataset(DatasetArgs),
    /// Score chains against gold explanations.
    Eval(EvalArgs),
    /// Compare several evaluation reports.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Engine config file (TOML).
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Named pipeline preset: eqasc_baseline, expanded, semantic or hybrid.
    #[arg(long)]
    preset: Option<String>,
    /// Run seed; every stochastic stage derives its seed from it.
    #[arg(long, allow_negative_numbers = true)]
    seed: Option<i64>,
}

#[derive(Debug, Args)]
struct BuildIndexArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Corpus file (JSONL of {"id", "text"}).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Stopword file, one word per line; replaces the built-in list.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Index snapshot to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EmbeddingKind {
    /// Ids are fact ids and must all occur in --corpus.
    Facts,
    /// Ids are question ids and must all occur in --questions.
    Queries,
}

#[derive(Debug, Args)]
struct ImportEmbeddingsArgs {
    /// Embeddings file to validate.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "facts")]
    kind: EmbeddingKind,
    /// Corpus to check fact ids against.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Questions file to check query ids against.
    #[arg(long)]
    questions: Option<PathBuf>,
    /// Canonical copy to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Questions with gold fact1/fact2 ids.
    #[arg(long)]
    questions: Option<PathBuf>,
    #[arg(long)]
    fact_embeddings: Option<PathBuf>,
    /// Query embeddings keyed by question id.
    #[arg(long)]
    query_embeddings: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Also train on the reversed gold chain (fact2 then fact1).
    #[arg(long)]
    both_orientations: bool,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-epoch loss table (TSV).
    #[arg(long)]
    losses: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Syntactic,
    Semantic,
    Hybrid,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    questions: Option<PathBuf>,
    /// Prebuilt index snapshot; built from --corpus when absent.
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    fact_embeddings: Option<PathBuf>,
    #[arg(long)]
    query_embeddings: Option<PathBuf>,
    /// Trained re-encoder model.
    #[arg(long)]
    reencoder: Option<PathBuf>,
    #[arg(long)]
    n_first: Option<usize>,
    #[arg(long)]
    m_second: Option<usize>,
    /// Chains kept per question.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    semantic_n: Option<usize>,
    #[arg(long)]
    semantic_m: Option<usize>,
    #[arg(long)]
    merge_fraction: Option<f64>,
    /// Worker threads (0 = one per core). Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Chains file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RerankArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    chains: PathBuf,
    /// Score file (`qid<TAB>f1|f2<TAB>score`); retrieval scores when absent.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Chains kept per question (default: all).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Questions with gold fact1/fact2 ids.
    #[arg(long)]
    questions: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Candidate chains to draw negatives from.
    #[arg(long)]
    chains: PathBuf,
    #[arg(long)]
    negatives_per_positive: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    chains: PathBuf,
    /// Questions with gold fact1/fact2 ids.
    #[arg(long)]
    questions: Option<PathBuf>,
    /// Cutoff (default: the pipeline's k_chains).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Evaluation report as NAME=PATH, in run order. Repeatable.
    #[arg(long = "run", required = true, value_parser = parse_run)]
    runs: Vec<(String, PathBuf)>,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_run(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::Ok as i32;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("error:usage: {}", first.trim_start_matches("error: "));
            return ExitCode::Usage as i32;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::Ok as i32,
        Err(f) => {
            eprintln!("error:{}: {}", f.code.category(), f.message.replace('\n', " "));
            f.code as i32
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::BuildIndex(a) => cmd_build_index(a),
        Command::ImportEmbeddings(a) => cmd_import_embeddings(a),
        Command::TrainReencoder(a) => cmd_train(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Rerank(a) => cmd_rerank(a),
        Command::BuildRerankDataset(a) => cmd_dataset(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn resolve_config(args: &ConfigArgs, tweak: impl FnOnce(&mut EngineConfig)) -> CliResult<EngineConfig> {
    let mut cfg = match &args.config {
        Some(path) => in_file(path, EngineConfig::load(path)).map_err(|mut f| {
            if f.code == ExitCode::Data {
                f.code = ExitCode::Config;
            }
            f
        })?,
        None => EngineConfig::default(),
    };
    if let Some(name) = &args.preset {
        cfg.pipeline = name.parse::<Preset>()?.config().pipeline;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    tweak(&mut cfg);
    Ok(cfg.validated()?)
}

/// A path from its flag, else from the config, else a config error.
fn require(flag: &Option<PathBuf>, from_config: &Option<String>, field: &str, flag_name: &str) -> CliResult<PathBuf> {
    optional(flag, from_config).ok_or_else(|| Failure::missing(field, flag_name))
}

fn optional(flag: &Option<PathBuf>, from_config: &Option<String>) -> Option<PathBuf> {
    flag.clone().or_else(|| from_config.as_ref().map(PathBuf::from))
}

fn tokenizer(cfg: &EngineConfig, stopwords: &Option<PathBuf>) -> CliResult<Tokenizer> {
    match stopwords {
        Some(path) => Ok(in_file(path, Tokenizer::load_stopwords(path))?.with_stemming(cfg.tokenizer.stem)),
        None => Ok(cfg.tokenizer()?),
    }
}

fn load_corpus(path: &Path) -> CliResult<Corpus> {
    in_file(path, Corpus::load(path))
}

fn load_questions_file(path: &Path) -> CliResult<Vec<QuestionRecord>> {
    in_file(path, load_questions(path))
}

fn load_dense(path: &Path) -> CliResult<DenseIndex> {
    in_file(path, load_embeddings(path))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    Ok(io::write_atomic(path, text.as_bytes())?)
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_build_index(a: BuildIndexArgs) -> CliResult<()> {
    let cfg = resolve_config(&a.config, |_| {})?;
    let corpus_path = require(&a.corpus, &cfg.paths.corpus, "corpus", "--corpus")?;
    let stopwords = optional(&a.stopwords, &cfg.paths.stopwords);
    let tok = tokenizer(&cfg, &stopwords)?;
    let corpus = load_corpus(&corpus_path)?;
    let index = build_index(&corpus, &tok, cfg.bm25)?;
    index.save(&a.out, &cfg.digest())?;
    eprintln!("indexed {} facts, {} terms", index.doc_count(), index.terms().count());
    Ok(())
}

fn cmd_import_embeddings(a: ImportEmbeddingsArgs) -> CliResult<()> {
    let dense = load_dense(&a.input)?;
    let known: Option<Vec<String>> = match a.kind {
        EmbeddingKind::Facts => match &a.corpus {
            Some(p) => Some(load_corpus(p)?.facts().iter().map(|f| f.id.clone()).collect()),
            None => None,
        },
        EmbeddingKind::Queries => match &a.questions {
            Some(p) => Some(load_questions_file(p)?.into_iter().map(|q| q.qid).collect()),
            None => None,
        },
    };
    if let Some(known) = known {
        let known: HashSet<&str> = known.iter().map(String::as_str).collect();
        if let Some(stray) = dense.ids().iter().find(|id| !known.contains(id.as_str())) {
            return in_file(&a.input, Err(Error::UnknownFact(stray.clone())));
        }
    }
    write(&a.out, &dense.to_text())?;
    eprintln!("{} vectors, dim {}", dense.len(), dense.dim());
    Ok(())
}

/// Embedding for `id`, or a data error naming the file it should be in.
fn lookup(dense: &DenseIndex, id: &str, what: &str, path: &Path) -> CliResult<Embedding> {
    dense.get(id).map(|v| Embedding(v.to_vec())).ok_or_else(|| Failure {
        code: ExitCode::Data,
        message: format!("{}: no embedding for {what} {id:?}", path.display()),
    })
}

fn cmd_train(a: TrainArgs) -> CliResult<()> {
    let cfg = resolve_config(&a.config, |c| {
        if let Some(e) = a.epochs {
            c.train.epochs = e;
        }
        if let Some(lr) = a.learning_rate {
            c.train.learning_rate = lr;
        }
    })?;
    let q_path = require(&a.questions, &cfg.paths.questions, "questions", "--questions")?;
    let fe_path = require(
        &a.fact_embeddings,
        &cfg.paths.fact_embeddings,
        "fact_embeddings",
        "--fact-embeddings",
    )?;
    let qe_path = require(
        &a.query_embeddings,
        &cfg.paths.query_embeddings,
        "query_embeddings",
        "--query-embeddings",
    )?;
    let questions = load_questions_file(&q_path)?;
    let facts = load_dense(&fe_path)?;
    let queries = load_dense(&qe_path)?;

    let mut triples = Vec::new();
    for g in in_file(&q_path, gold_from_records(&questions))? {
        let q = lookup(&queries, &g.qid, "question", &qe_path)?;
        let d1 = lookup(&facts, &g.f1, "fact", &fe_path)?;
        let d2 = lookup(&facts, &g.f2, "fact", &fe_path)?;
        if a.both_orientations {
            triples.push(ChainTriple::new(q.clone(), d2.clone(), d1.clone()));
        }
        triples.push(ChainTriple::new(q, d1, d2));
    }
    let outcome = train(&triples, &cfg.train_config())?;
    outcome.model.save(&a.out, &cfg.digest())?;
    if let Some(path) = &a.losses {
        let mut t = String::from("epoch\tloss\n");
        for (i, l) in outcome.epoch_losses.iter().enumerate() {
            writeln!(t, "{}\t{l:?}", i + 1).unwrap();
        }
        write(path, &t)?;
    }
    eprintln!(
        "trained on {} triples; final loss {:.6}",
        triples.len(),
        outcome.epoch_losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

/// Everything `generate` needs for the semantic side.
struct SemanticInputs {
    facts: DenseIndex,
    queries: DenseIndex,
    queries_path: PathBuf,
    model: ReEncoderModel,
}

fn cmd_generate(a: GenerateArgs) -> CliResult<()> {
    let cfg = resolve_config(&a.config, |c| {
        let p = &mut c.pipeline;
        for (slot, v) in [
            (&mut p.n_first, a.n_first),
            (&mut p.m_second, a.m_second),
            (&mut p.k_chains, a.k),
            (&mut p.semantic_n, a.semantic_n),
            (&mut p.semantic_m, a.semantic_m),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let Some(f) = a.merge_fraction {
            p.merge_fraction = f;
        }
    })?;
    let q_path = require(&a.questions, &cfg.paths.questions, "questions", "--questions")?;
    let corpus_path = optional(&a.corpus, &cfg.paths.corpus);
    let index_path = optional(&a.index, &cfg.paths.index);
    let needs_lexical = a.mode != Mode::Semantic;
    let needs_dense = a.mode != Mode::Syntactic;

    // Check that every input is named before reading any of them.
    if needs_lexical && index_path.is_none() && corpus_path.is_none() {
        return Err(Failure::missing("corpus", "--corpus or --index"));
    }
    if needs_dense && corpus_path.is_none() {
        return Err(Failure::missing("corpus", "--corpus"));
    }
    let dense_paths = if needs_dense {
        Some((
            require(
                &a.fact_embeddings,
                &cfg.paths.fact_embeddings,
                "fact_embeddings",
                "--fact-embeddings",
            )?,
            require(
                &a.query_embeddings,
                &cfg.paths.query_embeddings,
                "query_embeddings",
                "--query-embeddings",
            )?,
            require(&a.reencoder, &cfg.paths.reencoder, "reencoder", "--reencoder")?,
        ))
    } else {
        None
    };

    let questions: Vec<QaPair> = load_questions_file(&q_path)?.iter().map(QuestionRecord::qa).collect();
    let corpus = corpus_path.as_deref().map(load_corpus).transpose()?;
    let index = if !needs_lexical {
        None
    } else if let Some(p) = &index_path {
        Some(in_file(p, InvertedIndex::load(p))?)
    } else {
        let tok = tokenizer(&cfg, &None)?;
        Some(build_index(corpus.as_ref().expect("checked above"), &tok, cfg.bm25)?)
    };
    let tok = match &index {
        Some(ix) => ix.tokenizer().clone(),
        None => tokenizer(&cfg, &None)?,
    };
    let semantic = match dense_paths {
        Some((fe, qe, m)) => Some(SemanticInputs {
            facts: load_dense(&fe)?,
            queries: load_dense(&qe)?,
            queries_path: qe,
            model: in_file(&m, ReEncoderModel::load(&m))?,
        }),
        None => None,
    };

    let per_question = |qa: &QaPair| -> CliResult<(String, Vec<_>)> {
        let syn = match &index {
            Some(ix) => syntactic_chains(ix, qa, &cfg.pipeline),
            None => Vec::new(),
        };
        let chains = match &semantic {
            None => syn,
            Some(s) => {
                let q = lookup(&s.queries, &qa.qid, "question", &s.queries_path)?;
                let corpus = corpus.as_ref().expect("checked above");
                let sem = semantic_chains(&s.facts, &s.model, &q, qa, corpus, &tok, &cfg.pipeline)?;
                match a.mode {
                    Mode::Hybrid => merge_candidates(&syn, &sem, &cfg.pipeline),
                    _ => sem,
                }
            }
        };
        Ok((qa.qid.clone(), chains))
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads)
        .build()
        .map_err(|e| Failure {
            code: ExitCode::Internal,
            message: format!("thread pool: {e}"),
        })?;
    let results: Vec<(String, Vec<_>)> =
        pool.install(|| questions.par_iter().map(per_question).collect::<CliResult<_>>())?;
    let predictions: Predictions = results.into_iter().collect();
    write(&a.out, &predictions_to_jsonl(&predictions, &cfg.digest()))?;
    eprintln!(
        "{} questions, {} chains",
        predictions.len(),
        predictions.values().map(Vec::len).sum::<usize>()
    );
    Ok(())
}

fn cmd_rerank(a: RerankArgs) -> CliResult<()> {
    let cfg = resolve_config(&a.config, |_| {})?;
    let chains = in_file(&a.chains, load_predictions(&a.chains))?;
    let scores = match optional(&a.scores, &cfg.paths.scores) {
        Some(p) => in_file(&p, ScoreTable::load(&p))?,
        None => {
            let mut t = ScoreTable::new();
            for (qid, cands) in &chains {
                t.merge(baseline_scores(qid, cands));
            }
            t
        }
    };
    if a.k == Some(0) {
        return Err(Error::Precondition("k must be at least 1".into()).into());
    }
    let out: Predictions = chains
        .iter()
        .map(|(qid, cands)| {
            (
                qid.clone(),
                rerank(cands, &scores, qid, a.k.unwrap_or(cands.len().max(1))),
            )
        })
        .collect();
    write(&a.out, &predictions_to_jsonl(&out, &cfg.digest()))
}

fn cmd_dataset(a: DatasetArgs) -> CliResult<()> {
    let cfg = resolve_config(&a.config, |c| {
        if let Some(n) = a.negatives_per_positive {
            c.dataset.negatives_per_positive = n;
        }
    })?;
    let q_path = require(&a.questions, &cfg.paths.questions, "questions", "--questions")?;
    let corpus_path = require(&a.corpus, &cfg.paths.corpus, "corpus", "--corpus")?;
    let records = load_questions_file(&q_path)?;
    let corpus = load_corpus(&corpus_path)?;
    let pools = in_file(&a.chains, load_predictions(&a.chains))?;
    let gold = in_file(&q_path, gold_from_records(&records))?;
    let qas: HashMap<String, QaPair> = records.iter().map(|r| (r.qid.clone(), r.qa())).collect();
    let outcome = build_rerank_dataset(&gold, &qas, &corpus, &pools, &cfg.dataset_config())?;
    write(&a.out, &outcome.to_jsonl(&cfg.digest()))?;
    eprintln!(
        "{} records; {} questions short of negatives ({} missing)",
        outcome.records.len(),
        outcome.short_pools,
        outcome.missing_negatives
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CliResult<()> {
    let cfg = resolve_config(&a.config, |_| {})?;
    let q_path = require(&a.questions, &cfg.paths.questions, "questions", "--questions")?;
    let text = io::read_to_string(&a.chains)?;
    let header = in_file(&a.chains, io::parse_jsonl::<serde::de::IgnoredAny>(&text))?.0;
    let predictions = in_file(&a.chains, crate::chain_builder::parse_predictions(&text))?;
    let gold = in_file(&q_path, gold_from_records(&load_questions_file(&q_path)?))?;
    let mut report = gold_retrieval_rate(&predictions, &gold, a.k.unwrap_or(cfg.pipeline.k_chains))?;
    report.config_digest = header.map(|h| h.config_digest);
    let text = match a.format {
        Format::Json => report.to_json(),
        Format::Tsv => report.to_table(),
    };
    emit(&a.out, &text)
}

fn cmd_report(a: ReportArgs) -> CliResult<()> {
    let mut reports = Vec::with_capacity(a.runs.len());
    for (name, path) in &a.runs {
        let text = io::read_to_string(path)?;
        reports.push((name.clone(), in_file(path, EvalReport::from_json(&text))?));
    }
    let cmp = compare_runs(&reports)?;
    let text = match a.format {
        Format::Json => cmp.to_json(),
        Format::Tsv => cmp.to_table(),
    };
    emit(&a.out, &text)
}

/// Subcommand names in declaration order.
pub fn command_names() -> Vec<String> {
    use clap::CommandFactory;
    Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect()
}
