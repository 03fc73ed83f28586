//! `namerec`: subcommand front-end for the recommendation pipeline.
//!
//! Stages talk to each other through files so each one can be run, cached and
//! inspected in isolation: `extract` writes method records as JSON Lines,
//! `graph` turns them into a call-graph file, `train` fits embeddings,
//! `recommend` answers queries, `evaluate` runs the cross-validation harness
//! and `synth` generates a seeded synthetic corpus. Every artifact gets a
//! `.meta.json` sidecar echoing the effective configuration and a content
//! hash; stages refuse inputs whose bytes no longer match their sidecar.
//!
//! Exit codes: 0 success, 2 usage (from the parser), 3 missing input file,
//! 4 malformed or mismatched artifact, 1 anything else.

use std::collections::BTreeSet;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use namerec_core::corpus::{self, ScanOptions, SourceUnit};
use namerec_core::embed::TrainConfig;
use namerec_core::eval::{self, EvalConfig};
use namerec_core::lexicon::Lexicon;
use namerec_core::{acg, embed, recommend};

#[derive(Parser)]
#[command(
    name = "namerec",
    version,
    about = "Method-name recommendation from caller-callee relationships"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a source tree and write cleansed method records as JSON Lines.
    Extract(ExtractArgs),
    /// Build the aggregated call graph file from method records.
    Graph(GraphArgs),
    /// Train embeddings on a call graph file.
    Train(TrainArgs),
    /// Recommend names for a query given a trained embedding table.
    Recommend(RecommendArgs),
    /// Run file-level k-fold cross-validation over a corpus.
    Evaluate(EvaluateArgs),
    /// Generate a seeded synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Args, Serialize)]
struct ExtractArgs {
    /// Corpus root directory.
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    root: PathBuf,
    /// Output records file (JSON Lines).
    #[arg(long, default_value = "records.jsonl")]
    #[serde(skip)]
    out: PathBuf,
    /// Recognized source extension, without the dot.
    #[arg(long, default_value = "java")]
    ext: String,
    /// Keep test packages and serially numbered files.
    #[arg(long)]
    no_cleanse: bool,
    /// Extract files in parallel (output order is unchanged).
    #[arg(long)]
    parallel: bool,
}

#[derive(Args, Serialize)]
struct GraphArgs {
    /// Input records file written by `extract`.
    #[arg(long, default_value = "records.jsonl")]
    #[serde(skip)]
    records: PathBuf,
    /// Output graph file.
    #[arg(long, default_value = "acg.tsv")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Serialize, Clone)]
struct TrainFlags {
    /// Embedding dimension.
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// Number of minibatch steps.
    #[arg(long, default_value_t = 5000)]
    loops: usize,
    /// Methods per minibatch.
    #[arg(long = "batch", default_value_t = 200)]
    batch: usize,
    /// Negative samples per batch method.
    #[arg(long, default_value_t = 10)]
    negatives: usize,
    /// Initial learning rate.
    #[arg(long = "lr", default_value_t = 0.75)]
    lr: f64,
    /// Fraction of the learning rate shed after each epoch.
    #[arg(long = "lr-decay", default_value_t = 0.04)]
    lr_decay: f64,
    /// Weight of the callee-mean term against the norm term.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Seed for initialization, batching and sampling.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl TrainFlags {
    fn to_config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            loops: self.loops,
            batch_size: self.batch,
            negatives: self.negatives,
            lr0: self.lr,
            lr_decay: self.lr_decay,
            alpha: self.alpha,
            seed: self.seed,
        }
    }
}

#[derive(Args, Serialize)]
struct TrainArgs {
    /// Input graph file written by `graph`.
    #[arg(long, default_value = "acg.tsv")]
    #[serde(skip)]
    graph: PathBuf,
    /// Output embedding table.
    #[arg(long, default_value = "emb.txt")]
    #[serde(skip)]
    out: PathBuf,
    /// Optional per-step loss trace (CSV).
    #[arg(long)]
    #[serde(skip)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    train: TrainFlags,
}

#[derive(Args, Serialize)]
struct RecommendArgs {
    /// Embedding table written by `train`.
    #[arg(long, default_value = "emb.txt")]
    #[serde(skip)]
    embeddings: PathBuf,
    /// Number of candidates to return.
    #[arg(long = "top", default_value_t = 10)]
    top: usize,
    /// Comma-separated callee names.
    #[arg(long, group = "query")]
    query_callees: Option<String>,
    /// JSON query object: {"callees": ["open", "close"]}.
    #[arg(long, group = "query")]
    query_json: Option<String>,
    /// File with a raw method body or definition; callees are extracted.
    #[arg(long, group = "query")]
    #[serde(skip)]
    query_file: Option<PathBuf>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    /// Corpus root directory.
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    root: PathBuf,
    /// Number of cross-validation folds.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Number of candidates scored per method.
    #[arg(long = "top", default_value_t = 10)]
    top: usize,
    /// Recognized source extension, without the dot.
    #[arg(long, default_value = "java")]
    ext: String,
    /// Verb lexicon file; defaults to the shipped list.
    #[arg(long, env = "NAMEREC_LEXICON")]
    #[serde(skip)]
    lexicon: Option<PathBuf>,
    /// Report JSON output path.
    #[arg(long, default_value = "report.json")]
    #[serde(skip)]
    out: PathBuf,
    /// Optional plain-text table output.
    #[arg(long)]
    #[serde(skip)]
    text: Option<PathBuf>,
    /// Optional per-verb correctness CSV.
    #[arg(long)]
    #[serde(skip)]
    per_verb_csv: Option<PathBuf>,
    /// Optional directory for the per-fold embedding tables.
    #[arg(long)]
    #[serde(skip)]
    emb_dir: Option<PathBuf>,
    /// Score test methods in parallel (the aggregate is order-independent).
    #[arg(long)]
    parallel: bool,
    #[command(flatten)]
    #[serde(flatten)]
    train: TrainFlags,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    /// Number of method families.
    #[arg(long, default_value_t = 10)]
    families: usize,
    /// Methods per family.
    #[arg(long, default_value_t = 20)]
    methods: usize,
    /// Private callee pool size per family.
    #[arg(long, default_value_t = 15)]
    pool: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory for the generated sources.
    #[arg(long, default_value = "corpus")]
    #[serde(skip)]
    out: PathBuf,
}

/// An input artifact whose bytes no longer match its sidecar's hash.
#[derive(Debug)]
struct ArtifactMismatch {
    path: PathBuf,
}

impl std::fmt::Display for ArtifactMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} does not match its sidecar (stale or edited artifact)",
            self.path.display()
        )
    }
}

impl std::error::Error for ArtifactMismatch {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core_err) = cause.downcast_ref::<namerec_core::Error>() {
            return match core_err {
                namerec_core::Error::Format { .. } => 4,
                namerec_core::Error::Io { source, .. }
                    if source.kind() == std::io::ErrorKind::NotFound =>
                {
                    3
                }
                _ => 1,
            };
        }
        if cause.downcast_ref::<ArtifactMismatch>().is_some() {
            return 4;
        }
        if let Some(io_err) = cause.downcast_ref::<std::io::Error>() {
            if io_err.kind() == std::io::ErrorKind::NotFound {
                return 3;
            }
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Extract(args) => run_extract(args),
        Command::Graph(args) => run_graph(args),
        Command::Train(args) => run_train(args),
        Command::Recommend(args) => run_recommend(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Synth(args) => run_synth(args),
    }
}

fn run_extract(args: ExtractArgs) -> anyhow::Result<()> {
    let options = ScanOptions {
        extensions: vec![args.ext.clone()],
    };
    let scan = corpus::scan_corpus(&args.root, &options)
        .with_context(|| format!("scanning {}", args.root.display()))?;
    let extracted = corpus::extract_all(&scan.units, args.parallel);
    let diagnostics: usize = extracted.iter().map(|e| e.diagnostics.len()).sum();
    for unit in &extracted {
        for diagnostic in &unit.diagnostics {
            eprintln!("warning: {diagnostic}");
        }
    }

    let (kept, dropped_test, dropped_serial) = if args.no_cleanse {
        (extracted, 0, 0)
    } else {
        let outcome = corpus::cleanse(extracted);
        (outcome.kept, outcome.dropped_test_package, outcome.dropped_serial)
    };
    let records: Vec<_> = kept.iter().flat_map(|e| e.records.iter().cloned()).collect();

    let mut buf = Vec::new();
    corpus::write_records_jsonl(&records, &mut buf)?;
    write_artifact(&args.out, &buf, &args, None)?;
    eprintln!(
        "extracted {} methods from {} units ({} skipped files, {} test-package units dropped, \
         {} serial units dropped, {} diagnostics)",
        records.len(),
        kept.len(),
        scan.skipped_files,
        dropped_test,
        dropped_serial,
        diagnostics
    );
    Ok(())
}

fn run_graph(args: GraphArgs) -> anyhow::Result<()> {
    let bytes = read_artifact(&args.records)?;
    let records = corpus::read_records_jsonl(&bytes[..], &args.records)?;
    let graph = acg::build_acg(&records);
    let mut buf = Vec::new();
    acg::save(&graph, &mut buf)?;
    write_artifact(&args.out, &buf, &args, Some(&bytes))?;
    eprintln!("graph: {} nodes, {} edges", graph.node_count(), graph.edge_count());
    Ok(())
}

fn run_train(args: TrainArgs) -> anyhow::Result<()> {
    let bytes = read_artifact(&args.graph)?;
    let graph = acg::load(BufReader::new(&bytes[..]), &args.graph)?;
    let cfg = args.train.to_config();
    let outcome = embed::train(&graph, &cfg)?;

    let mut buf = Vec::new();
    embed::save(&outcome.table, &mut buf)?;
    write_artifact(&args.out, &buf, &args, Some(&bytes))?;

    if let Some(trace_path) = &args.trace {
        let mut csv = String::from("step,lr,batch_loss\n");
        for row in &outcome.trace {
            csv.push_str(&format!("{},{},{}\n", row.step, row.lr, row.batch_loss));
        }
        fs::write(trace_path, csv)
            .with_context(|| format!("writing {}", trace_path.display()))?;
    }
    let final_loss = embed::loss(&outcome.table, &graph, cfg.alpha)?;
    eprintln!(
        "trained {} embeddings of dimension {} in {} steps (final loss {final_loss:.6})",
        outcome.table.len(),
        cfg.dim,
        cfg.loops
    );
    Ok(())
}

fn run_recommend(args: RecommendArgs) -> anyhow::Result<()> {
    let bytes = read_artifact(&args.embeddings)?;
    let table = embed::load(&bytes[..], &args.embeddings)?;

    let callees: BTreeSet<String> = if let Some(list) = &args.query_callees {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()
    } else if let Some(json) = &args.query_json {
        parse_query_json(json)?
    } else if let Some(path) = &args.query_file {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        callees_from_snippet(&text)
    } else {
        anyhow::bail!("one of --query-callees, --query-json or --query-file is required");
    };

    let list = recommend::recommend(&table, &callees, args.top)?;
    let mut json = serde_json::to_string_pretty(&list)?;
    json.push('\n');
    match &args.out {
        Some(path) => {
            fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn parse_query_json(json: &str) -> anyhow::Result<BTreeSet<String>> {
    #[derive(serde::Deserialize)]
    struct Query {
        callees: BTreeSet<String>,
    }
    let query: Query = serde_json::from_str(json).context("parsing --query-json")?;
    Ok(query.callees)
}

/// Pull callee names out of a raw snippet: a full definition is extracted
/// as-is, a bare body is wrapped into one first.
fn callees_from_snippet(text: &str) -> BTreeSet<String> {
    let direct = corpus::extract_methods(&SourceUnit::new("query.java", text));
    if let Some(record) = direct.records.first() {
        return record.callees.clone();
    }
    let wrapped = format!("class QueryHolder {{ void queryBody() {{\n{text}\n}} }}");
    let wrapped = corpus::extract_methods(&SourceUnit::new("query.java", wrapped));
    wrapped
        .records
        .first()
        .map(|r| r.callees.clone())
        .unwrap_or_default()
}

fn run_evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let options = ScanOptions {
        extensions: vec![args.ext.clone()],
    };
    let scan = corpus::scan_corpus(&args.root, &options)
        .with_context(|| format!("scanning {}", args.root.display()))?;
    let cleansed = corpus::cleanse(corpus::extract_all(&scan.units, args.parallel));

    let lexicon = match &args.lexicon {
        Some(path) => Lexicon::from_path(path)?,
        None => Lexicon::shipped(),
    };
    let cfg = EvalConfig {
        folds: args.folds,
        top_k: args.top,
        seed: args.train.seed,
        train: args.train.to_config(),
        parallel: args.parallel,
    };
    let outcome = eval::run_evaluation(&cleansed.kept, &lexicon, &cfg)?;

    write_artifact(&args.out, outcome.report.to_json().as_bytes(), &args, None)?;
    if let Some(path) = &args.text {
        fs::write(path, outcome.report.to_text())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.per_verb_csv {
        fs::write(path, outcome.report.per_verb_csv())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(dir) = &args.emb_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (fold, table) in outcome.fold_tables.iter().enumerate() {
            let mut buf = Vec::new();
            embed::save(table, &mut buf)?;
            let path = dir.join(format!("fold{}.txt", fold + 1));
            fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    eprintln!(
        "evaluated {} folds: verb {}/{}, noun {}/{}",
        args.folds,
        outcome.report.tasks.verb.correct,
        outcome.report.tasks.verb.total,
        outcome.report.tasks.noun.correct,
        outcome.report.tasks.noun.total
    );
    Ok(())
}

fn run_synth(args: SynthArgs) -> anyhow::Result<()> {
    let corpus = eval::generate_synthetic_corpus(args.families, args.methods, args.pool, args.seed)?;
    for unit in &corpus.units {
        let path = args.out.join(&unit.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, &unit.text).with_context(|| format!("writing {}", path.display()))?;
    }
    eprintln!(
        "wrote {} files ({} methods) under {}",
        corpus.units.len(),
        corpus.plan.len(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Artifact sidecars
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Meta<'a, C: Serialize> {
    tool: &'a str,
    config: &'a C,
    config_hash: String,
    content_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_hash: Option<String>,
}

fn meta_path(artifact: &Path) -> PathBuf {
    let mut name = artifact
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(".meta.json");
    artifact.with_file_name(name)
}

/// Write an artifact plus its sidecar: effective config, config hash,
/// content hash and (when derived from another artifact) the input's hash.
fn write_artifact<C: Serialize>(
    path: &Path,
    bytes: &[u8],
    config: &C,
    input: Option<&[u8]>,
) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    let config_json = serde_json::to_string(config)?;
    let meta = Meta {
        tool: concat!("namerec ", env!("CARGO_PKG_VERSION")),
        config,
        config_hash: format!("{:016x}", fnv1a(config_json.as_bytes())),
        content_hash: format!("{:016x}", fnv1a(bytes)),
        input_hash: input.map(|b| format!("{:016x}", fnv1a(b))),
    };
    let mut meta_json = serde_json::to_string_pretty(&meta)?;
    meta_json.push('\n');
    let sidecar = meta_path(path);
    fs::write(&sidecar, meta_json).with_context(|| format!("writing {}", sidecar.display()))?;
    Ok(())
}

/// Read an input artifact; if it carries a sidecar, the bytes must still
/// match the recorded content hash.
fn read_artifact(path: &Path) -> anyhow::Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| namerec_core::Error::io(path, e))?;
    let sidecar = meta_path(path);
    if let Ok(meta_text) = fs::read_to_string(&sidecar) {
        let meta: serde_json::Value = serde_json::from_str(&meta_text)
            .with_context(|| format!("parsing {}", sidecar.display()))?;
        if let Some(expected) = meta.get("content_hash").and_then(|v| v.as_str()) {
            let actual = format!("{:016x}", fnv1a(&bytes));
            if expected != actual {
                return Err(anyhow::Error::new(ArtifactMismatch {
                    path: path.to_path_buf(),
                }));
            }
        }
    }
    Ok(bytes)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
