//! mogam: synthetic data, graph building, training, evaluation, object
//! statistics and prediction.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use mogam::fusion::FusionMode;
use mogam::gnn::GnnKind;
use mogam::graph::{CooccurrenceOptions, ObjectVocabulary};
use mogam::io::{self, GraphCacheEntry, LoadOptions, Manifest, SyntheticConfig, SyntheticMode};
use mogam::model::{Architecture, Model};
use mogam::par::{self, Execution};
use mogam::stats;
use mogam::task::{Label, Task};
use mogam::train::{self, Checkpoint, TrainConfig};

const DEFAULT_DATA: &str = "data/synthetic";
const DEFAULT_RUNS: &str = "runs";

#[derive(Parser)]
#[command(name = "mogam", version, about = "Object co-occurrence graph models for vlog classification")]
struct Cli {
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic dataset.
    Generate(GenerateArgs),
    /// Cache co-occurrence counts for every vlog of a manifest.
    BuildGraphs(BuildGraphsArgs),
    /// Train one checkpoint per repetition.
    Train(TrainArgs),
    /// Test-split report for a training run.
    Evaluate(EvaluateArgs),
    /// Per-object ANOVA and Tukey HSD across labels.
    Analyze(AnalyzeArgs),
    /// Class probabilities for every vlog of a manifest.
    Predict(PredictArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = DEFAULT_DATA)]
    out: PathBuf,
    /// TOML generator settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    vlogs_per_class: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<SyntheticMode>,
    /// Write embeddings as text instead of binary.
    #[arg(long)]
    text_embeddings: bool,
}

#[derive(Args)]
struct BuildGraphsArgs {
    #[arg(long, default_value = "data/synthetic/manifest.json")]
    manifest: PathBuf,
    /// Defaults to `graphs/` next to the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave same-class instance pairs off the diagonal.
    #[arg(long)]
    no_same_class_pairs: bool,
}

#[derive(Args, Clone)]
struct ModelFlags {
    /// TOML experiment file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    gnn: Option<GnnKind>,
    /// `mogam` or `graph-only`.
    #[arg(long)]
    architecture: Option<Architecture>,
    /// `modality-token` or `literal`.
    #[arg(long)]
    fusion: Option<FusionMode>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Comma-separated widths of the GNN layers before the last.
    #[arg(long, value_delimiter = ',')]
    gnn_hidden: Option<Vec<usize>>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value = "data/synthetic/manifest.json")]
    manifest: PathBuf,
    /// Graph cache directory; `graphs/` next to the manifest is used when present.
    #[arg(long)]
    graphs: Option<PathBuf>,
    /// Run directory; defaults to `runs/<task>-<model>-s<seed>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    run: PathBuf,
    /// Overrides the manifest recorded by `train`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, default_value = "data/synthetic/manifest.json")]
    manifest: PathBuf,
    #[arg(long, default_value = "0.05")]
    alpha: f64,
    /// Objects shown in the printed table.
    #[arg(long, default_value = "10")]
    top: usize,
    /// Defaults to `analysis/` next to the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// 1-based repetition whose checkpoint is used.
    #[arg(long, default_value = "1")]
    repetition: usize,
    /// Defaults to `predictions.json` in the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> std::result::Result<SyntheticMode, String> {
    match s {
        "separable" => Ok(SyntheticMode::Separable),
        "complementary" => Ok(SyntheticMode::Complementary),
        other => Err(format!("unknown mode '{other}' (separable | complementary)")),
    }
}

/// Written by `train`; read by `evaluate` and `predict`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunInfo {
    format_version: u32,
    manifest: PathBuf,
    graphs: Option<PathBuf>,
    config: TrainConfig,
    checkpoints: Vec<PathBuf>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    format_version: u32,
    config: &'a TrainConfig,
    report: &'a train::EvaluationReport,
}

#[derive(Serialize)]
struct PredictionRow {
    id: String,
    label: Option<Label>,
    predicted: Label,
    probabilities: BTreeMap<Label, f64>,
}

#[derive(Serialize)]
struct PredictionFile<'a> {
    format_version: u32,
    config: &'a TrainConfig,
    repetition: usize,
    predictions: Vec<PredictionRow>,
}

#[derive(Serialize)]
struct AnalysisFile<'a> {
    format_version: u32,
    manifest: &'a Path,
    alpha: f64,
    analysis: &'a stats::ObjectAnalysis,
}

fn execution(cli: &Cli) -> Execution {
    if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn echo(title: &str, body: &str) {
    eprintln!("# {title}");
    for line in body.lines() {
        eprintln!("#   {line}");
    }
}

fn generate(args: &GenerateArgs, exec: Execution) -> Result<()> {
    let mut cfg: SyntheticConfig = match &args.config {
        Some(p) => {
            let text = io::read_to_string(p)?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SyntheticConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.vlogs_per_class {
        cfg.vlogs_per_class = n;
    }
    if let Some(t) = args.vocab_size {
        cfg.vocab_size = t;
    }
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if args.text_embeddings {
        cfg.encoding = io::EmbeddingEncoding::Text;
    }
    echo(&format!("generate (seed {})", cfg.seed), &toml::to_string(&cfg)?);
    let manifest = io::generate_synthetic(&cfg, &args.out, exec)?;
    println!("wrote {} vlogs to {}", manifest.entries.len(), args.out.join("manifest.json").display());
    Ok(())
}

fn default_graph_dir(manifest: &Path) -> PathBuf {
    manifest.parent().unwrap_or(Path::new("")).join("graphs")
}

fn build_graphs(args: &BuildGraphsArgs, exec: Execution) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let vocab = manifest.vocabulary();
    let options = CooccurrenceOptions { same_class_pairs: !args.no_same_class_pairs };
    let out = args.out.clone().unwrap_or_else(|| default_graph_dir(&args.manifest));
    echo("build-graphs", &format!("manifest = {}\nout = {}\nsame_class_pairs = {}", args.manifest.display(), out.display(), options.same_class_pairs));
    let logs = io::load_detection_logs(&args.manifest, &manifest, exec)?;
    par::try_map(&logs, exec, |log| {
        let entry = GraphCacheEntry::from_log(log, &vocab, options)?;
        io::write_graph_cache(&out.join(format!("{}.graph.json", log.vlog_id)), &entry)
    })?;
    println!("wrote {} graphs to {}", logs.len(), out.display());
    Ok(())
}

fn resolve_config(flags: &ModelFlags, exec: Execution) -> Result<TrainConfig> {
    let mut c = io::load_train_config(flags.config.as_deref())?;
    if let Some(v) = flags.task {
        c.task = v;
    }
    if let Some(v) = flags.gnn {
        c.gnn = v;
    }
    if let Some(v) = flags.architecture {
        c.architecture = v;
    }
    if let Some(v) = flags.fusion {
        c.fusion = v;
    }
    if let Some(v) = flags.epochs {
        c.epochs = v;
    }
    if let Some(v) = flags.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = flags.hidden {
        c.hidden = v;
    }
    if let Some(v) = &flags.gnn_hidden {
        c.gnn_hidden = v.clone();
    }
    if let Some(v) = flags.heads {
        c.heads = v;
    }
    if let Some(v) = flags.lr {
        c.lr = v;
    }
    if let Some(v) = flags.dropout {
        c.dropout = v;
    }
    if let Some(v) = flags.seed {
        c.seed = v;
    }
    if let Some(v) = flags.repetitions {
        c.repetitions = v;
    }
    if exec == Execution::Sequential {
        c.execution = Execution::Sequential;
    }
    c.validate()?;
    Ok(c)
}

fn load_options(manifest: &Path, graphs: Option<PathBuf>, exec: Execution) -> LoadOptions {
    let graph_cache = graphs.or_else(|| Some(default_graph_dir(manifest)).filter(|d| d.is_dir()));
    LoadOptions { graph_cache, cooccurrence: CooccurrenceOptions::default(), execution: exec }
}

fn train_cmd(args: &TrainArgs, exec: Execution) -> Result<()> {
    let config = resolve_config(&args.model, exec)?;
    let opts = load_options(&args.manifest, args.graphs.clone(), config.execution);
    let out = args.out.clone().unwrap_or_else(|| {
        let arch = match config.architecture {
            Architecture::Mogam => "mogam",
            Architecture::GraphOnly => "graph",
        };
        Path::new(DEFAULT_RUNS).join(format!("{}-{arch}-{}-s{}", config.task.key(), config.gnn.display_name().to_lowercase(), config.seed))
    });
    echo(&format!("train (seed {})", config.seed), &io::train_config_toml(&config));
    let dataset = io::load_dataset(&args.manifest, &opts)?;
    let mut checkpoints = Vec::new();
    for r in 0..config.repetitions {
        let ckpt = train::train_repetition(&config, &dataset, r)?;
        let rel = PathBuf::from(format!("checkpoint-{}.json", r + 1));
        io::write_json(&out.join(&rel), &ckpt)?;
        println!(
            "repetition {}: seed {}, best epoch {}, validation macro F1 {:.4}",
            r + 1,
            ckpt.seed,
            ckpt.best_epoch,
            ckpt.best_val_macro_f1
        );
        checkpoints.push(rel);
    }
    let info = RunInfo {
        format_version: io::FORMAT_VERSION,
        manifest: std::path::absolute(&args.manifest)?,
        graphs: opts.graph_cache.map(std::path::absolute).transpose()?,
        config,
        checkpoints,
    };
    io::write_json(&out.join("run.json"), &info)?;
    atomic_toml(&out.join("config.toml"), &info.config)?;
    println!("run written to {}", out.display());
    Ok(())
}

fn atomic_toml(path: &Path, config: &TrainConfig) -> Result<()> {
    io::atomic_write(path, io::train_config_toml(config).as_bytes())?;
    Ok(())
}

fn read_run(dir: &Path) -> Result<RunInfo> {
    let info: RunInfo = io::read_json(&dir.join("run.json"))?;
    if info.format_version != io::FORMAT_VERSION {
        bail!("{}: unsupported format_version {}", dir.join("run.json").display(), info.format_version);
    }
    Ok(info)
}

fn evaluate_cmd(args: &EvaluateArgs, exec: Execution) -> Result<()> {
    let info = read_run(&args.run)?;
    let manifest = args.manifest.clone().unwrap_or_else(|| info.manifest.clone());
    let exec = if exec == Execution::Sequential { exec } else { info.config.execution };
    echo(&format!("evaluate (seed {})", info.config.seed), &io::train_config_toml(&info.config));
    let graphs = if args.manifest.is_some() { None } else { info.graphs.clone() };
    let dataset = io::load_dataset(&manifest, &load_options(&manifest, graphs, exec))?;
    let mut results = Vec::new();
    for rel in &info.checkpoints {
        let ckpt: Checkpoint = io::read_json(&args.run.join(rel))?;
        results.push(train::evaluate_checkpoint(&ckpt, &dataset, exec)?);
    }
    let report = train::report(&info.config, results)?;
    let text = train::render_report(&report);
    io::write_json(
        &args.run.join("report.json"),
        &ReportFile { format_version: io::FORMAT_VERSION, config: &info.config, report: &report },
    )?;
    io::atomic_write(&args.run.join("report.txt"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn analyze_cmd(args: &AnalyzeArgs, exec: Execution) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let vocab: ObjectVocabulary = manifest.vocabulary();
    echo("analyze", &format!("manifest = {}\nalpha = {}", args.manifest.display(), args.alpha));
    let logs = io::load_detection_logs(&args.manifest, &manifest, exec)?;
    let labels: BTreeMap<String, Label> =
        manifest.entries.iter().filter_map(|e| e.label.map(|l| (e.id.clone(), l))).collect();
    let table = stats::normalized_counts(&logs, &labels, &vocab)?;
    let analysis = stats::analyze_objects(&table, &vocab, args.alpha, exec)?;
    let out = args.out.clone().unwrap_or_else(|| args.manifest.parent().unwrap_or(Path::new("")).join("analysis"));
    io::write_json(
        &out.join("analysis.json"),
        &AnalysisFile { format_version: io::FORMAT_VERSION, manifest: &args.manifest, alpha: args.alpha, analysis: &analysis },
    )?;
    io::atomic_write(&out.join("analysis.txt"), analysis.render(None).as_bytes())?;
    print!("{}", analysis.render(Some(args.top)));
    Ok(())
}

fn predict_cmd(args: &PredictArgs, exec: Execution) -> Result<()> {
    let info = read_run(&args.run)?;
    let Some(rel) = args.repetition.checked_sub(1).and_then(|i| info.checkpoints.get(i)) else {
        bail!("run has {} repetitions; --repetition {} is out of range", info.checkpoints.len(), args.repetition);
    };
    let ckpt: Checkpoint = io::read_json(&args.run.join(rel))?;
    echo(&format!("predict (seed {})", ckpt.seed), &io::train_config_toml(&info.config));
    let dataset = io::load_dataset(&args.manifest, &load_options(&args.manifest, None, exec))?;
    let model = Model::new(ckpt.model.spec.clone())?;
    model.check_params(&ckpt.model.params)?;
    let prepared = par::try_map(&dataset.samples, exec, |s| model.prepare(s, &ckpt.model.duration_stats))?;
    let preds = train::predict_all(&model, &ckpt.model.params, &prepared, exec)?;
    let classes = info.config.task.classes();
    let rows: Vec<PredictionRow> = preds
        .into_iter()
        .zip(&dataset.samples)
        .map(|(p, s)| PredictionRow {
            id: p.id,
            label: s.label,
            predicted: classes[p.predicted],
            probabilities: classes.iter().copied().zip(p.probabilities).collect(),
        })
        .collect();
    for r in &rows {
        let probs: Vec<String> = r.probabilities.iter().map(|(l, p)| format!("{l}={p:.4}")).collect();
        println!("{}\t{}\t{}", r.id, r.predicted, probs.join(" "));
    }
    let out = args.out.clone().unwrap_or_else(|| args.run.join("predictions.json"));
    io::write_json(
        &out,
        &PredictionFile { format_version: io::FORMAT_VERSION, config: &info.config, repetition: args.repetition, predictions: rows },
    )?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let exec = execution(cli);
    match &cli.command {
        Command::Generate(a) => generate(a, exec),
        Command::BuildGraphs(a) => build_graphs(a, exec),
        Command::Train(a) => train_cmd(a, exec),
        Command::Evaluate(a) => evaluate_cmd(a, exec),
        Command::Analyze(a) => analyze_cmd(a, exec),
        Command::Predict(a) => predict_cmd(a, exec),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
