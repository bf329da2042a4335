//! `lexiscope`: build vocabularies, train and evaluate models, run sweeps,
//! write reports and launch the service.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for data or
//! configuration errors. Every error goes to standard error.

mod report;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lexiscope_core::corpus::{build_vocabulary, subsample_stream, Vocabulary};
use lexiscope_core::eval::{
    read_analogies, read_documents, read_triples, AnalogyOptions, EvalSuite, LabelStore, F_T,
};
use lexiscope_core::hyper::{Architecture, HyperParams};
use lexiscope_core::sweep::{export_state, import_state, refine, run_sweep, Status, SweepConfig, STATE_FILE};
use lexiscope_core::trainer::{load_model, save_model, save_model_text, train, Lexicon};
use lexiscope_service::ServerConfig;

/// A mistake in how the command was invoked, as opposed to bad data.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "lexiscope", version, about = "Train, sweep, evaluate and compare word-embedding models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count a corpus and write its vocabulary as `word<TAB>count` lines.
    VocabBuild {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 5)]
        min_count: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model.
    Train(TrainArgs),
    /// Run a sweep config, resuming from any state already in `--out`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "run")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Score a model and print one `metric<TAB>value` line per metric.
    Eval(EvalArgs),
    /// Write a finer sweep config around the best trained model of a run.
    Refine {
        #[arg(long)]
        config: PathBuf,
        /// State file of the finished coarse sweep.
        #[arg(long)]
        state: PathBuf,
        /// Metric to maximize.
        #[arg(long, default_value = F_T)]
        metric: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a state file and write it in canonical form.
    ExportState {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the labels as a label file.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Start the HTTP service.
    Serve {
        /// Server config (TOML or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        run_dir: Option<PathBuf>,
        /// Overrides the config file and the environment.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Write an HTML and CSV summary of a run.
    Report {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

/// Hyperparameter flags, named exactly like the fields they set.
#[derive(Args)]
#[command(next_help_heading = "Hyperparameters")]
struct HyperArgs {
    #[arg(long, allow_negative_numbers = true)]
    size: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    window: Option<usize>,
    #[arg(long)]
    architecture: Option<Architecture>,
    #[arg(long)]
    hs: Option<bool>,
    #[arg(long, allow_negative_numbers = true)]
    negative: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    iterations: Option<usize>,
    #[arg(long = "subsample_t", allow_negative_numbers = true)]
    subsample_t: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lockf: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    retro: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    seed: Option<u64>,
}

impl HyperArgs {
    fn resolve(&self) -> Result<HyperParams> {
        let mut h = HyperParams::default();
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f.clone() { h.$f = v; } )*};
        }
        set!(size, window, architecture, hs, negative, alpha, iterations, subsample_t, lockf, retro, seed);
        if let Err(e) = h.validate() {
            // Name the offending flag when the message starts with a field.
            let msg = e.to_string();
            let msg = msg.strip_prefix("configuration error: ").unwrap_or(&msg);
            let flag = msg.split_whitespace().next().filter(|w| HyperParams::is_field(w));
            return Err(match flag {
                Some(f) => usage(format!("invalid value for --{f}: {msg}")),
                None => usage(msg.to_string()),
            });
        }
        Ok(h)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Vocabulary from `vocab-build`; built from the corpus when absent.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    #[arg(long)]
    corpus_id: Option<String>,
    /// Pretrained vectors, required when `--lockf` is set.
    #[arg(long)]
    pretrained: Option<PathBuf>,
    /// Synonym lexicon, required when `--retro` is set.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the vectors in word2vec text format.
    #[arg(long)]
    text_out: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    triples: Option<PathBuf>,
    #[arg(long)]
    documents: Option<PathBuf>,
    #[arg(long)]
    analogies: Option<PathBuf>,
    /// Label file whose pairs join the train-split triples.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long)]
    restrict_vocab: Option<usize>,
    /// Print the metric report as JSON instead.
    #[arg(long)]
    json: bool,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
}

fn vocab_build(corpus: &Path, min_count: u64, out: &Path) -> Result<()> {
    let text = fs::read_to_string(corpus).with_context(|| format!("cannot read {}", corpus.display()))?;
    let vocab = build_vocabulary(&text, min_count)?;
    let mut w = BufWriter::new(File::create(out).with_context(|| format!("cannot create {}", out.display()))?);
    vocab.write_counts(&mut w)?;
    w.flush()?;
    println!(
        "vocabulary: {} words from {} tokens -> {}",
        vocab.len(),
        vocab.total_tokens(),
        out.display()
    );
    Ok(())
}

fn train_cmd(args: &TrainArgs) -> Result<()> {
    let hyper = args.hyper.resolve()?;
    if hyper.lockf().is_some() != args.pretrained.is_some() {
        return Err(usage("--pretrained must be given exactly when --lockf is set"));
    }
    if hyper.retro().is_some() != args.lexicon.is_some() {
        return Err(usage("--lexicon must be given exactly when --retro is set"));
    }
    let text = fs::read_to_string(&args.corpus).with_context(|| format!("cannot read {}", args.corpus.display()))?;
    let vocab: Vocabulary = match &args.vocab {
        Some(p) => Vocabulary::read_counts(open(p)?, args.min_count)?,
        None => build_vocabulary(&text, args.min_count)?,
    };
    let pretrained = args.pretrained.as_deref().map(load_model).transpose()?;
    let lexicon = match &args.lexicon {
        Some(p) => Some(Lexicon::read(open(p)?)?),
        None => None,
    };
    let corpus_id = args.corpus_id.clone().unwrap_or_else(|| {
        args.corpus
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".into())
    });
    let stream = subsample_stream(&vocab, &text, hyper.subsample(), hyper.seed);
    let model = train(&stream, Arc::new(vocab), &hyper, &corpus_id, pretrained.as_ref(), lexicon.as_ref())?;
    save_model(&model, &args.out)?;
    if let Some(t) = &args.text_out {
        save_model_text(&model, t)?;
    }
    println!(
        "model {}: {} words x {} dims in {:.2}s -> {}",
        model.model_id,
        model.len(),
        model.dim(),
        model.train_seconds,
        args.out.display()
    );
    Ok(())
}

fn eval_cmd(args: &EvalArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let mut suite = EvalSuite {
        split_seed: args.split_seed,
        analogy_options: AnalogyOptions {
            restrict_vocab: args.restrict_vocab,
        },
        ..EvalSuite::default()
    };
    if let Some(p) = &args.triples {
        suite.triples = read_triples(open(p)?)?;
    }
    if let Some(p) = &args.documents {
        suite.documents = read_documents(open(p)?)?;
    }
    if let Some(p) = &args.analogies {
        suite.analogies = read_analogies(open(p)?)?;
    }
    let labels = match &args.labels {
        Some(p) => LabelStore::read_label_file(open(p)?)?,
        None => LabelStore::new(),
    };
    let report = suite.evaluate(&model, &labels);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for (name, value) in &report.scores {
            println!("{name}\t{value}");
        }
        for (name, n) in &report.skipped_items {
            eprintln!("{name}: {n} items skipped (out of vocabulary)");
        }
    }
    Ok(())
}

fn sweep_cmd(config: &Path, out: &Path, parallel: usize) -> Result<()> {
    if parallel == 0 {
        return Err(usage("--parallel must be at least 1"));
    }
    let config = SweepConfig::load(config)?;
    let state = run_sweep(&config, parallel, out)?;
    let c = state.counts();
    println!(
        "sweep: {} trained, {} failed, {} pending -> {}",
        c.trained,
        c.failed,
        c.pending,
        out.join(STATE_FILE).display()
    );
    for e in state.entries.iter().filter(|e| e.status == Status::Failed) {
        eprintln!("{} failed: {}", e.model_id, e.error.as_deref().unwrap_or("unknown error"));
    }
    Ok(())
}

fn refine_cmd(config: &Path, state: &Path, metric: &str, out: &Path) -> Result<()> {
    let config = SweepConfig::load(config)?;
    let state = import_state(state)?;
    let best = state
        .trained()
        .filter_map(|e| Some((e, e.metrics.as_ref()?.get(metric)?)))
        .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.model_id.cmp(&a.0.model_id)))
        .ok_or_else(|| anyhow::anyhow!(lexiscope_core::Error::Config(format!("no trained model reports `{metric}`"))))?;
    let finer = refine(&config, &best.0.hyper)?;
    fs::write(out, serde_json::to_string_pretty(&finer)? + "\n")
        .with_context(|| format!("cannot write {}", out.display()))?;
    println!("refined around {} ({metric} = {}) -> {}", best.0.model_id, best.1, out.display());
    Ok(())
}

fn export_cmd(state: &Path, out: &Path, labels: Option<&Path>) -> Result<()> {
    let s = import_state(state)?;
    export_state(&s, out)?;
    if let Some(p) = labels {
        let mut w = BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?);
        s.labels.write_label_file(&mut w)?;
        w.flush()?;
    }
    println!("state: {} entries, {} labels -> {}", s.entries.len(), s.labels.len(), out.display());
    Ok(())
}

fn serve_cmd(config: Option<&Path>, run_dir: Option<PathBuf>, port: Option<u16>) -> Result<()> {
    let mut cfg = match config {
        Some(p) => ServerConfig::load(p)?,
        None => ServerConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(d) = run_dir {
        cfg.run_dir = d;
    }
    if let Some(p) = port {
        cfg.port = p;
    }
    eprintln!("serving {} on http://{}:{}", cfg.run_dir.display(), cfg.host, cfg.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(lexiscope_service::serve(cfg))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::VocabBuild { corpus, min_count, out } => vocab_build(&corpus, min_count, &out),
        Command::Train(args) => train_cmd(&args),
        Command::Sweep { config, out, parallel } => sweep_cmd(&config, &out, parallel),
        Command::Eval(args) => eval_cmd(&args),
        Command::Refine { config, state, metric, out } => refine_cmd(&config, &state, &metric, &out),
        Command::ExportState { state, out, labels } => export_cmd(&state, &out, labels.as_deref()),
        Command::Serve { config, run_dir, port } => serve_cmd(config.as_deref(), run_dir, port),
        Command::Report { state, out } => {
            let s = import_state(&state)?;
            let written = report::write_report(&s, &out)?;
            println!("report: {} models -> {}", s.entries.len(), written.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
