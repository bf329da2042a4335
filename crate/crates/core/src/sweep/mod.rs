//! Sweeps: expand a config into hyperparameter points, train and score each
//! one, and keep a resumable record of the population.

pub mod config;
pub mod state;

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, OnceLock};

use crate::corpus::{build_vocabulary, subsample_stream, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{read_analogies, read_documents, read_triples, AnalogyOptions, EvalSuite, LabelStore, MetricReport};
use crate::hyper::{model_id, HyperParams};
use crate::trainer::{load_model, save_model, train, EmbeddingModel, Lexicon};

pub use config::{expand, refine, Distribution, ParamSpec, RangeSpec, Resources, Strategy, SweepConfig};
pub use state::{export_state, import_state, RunEntry, RunState, Status, StatusCounts, STATE_FORMAT};

/// Name of the state file inside a sweep's output directory.
pub const STATE_FILE: &str = "state.json";
/// Subdirectory holding model binaries.
pub const MODEL_DIR: &str = "models";

fn open(path: &Path, what: &str) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::config(format!("cannot open {what} {}: {e}", path.display())))
}

/// The evaluation inputs named by `config`.
pub fn load_suite(config: &SweepConfig) -> Result<EvalSuite> {
    let r = &config.resources;
    let mut suite = EvalSuite {
        split_seed: config.split_seed,
        analogy_options: AnalogyOptions {
            restrict_vocab: config.analogy_restrict_vocab,
        },
        ..EvalSuite::default()
    };
    if let Some(p) = &r.triples {
        suite.triples = read_triples(open(p, "triples file")?)?;
    }
    if let Some(p) = &r.documents {
        suite.documents = read_documents(open(p, "document file")?)?;
    }
    if let Some(p) = &r.analogies {
        suite.analogies = read_analogies(open(p, "analogy file")?)?;
    }
    Ok(suite)
}

/// The label store a fresh sweep starts from.
pub fn load_initial_labels(config: &SweepConfig) -> Result<LabelStore> {
    match &config.resources.labels {
        Some(p) => LabelStore::read_label_file(open(p, "label file")?),
        None => Ok(LabelStore::new()),
    }
}

/// Read the corpus and build its vocabulary.
pub fn load_corpus(config: &SweepConfig) -> Result<(String, Arc<Vocabulary>)> {
    let text = fs::read_to_string(&config.corpus)
        .map_err(|e| Error::config(format!("cannot read corpus {}: {e}", config.corpus.display())))?;
    let vocab = build_vocabulary(&text, config.min_count)?;
    Ok((text, Arc::new(vocab)))
}

/// Knobs for [`run_sweep_with`].
pub struct SweepRun<'a> {
    pub parallelism: usize,
    /// Checked before each job starts; set it to stop after the jobs in
    /// flight.
    pub cancel: Option<&'a AtomicBool>,
    /// Called after every persisted update.
    pub on_update: Option<&'a mut dyn FnMut(&RunState)>,
}

/// Train and score every point of `config`, recording progress in
/// `out_dir/state.json`. See [`run_sweep_with`].
pub fn run_sweep(config: &SweepConfig, parallelism: usize, out_dir: &Path) -> Result<RunState> {
    run_sweep_with(
        config,
        out_dir,
        SweepRun {
            parallelism,
            cancel: None,
            on_update: None,
        },
    )
}

/// Shared, lazily loaded inputs of the jobs.
struct JobContext<'a> {
    config: &'a SweepConfig,
    corpus_id: String,
    text: String,
    vocab: Arc<Vocabulary>,
    suite: EvalSuite,
    labels: LabelStore,
    out_dir: &'a Path,
    pretrained: OnceLock<std::result::Result<EmbeddingModel, String>>,
    lexicon: OnceLock<std::result::Result<Lexicon, String>>,
}

impl JobContext<'_> {
    fn pretrained(&self) -> Result<&EmbeddingModel> {
        self.pretrained
            .get_or_init(|| {
                let path = self
                    .config
                    .resources
                    .pretrained
                    .as_ref()
                    .ok_or("lockf is enabled but no pretrained vectors are configured")?;
                load_model(path).map_err(|e| format!("pretrained vectors {}: {e}", path.display()))
            })
            .as_ref()
            .map_err(|e| Error::config(e.clone()))
    }

    fn lexicon(&self) -> Result<&Lexicon> {
        self.lexicon
            .get_or_init(|| {
                let path = self
                    .config
                    .resources
                    .lexicon
                    .as_ref()
                    .ok_or("retro is enabled but no lexicon is configured")?;
                open(path, "lexicon")
                    .and_then(Lexicon::read)
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::config(e.clone()))
    }

    fn run(&self, hyper: &HyperParams) -> Result<(String, MetricReport)> {
        let pretrained = match hyper.lockf() {
            Some(_) => Some(self.pretrained()?),
            None => None,
        };
        let lexicon = match hyper.retro() {
            Some(_) => Some(self.lexicon()?),
            None => None,
        };
        let stream = subsample_stream(&self.vocab, &self.text, hyper.subsample(), hyper.seed);
        let model = train(&stream, self.vocab.clone(), hyper, &self.corpus_id, pretrained, lexicon)?;
        let rel = format!("{MODEL_DIR}/{}.bin", model.model_id);
        save_model(&model, &self.out_dir.join(&rel))?;
        Ok((rel, self.suite.evaluate(&model, &self.labels)))
    }
}

/// Like [`run_sweep`], with cancellation and progress reporting.
///
/// Points already trained in an existing state file (with their model file
/// present) are kept as they are. Each point is trained independently; a
/// failing point is recorded as failed and the rest continue. Results are
/// written by a single writer after every job, so an interruption loses at
/// most the jobs in flight.
pub fn run_sweep_with(config: &SweepConfig, out_dir: &Path, mut run: SweepRun<'_>) -> Result<RunState> {
    if run.parallelism == 0 {
        return Err(Error::config("parallelism must be at least 1"));
    }
    let points = expand(config)?;
    if !config.corpus.is_file() {
        return Err(Error::config(format!("corpus {} does not exist", config.corpus.display())));
    }
    let corpus_id = config.corpus_id();
    fs::create_dir_all(out_dir.join(MODEL_DIR))?;
    let state_path = out_dir.join(STATE_FILE);

    let previous = if state_path.exists() {
        Some(import_state(&state_path)?)
    } else {
        None
    };
    let mut state = RunState::new(config.clone());
    state.labels = match &previous {
        Some(p) => p.labels.clone(),
        None => load_initial_labels(config)?,
    };
    let mut seen = HashSet::new();
    let mut jobs = Vec::new();
    for hyper in points {
        let id = model_id(&corpus_id, &hyper);
        if !seen.insert(id.clone()) {
            continue;
        }
        let kept = previous.as_ref().and_then(|p| p.entry(&id)).filter(|e| {
            e.status == Status::Trained && e.model_path.as_ref().is_some_and(|p| out_dir.join(p).is_file())
        });
        match kept {
            Some(e) => state.entries.push(e.clone()),
            None => {
                jobs.push((state.entries.len(), hyper.clone()));
                state.entries.push(RunEntry::pending(id, hyper));
            }
        }
    }
    export_state(&state, &state_path)?;
    if let Some(f) = run.on_update.as_mut() {
        f(&state);
    }
    if jobs.is_empty() {
        return Ok(state);
    }

    let (text, vocab) = load_corpus(config)?;
    let ctx = JobContext {
        config,
        corpus_id,
        text,
        vocab,
        suite: load_suite(config)?,
        labels: state.labels.clone(),
        out_dir,
        pretrained: OnceLock::new(),
        lexicon: OnceLock::new(),
    };
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<(String, MetricReport)>)>();
    let workers = run.parallelism.min(jobs.len());
    let mut write_error = None;
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (ctx, jobs, next, cancel) = (&ctx, &jobs, &next, run.cancel);
            scope.spawn(move || loop {
                if cancel.is_some_and(|c| c.load(Ordering::SeqCst)) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((slot, hyper)) = jobs.get(i) else { break };
                let outcome = catch_unwind(AssertUnwindSafe(|| ctx.run(hyper)))
                    .unwrap_or_else(|_| Err(Error::config("training panicked")));
                if tx.send((*slot, outcome)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (slot, outcome) in rx {
            let entry = &mut state.entries[slot];
            match outcome {
                Ok((path, metrics)) => {
                    entry.status = Status::Trained;
                    entry.metrics = Some(metrics);
                    entry.model_path = Some(path);
                    entry.error = None;
                }
                Err(e) => {
                    log::warn!("{}: {e}", entry.model_id);
                    entry.status = Status::Failed;
                    entry.error = Some(e.to_string());
                }
            }
            if let Err(e) = export_state(&state, &state_path) {
                write_error.get_or_insert(e);
            }
            if let Some(f) = run.on_update.as_mut() {
                f(&state);
            }
        }
    });
    match write_error {
        Some(e) => Err(e),
        None => Ok(state),
    }
}
