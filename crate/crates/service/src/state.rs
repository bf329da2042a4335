//! Session state and the operations behind each endpoint.
//!
//! Reads take a short read lock, copy what they need (model handles are
//! shared `Arc`s) and compute outside the lock, so a running sweep or a
//! long view build never blocks other requests. Writes go through the
//! same lock one at a time.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, PoisonError, RwLock, RwLockReadGuard, RwLockWriteGuard};

use lexiscope_core::analysis::{
    build_heatmap, dimensions, explorer_words, filter_models, pairwise_correlations, sort_heatmap, Correlation,
    FilterSpec, HeatmapOptions, HeatmapView, ModelSummary, Projection, ProjectionJob, QueryExpr, SortMode, TsneOptions,
    DEFAULT_K,
};
use lexiscope_core::eval::{EvalSuite, LabelStore, MetricReport, PairLabel, Relation, TriplesCache};
use lexiscope_core::hyper::{Architecture, HyperParams};
use lexiscope_core::sweep::{
    expand, export_state, import_state, load_suite, run_sweep_with, RunState, Status, StatusCounts, SweepConfig,
    SweepRun, STATE_FILE,
};
use lexiscope_core::trainer::{load_model, EmbeddingModel};
use serde::{Deserialize, Serialize};

use crate::config::ServerConfig;
use crate::error::{ApiError, ServiceError};

/// Iterations between published projection snapshots.
pub const SNAPSHOT_EVERY: usize = 50;

type ApiResult<T> = Result<Envelope<T>, ApiError>;

/// The versions a payload was computed against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Versions {
    pub label_store_version: u64,
    pub population_version: u64,
}

/// A response body: the payload's own fields plus [`Versions`].
#[derive(Clone, Debug, Serialize)]
pub struct Envelope<T> {
    #[serde(flatten)]
    pub versions: Versions,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelRow {
    pub model_id: String,
    pub status: Status,
    pub hyper: HyperParams,
    pub metrics: Option<MetricReport>,
    pub error: Option<String>,
    pub loaded: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelList {
    pub models: Vec<ModelRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SessionView {
    pub loaded_models: Vec<String>,
    pub active_query: Option<String>,
    pub active_filter: FilterSpec,
    pub max_loaded_models: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct HeatmapParams {
    pub query: Option<String>,
    pub sort: Option<String>,
    pub k: Option<usize>,
    pub budget: Option<usize>,
    /// Model whose neighbors win column-budget ties.
    pub active: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct ProjectionParams {
    pub model: Option<String>,
    pub query: Option<String>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Axis {
    pub name: String,
    /// `hyperparameter` or `metric`.
    pub role: &'static str,
    /// `numeric`, `boolean` or `categorical`.
    #[serde(rename = "type")]
    pub kind: &'static str,
    /// Observed `[min, max]`; absent when no model has a value.
    pub extent: Option<[f64; 2]>,
    /// Labels of categorical values, indexed by their plotted position.
    pub categories: Option<Vec<String>>,
    pub flipped: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParallelRow {
    pub model_id: String,
    pub loaded: bool,
    /// Whether the current filter matches this model.
    pub matched: bool,
    pub values: BTreeMap<String, Option<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParallelView {
    pub dimensions: Vec<Axis>,
    pub models: Vec<ParallelRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SplomView {
    pub correlations: Vec<Correlation>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FilterView {
    pub filter: FilterSpec,
    pub matched: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LabelList {
    pub labels: Vec<PairLabel>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRequest {
    pub word_a: String,
    pub word_b: String,
    pub relation: Relation,
}

#[derive(Clone, Debug, Serialize)]
pub struct LabelChange {
    pub label: PairLabel,
    /// Recomputed train-split triples score of every loaded model; null when
    /// none of its triples is scorable.
    pub f_t: BTreeMap<String, Option<f64>>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SweepStatus {
    pub running: bool,
    pub total: usize,
    pub counts: StatusCounts,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StateExport {
    pub state: RunState,
}

struct Inner {
    run: Option<RunState>,
    /// Authoritative labels; copied into `run` on export.
    labels: LabelStore,
    population_version: u64,
    /// Loaded models in load order.
    loaded: Vec<Arc<EmbeddingModel>>,
    active_query: Option<String>,
    filter: FilterSpec,
    suite: Arc<EvalSuite>,
    f_t: TriplesCache,
}

impl Inner {
    fn versions(&self) -> Versions {
        Versions {
            label_store_version: self.labels.version(),
            population_version: self.population_version,
        }
    }

    fn summaries(&self) -> Vec<ModelSummary> {
        self.run.as_ref().map(RunState::summaries).unwrap_or_default()
    }

    fn loaded_model(&self, id: &str) -> Option<&Arc<EmbeddingModel>> {
        self.loaded.iter().find(|m| m.model_id == id)
    }

    fn merged_state(&self) -> Option<RunState> {
        self.run.clone().map(|mut s| {
            s.labels = self.labels.clone();
            s
        })
    }

    fn f_t_scores(&mut self) -> BTreeMap<String, Option<f64>> {
        let mut out = BTreeMap::new();
        for m in &self.loaded {
            out.insert(m.model_id.clone(), self.f_t.f_t(&self.suite, m, &self.labels));
        }
        out
    }
}

#[derive(Clone, PartialEq, Eq)]
struct ProjectionKey {
    query: String,
    k: usize,
    seed: u64,
    label_version: u64,
}

struct ProjectionSlot {
    key: ProjectionKey,
    versions: Versions,
    latest: Arc<Mutex<Projection>>,
    cancel: Arc<AtomicBool>,
}

#[derive(Default)]
struct SweepControl {
    status: SweepStatus,
    cancel: Option<Arc<AtomicBool>>,
}

struct Shared {
    config: ServerConfig,
    data: RwLock<Inner>,
    /// One projection job per loaded model.
    projections: Mutex<HashMap<String, ProjectionSlot>>,
    sweep: Mutex<SweepControl>,
}

/// Handle to the service state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(PoisonError::into_inner)
}

fn envelope<T>(versions: Versions, body: T) -> Envelope<T> {
    Envelope { versions, body }
}

fn suite_for(config: &SweepConfig) -> EvalSuite {
    load_suite(config).unwrap_or_else(|e| {
        log::warn!("evaluation data unavailable, f_T will not be recomputed: {e}");
        EvalSuite::default()
    })
}

impl AppState {
    /// Start from `run_dir/state.json` if it exists, otherwise from an empty
    /// population.
    pub fn open(config: ServerConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        let path = config.run_dir.join(STATE_FILE);
        let run = if path.is_file() { Some(import_state(&path)?) } else { None };
        let labels = run.as_ref().map(|r| r.labels.clone()).unwrap_or_default();
        let suite = run.as_ref().map(|r| suite_for(&r.config)).unwrap_or_default();
        let inner = Inner {
            run,
            labels,
            population_version: 1,
            loaded: Vec::new(),
            active_query: None,
            filter: FilterSpec::new(),
            suite: Arc::new(suite),
            f_t: TriplesCache::default(),
        };
        Ok(AppState {
            shared: Arc::new(Shared {
                config,
                data: RwLock::new(inner),
                projections: Mutex::new(HashMap::new()),
                sweep: Mutex::new(SweepControl::default()),
            }),
        })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.shared.config
    }

    fn read(&self) -> RwLockReadGuard<'_, Inner> {
        self.shared.data.read().unwrap_or_else(PoisonError::into_inner)
    }

    fn write(&self) -> RwLockWriteGuard<'_, Inner> {
        self.shared.data.write().unwrap_or_else(PoisonError::into_inner)
    }

    pub fn versions(&self) -> Versions {
        self.read().versions()
    }

    fn cap(&self, inner: &Inner) -> Option<usize> {
        self.shared
            .config
            .max_loaded_models
            .or_else(|| inner.run.as_ref().and_then(|r| r.config.max_loaded_models))
    }

    pub fn models(&self) -> ApiResult<ModelList> {
        let inner = self.read();
        let models = inner
            .run
            .iter()
            .flat_map(|r| &r.entries)
            .map(|e| ModelRow {
                model_id: e.model_id.clone(),
                status: e.status,
                hyper: e.hyper.clone(),
                metrics: e.metrics.clone(),
                error: e.error.clone(),
                loaded: inner.loaded_model(&e.model_id).is_some(),
            })
            .collect();
        Ok(envelope(inner.versions(), ModelList { models }))
    }

    fn session_view(&self, inner: &Inner) -> SessionView {
        SessionView {
            loaded_models: inner.loaded.iter().map(|m| m.model_id.clone()).collect(),
            active_query: inner.active_query.clone(),
            active_filter: inner.filter.clone(),
            max_loaded_models: self.cap(inner),
        }
    }

    pub fn session(&self) -> ApiResult<SessionView> {
        let inner = self.read();
        Ok(envelope(inner.versions(), self.session_view(&inner)))
    }

    /// Load a trained model. Loading one that is already loaded is a no-op.
    pub fn load_model(&self, model_id: &str) -> ApiResult<SessionView> {
        let path = {
            let inner = self.read();
            if inner.loaded_model(model_id).is_some() {
                return Ok(envelope(inner.versions(), self.session_view(&inner)));
            }
            let entry = inner
                .run
                .as_ref()
                .and_then(|r| r.entry(model_id))
                .ok_or_else(|| ApiError::not_found(format!("unknown model `{model_id}`")).with_token(model_id))?;
            if entry.status != Status::Trained {
                return Err(ApiError::conflict(format!("model `{model_id}` is {:?}, not trained", entry.status)));
            }
            self.check_cap(&inner)?;
            self.shared.config.run_dir.join(entry.model_path.as_deref().unwrap_or_default())
        };
        // Read the file without holding the lock.
        let model = Arc::new(load_model(&path)?);
        let mut inner = self.write();
        if inner.loaded_model(model_id).is_none() {
            self.check_cap(&inner)?;
            inner.loaded.push(model);
        }
        Ok(envelope(inner.versions(), self.session_view(&inner)))
    }

    fn check_cap(&self, inner: &Inner) -> Result<(), ApiError> {
        match self.cap(inner) {
            Some(cap) if inner.loaded.len() >= cap => Err(ApiError::conflict(format!(
                "at most {cap} models can be loaded at once; unload one first"
            ))),
            _ => Ok(()),
        }
    }

    pub fn unload_model(&self, model_id: &str) -> ApiResult<SessionView> {
        let mut inner = self.write();
        let pos = inner
            .loaded
            .iter()
            .position(|m| m.model_id == model_id)
            .ok_or_else(|| ApiError::not_found(format!("model `{model_id}` is not loaded")).with_token(model_id))?;
        inner.loaded.remove(pos);
        if let Some(slot) = lock(&self.shared.projections).remove(model_id) {
            slot.cancel.store(true, Ordering::SeqCst);
        }
        Ok(envelope(inner.versions(), self.session_view(&inner)))
    }

    pub fn set_query(&self, query: &str) -> ApiResult<SessionView> {
        QueryExpr::parse(query)?;
        let mut inner = self.write();
        inner.active_query = Some(query.to_string());
        Ok(envelope(inner.versions(), self.session_view(&inner)))
    }

    pub fn heatmap(&self, params: &HeatmapParams) -> ApiResult<HeatmapView> {
        let query = params
            .query
            .as_deref()
            .ok_or_else(|| ApiError::bad_request("missing `query` parameter").with_token("query"))?;
        let query = QueryExpr::parse(query)?;
        let sort: SortMode = params.sort.as_deref().unwrap_or("loading").parse()?;
        let k = params.k.unwrap_or(DEFAULT_K);
        if k == 0 {
            return Err(ApiError::unprocessable("k must be at least 1"));
        }
        let (models, population, versions) = {
            let inner = self.read();
            (inner.loaded.clone(), inner.summaries(), inner.versions())
        };
        if models.is_empty() {
            return Err(ApiError::unprocessable("no models are loaded"));
        }
        let active = match &params.active {
            Some(id) => Some(
                models
                    .iter()
                    .position(|m| &m.model_id == id)
                    .ok_or_else(|| ApiError::not_found(format!("model `{id}` is not loaded")).with_token(id.as_str()))?,
            ),
            None => None,
        };
        let mut opts = HeatmapOptions { k, active, ..HeatmapOptions::default() };
        if let Some(b) = params.budget {
            opts.word_budget = b;
        }
        let refs: Vec<&EmbeddingModel> = models.iter().map(|m| m.as_ref()).collect();
        let view = build_heatmap(&refs, &query, &opts)?;
        let view = sort_heatmap(&view, &sort, &population)?;
        Ok(envelope(versions, view))
    }

    /// The latest snapshot of the projection for (model, query, k). A new
    /// request runs the pre-warm iterations before answering and keeps
    /// refining in the background; polling returns later snapshots with a
    /// larger `iteration`.
    pub fn projection(&self, params: &ProjectionParams) -> ApiResult<Projection> {
        let model_id = params
            .model
            .as_deref()
            .ok_or_else(|| ApiError::bad_request("missing `model` parameter").with_token("model"))?;
        let query_text = params
            .query
            .as_deref()
            .ok_or_else(|| ApiError::bad_request("missing `query` parameter").with_token("query"))?;
        let query = QueryExpr::parse(query_text)?;
        let k = params.k.unwrap_or(DEFAULT_K);
        let (model, labels, versions) = {
            let inner = self.read();
            let model = inner
                .loaded_model(model_id)
                .cloned()
                .ok_or_else(|| ApiError::not_found(format!("model `{model_id}` is not loaded")).with_token(model_id))?;
            (model, inner.labels.clone(), inner.versions())
        };
        let key = ProjectionKey {
            query: query_text.to_string(),
            k,
            seed: params.seed.unwrap_or(1),
            label_version: labels.version(),
        };
        let prior = {
            let slots = lock(&self.shared.projections);
            match slots.get(model_id) {
                Some(slot) if slot.key == key => return Ok(envelope(slot.versions, lock(&slot.latest).clone())),
                Some(slot) => Some(lock(&slot.latest).clone()),
                None => None,
            }
        };

        let words = explorer_words(&model, &query, k, &labels)?;
        let opts = TsneOptions {
            seed: key.seed,
            ..TsneOptions::default()
        };
        let mut job = ProjectionJob::new(&model, words, opts, prior.as_ref())?;
        job.prewarm();
        let first = job.snapshot();
        let latest = Arc::new(Mutex::new(first.clone()));
        let cancel = Arc::new(AtomicBool::new(false));
        {
            let mut slots = lock(&self.shared.projections);
            if !self.read().loaded_model(model_id).is_some_and(|m| Arc::ptr_eq(m, &model)) {
                return Err(ApiError::not_found(format!("model `{model_id}` was unloaded")).with_token(model_id));
            }
            let slot = ProjectionSlot {
                key,
                versions,
                latest: latest.clone(),
                cancel: cancel.clone(),
            };
            if let Some(old) = slots.insert(model_id.to_string(), slot) {
                old.cancel.store(true, Ordering::SeqCst);
            }
        }
        std::thread::spawn(move || {
            while !job.is_done() && !cancel.load(Ordering::SeqCst) {
                let next = job.tsne().iteration() + SNAPSHOT_EVERY;
                job.run_until(next);
                *lock(&latest) = job.snapshot();
            }
        });
        Ok(envelope(versions, first))
    }

    pub fn parallel(&self) -> ApiResult<ParallelView> {
        let inner = self.read();
        let population = inner.summaries();
        let mut axes = Vec::new();
        let mut columns: Vec<(String, Vec<Option<f64>>)> = Vec::new();
        for name in dimensions(&population) {
            let values: Vec<Option<f64>> = population
                .iter()
                .map(|m| m.dimension(&name).map(|v| v.as_f64()))
                .collect();
            let present = values.iter().flatten();
            let extent = present
                .clone()
                .copied()
                .fold(None, |acc: Option<[f64; 2]>, x| match acc {
                    None => Some([x, x]),
                    Some([lo, hi]) => Some([lo.min(x), hi.max(x)]),
                });
            let hyper = HyperParams::is_field(&name);
            let (kind, categories) = match name.as_str() {
                "architecture" => (
                    "categorical",
                    Some(Architecture::ORDER.iter().map(|a| a.as_str().to_string()).collect()),
                ),
                "hs" => ("boolean", Some(vec!["false".to_string(), "true".to_string()])),
                _ => ("numeric", None),
            };
            axes.push(Axis {
                name: name.clone(),
                role: if hyper { "hyperparameter" } else { "metric" },
                kind,
                extent,
                categories,
                flipped: false,
            });
            columns.push((name, values));
        }
        let models = population
            .iter()
            .enumerate()
            .map(|(i, m)| ParallelRow {
                model_id: m.model_id.clone(),
                loaded: inner.loaded_model(&m.model_id).is_some(),
                matched: inner.filter.matches(m),
                values: columns.iter().map(|(n, v)| (n.clone(), v[i])).collect(),
            })
            .collect();
        Ok(envelope(inner.versions(), ParallelView { dimensions: axes, models }))
    }

    pub fn splom(&self) -> ApiResult<SplomView> {
        let (population, versions) = {
            let inner = self.read();
            (inner.summaries(), inner.versions())
        };
        Ok(envelope(
            versions,
            SplomView {
                correlations: pairwise_correlations(&population),
            },
        ))
    }

    pub fn filters(&self) -> ApiResult<FilterView> {
        let inner = self.read();
        let matched = filter_models(&inner.summaries(), &inner.filter)?;
        Ok(envelope(
            inner.versions(),
            FilterView {
                filter: inner.filter.clone(),
                matched,
            },
        ))
    }

    pub fn set_filter(&self, spec: FilterSpec) -> ApiResult<FilterView> {
        let mut inner = self.write();
        let matched = filter_models(&inner.summaries(), &spec)?;
        inner.filter = spec.clone();
        Ok(envelope(inner.versions(), FilterView { filter: spec, matched }))
    }

    pub fn labels(&self) -> ApiResult<LabelList> {
        let inner = self.read();
        Ok(envelope(
            inner.versions(),
            LabelList {
                labels: inner.labels.list_labels(),
            },
        ))
    }

    fn mutate_labels(
        &self,
        f: impl FnOnce(&mut LabelStore, &dyn Fn(&str) -> bool) -> lexiscope_core::Result<PairLabel>,
    ) -> ApiResult<LabelChange> {
        let mut inner = self.write();
        let models = inner.loaded.clone();
        if models.is_empty() {
            return Err(ApiError::unprocessable("load a model before labeling"));
        }
        let known = |w: &str| models.iter().any(|m| m.index_of(w).is_some());
        let label = f(&mut inner.labels, &known)?;
        let f_t = inner.f_t_scores();
        Ok(envelope(inner.versions(), LabelChange { label, f_t }))
    }

    pub fn add_label(&self, req: &LabelRequest) -> ApiResult<LabelChange> {
        self.mutate_labels(|store, known| store.add_label(&req.word_a, &req.word_b, req.relation, known))
    }

    pub fn update_label(&self, id: u64, req: &LabelRequest) -> ApiResult<LabelChange> {
        self.mutate_labels(|store, known| store.update_label(id, &req.word_a, &req.word_b, req.relation, known))
    }

    pub fn delete_label(&self, id: u64) -> ApiResult<LabelChange> {
        let mut inner = self.write();
        let label = inner.labels.delete_label(id)?;
        let f_t = inner.f_t_scores();
        Ok(envelope(inner.versions(), LabelChange { label, f_t }))
    }

    pub fn sweep_status(&self) -> ApiResult<SweepStatus> {
        let status = lock(&self.shared.sweep).status.clone();
        Ok(envelope(self.versions(), status))
    }

    /// Start a sweep in the background, writing into the run directory.
    /// The current population and labels are saved first so the sweep
    /// resumes from them.
    pub fn start_sweep(&self, mut config: SweepConfig) -> ApiResult<SweepStatus> {
        config.resolve_paths(self.shared.config.data_dir());
        config.validate()?;
        let total = expand(&config)?.len();
        if !config.corpus.is_file() {
            return Err(ApiError::unprocessable(format!("corpus {} does not exist", config.corpus.display())));
        }
        let mut control = lock(&self.shared.sweep);
        if control.status.running {
            return Err(ApiError::conflict("a sweep is already running"));
        }
        let run_dir: PathBuf = self.shared.config.run_dir.clone();
        std::fs::create_dir_all(&run_dir).map_err(|e| ApiError::internal(e.to_string()))?;
        if let Some(state) = self.read().merged_state() {
            export_state(&state, &run_dir.join(STATE_FILE))?;
        }
        let cancel = Arc::new(AtomicBool::new(false));
        control.cancel = Some(cancel.clone());
        control.status = SweepStatus {
            running: true,
            total,
            ..SweepStatus::default()
        };
        let status = control.status.clone();
        drop(control);

        let app = self.clone();
        std::thread::spawn(move || {
            {
                let mut inner = app.write();
                inner.suite = Arc::new(suite_for(&config));
                inner.f_t.invalidate();
            }
            let parallelism = app.shared.config.sweep_parallelism;
            let mut publish = |s: &RunState| app.publish(s);
            let result = run_sweep_with(
                &config,
                &run_dir,
                SweepRun {
                    parallelism,
                    cancel: Some(&cancel),
                    on_update: Some(&mut publish),
                },
            );
            let mut control = lock(&app.shared.sweep);
            control.status.running = false;
            control.cancel = None;
            if let Err(e) = result {
                log::error!("sweep failed: {e}");
                control.status.error = Some(e.to_string());
            }
        });
        Ok(envelope(self.versions(), status))
    }

    /// Ask a running sweep to stop after the jobs in flight.
    pub fn cancel_sweep(&self) -> ApiResult<SweepStatus> {
        let control = lock(&self.shared.sweep);
        match &control.cancel {
            Some(c) => c.store(true, Ordering::SeqCst),
            None => return Err(ApiError::conflict("no sweep is running")),
        }
        let status = control.status.clone();
        drop(control);
        Ok(envelope(self.versions(), status))
    }

    fn publish(&self, s: &RunState) {
        {
            let mut inner = self.write();
            inner.run = Some(s.clone());
            inner.population_version += 1;
        }
        lock(&self.shared.sweep).status.counts = s.counts();
    }

    pub fn export_state(&self) -> ApiResult<StateExport> {
        let inner = self.read();
        let state = inner
            .merged_state()
            .ok_or_else(|| ApiError::not_found("no run state has been created or imported"))?;
        Ok(envelope(inner.versions(), StateExport { state }))
    }

    /// Replace the population and labels. Accepts a bare state document or
    /// the body of `GET /state/export`.
    pub fn import_state(&self, body: &str) -> ApiResult<SessionView> {
        let value: serde_json::Value =
            serde_json::from_str(body).map_err(|e| ApiError::bad_request(format!("state is not JSON: {e}")))?;
        let text = match value.get("state") {
            Some(inner) => inner.to_string(),
            None => body.to_string(),
        };
        let state = RunState::from_json(&text)?;
        if lock(&self.shared.sweep).status.running {
            return Err(ApiError::conflict("cannot import while a sweep is running"));
        }
        let suite = suite_for(&state.config);
        let mut inner = self.write();
        // Model ids name their content, so loaded models stay valid if the
        // new state still lists them as trained.
        let keep: Vec<Arc<EmbeddingModel>> = inner
            .loaded
            .iter()
            .filter(|m| state.entry(&m.model_id).is_some_and(|e| e.status == Status::Trained))
            .cloned()
            .collect();
        {
            let mut slots = lock(&self.shared.projections);
            slots.retain(|id, slot| {
                let stays = keep.iter().any(|m| &m.model_id == id);
                if !stays {
                    slot.cancel.store(true, Ordering::SeqCst);
                }
                stays
            });
        }
        inner.loaded = keep;
        inner.labels = state.labels.clone();
        inner.run = Some(state);
        inner.population_version += 1;
        inner.suite = Arc::new(suite);
        inner.f_t.invalidate();
        Ok(envelope(inner.versions(), self.session_view(&inner)))
    }
}
