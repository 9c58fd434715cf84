//! Sessions, runs and their on-disk logs.
//!
//! Each run searches on its own thread. The search thread appends trace
//! points under a short lock; polls copy out what they need. With a data
//! directory, a session lives in `{dir}/{session}/` as `instance.toml`, and
//! each run as `{run}.log` (streamed line by line) plus `{run}.front.csv`
//! (written when the run ends, just before the log's final record).

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{LineWriter, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard, PoisonError, RwLock};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use irp_core::archive::MemberId;
use irp_core::evaluation::DeliveryPlan;
use irp_core::runlog::{LogRecord, RunFinal, RunHeader, RunLog};
use irp_core::search::{run_search, RunObserver, RunStart};
use irp_core::{
    compute_weights, construct_initial_front, parse_instance, serialize_instance, Archive, Evaluator,
    Instance, PeriodVector, SearchConfig, TerminationReason, TracePoint, WeightVector,
};

use crate::error::{ErrorCode, ServiceError};
use crate::request::RunRequest;

pub const DEFAULT_MAX_CONCURRENT_RUNS: usize = 4;

const INSTANCE_FILE: &str = "instance.toml";

#[derive(Debug, Clone)]
pub struct RegistryConfig {
    pub max_concurrent_runs: usize,
    /// Where sessions and run logs are persisted; in memory only when unset.
    pub data_dir: Option<PathBuf>,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        Self {
            max_concurrent_runs: DEFAULT_MAX_CONCURRENT_RUNS,
            data_dir: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum InstanceSource {
    Path(PathBuf),
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Finished,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub member_id: MemberId,
    pub g1: u64,
    pub g2: f64,
    pub pi: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub instance: String,
    pub n_customers: usize,
    pub horizon: u32,
    /// Sorted by inventory.
    pub approximation: Vec<FrontPoint>,
    pub weights: Option<WeightVector>,
    pub runs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAck {
    pub run_id: String,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoll {
    pub run_id: String,
    pub status: RunStatus,
    pub points: Vec<TracePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination_reason: Option<TerminationReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    FrontCsv,
    RunLog,
    PlanJson,
}

impl ExportFormat {
    pub fn parse(text: &str) -> Result<Self, ServiceError> {
        match text {
            "front_csv" => Ok(Self::FrontCsv),
            "run_log" => Ok(Self::RunLog),
            "plan_json" => Ok(Self::PlanJson),
            _ => Err(ServiceError::new(
                ErrorCode::UnknownFormat,
                format!("unknown export format {text:?}; expected front_csv, run_log or plan_json"),
            )
            .with_field("format")),
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            Self::FrontCsv => "text/csv; charset=utf-8",
            Self::RunLog => "application/x-ndjson",
            Self::PlanJson => "application/json",
        }
    }
}

/// The most-preferred solution of a run with its full delivery plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanExport {
    pub pi: Vec<u32>,
    pub g1: u64,
    pub g2: f64,
    pub achievement: f64,
    pub plan: DeliveryPlan,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(PoisonError::into_inner)
}

#[derive(Debug, Clone)]
struct RunResult {
    final_record: Option<RunFinal>,
    front_csv: Option<String>,
    error: Option<String>,
}

#[derive(Debug)]
struct RunState {
    status: RunStatus,
    header: Option<RunHeader>,
    points: Vec<TracePoint>,
    result: Option<RunResult>,
}

#[derive(Debug)]
pub struct RunHandle {
    pub run_id: String,
    pub config: SearchConfig,
    stop: AtomicBool,
    state: Mutex<RunState>,
    done: Condvar,
}

impl RunHandle {
    fn new(run_id: String, config: SearchConfig) -> Self {
        Self {
            run_id,
            config,
            stop: AtomicBool::new(false),
            state: Mutex::new(RunState {
                status: RunStatus::Running,
                header: None,
                points: Vec::new(),
                result: None,
            }),
            done: Condvar::new(),
        }
    }

    pub fn status(&self) -> RunStatus {
        lock(&self.state).status
    }

    /// Trace points with `eval_index > since`.
    pub fn poll(&self, since: u64) -> TracePoll {
        let state = lock(&self.state);
        let start = state.points.partition_point(|p| p.eval_index <= since);
        let result = state.result.as_ref();
        TracePoll {
            run_id: self.run_id.clone(),
            status: state.status,
            points: state.points[start..].to_vec(),
            termination_reason: result.and_then(|r| r.final_record.as_ref()).map(|f| f.termination_reason),
            error: result.and_then(|r| r.error.clone()),
        }
    }

    /// Blocks until the run has ended or `timeout` passed.
    pub fn wait(&self, timeout: Duration) -> RunStatus {
        let state = lock(&self.state);
        let (state, _) = self
            .done
            .wait_timeout_while(state, timeout, |s| s.status == RunStatus::Running)
            .unwrap_or_else(PoisonError::into_inner);
        state.status
    }

    /// Ends the run: stopped when the search was stopped by the user or
    /// never wrote its final record, finished otherwise.
    fn finish(&self, result: RunResult, interrupted: bool) {
        let mut state = lock(&self.state);
        let stopped = interrupted
            || result
                .final_record
                .as_ref()
                .is_some_and(|f| f.termination_reason == TerminationReason::UserStop);
        state.status = if stopped { RunStatus::Stopped } else { RunStatus::Finished };
        state.result = Some(result);
        drop(state);
        self.done.notify_all();
    }
}

pub struct Session {
    pub session_id: String,
    pub instance: Arc<Instance>,
    pub approximation: Archive,
    evaluator: Arc<Evaluator>,
    weights: Mutex<Option<WeightVector>>,
    runs: RwLock<BTreeMap<String, Arc<RunHandle>>>,
    dir: Option<PathBuf>,
}

impl Session {
    fn new(session_id: String, instance: Instance, dir: Option<PathBuf>) -> Result<Self, ServiceError> {
        let approximation = construct_initial_front(&instance)
            .map_err(|e| ServiceError::new(ErrorCode::InvalidInstance, e.to_string()))?;
        Ok(Self {
            session_id,
            evaluator: Arc::new(Evaluator::new(&instance)),
            instance: Arc::new(instance),
            approximation,
            weights: Mutex::new(None),
            runs: RwLock::new(BTreeMap::new()),
            dir,
        })
    }

    pub fn weights(&self) -> Option<WeightVector> {
        *lock(&self.weights)
    }

    pub fn summary(&self) -> SessionSummary {
        let mut approximation: Vec<FrontPoint> = self
            .approximation
            .members()
            .iter()
            .map(|m| FrontPoint {
                member_id: m.id,
                g1: m.solution.outcome.inventory,
                g2: m.solution.outcome.routing,
                pi: m.solution.pi.as_slice().to_vec(),
            })
            .collect();
        approximation.sort_by(|a, b| a.g1.cmp(&b.g1).then(a.g2.total_cmp(&b.g2)));
        SessionSummary {
            session_id: self.session_id.clone(),
            instance: self.instance.name.clone(),
            n_customers: self.instance.n_customers(),
            horizon: self.instance.horizon,
            approximation,
            weights: self.weights(),
            runs: self.runs.read().unwrap_or_else(PoisonError::into_inner).keys().cloned().collect(),
        }
    }

    pub fn run(&self, run_id: &str) -> Result<Arc<RunHandle>, ServiceError> {
        self.runs
            .read()
            .unwrap_or_else(PoisonError::into_inner)
            .get(run_id)
            .cloned()
            .ok_or_else(|| ServiceError::new(ErrorCode::UnknownRun, format!("unknown run {run_id}")))
    }

    /// Weights for a run steered by a reference point, computed from the
    /// approximation on first use and fixed afterwards.
    fn freeze_weights(&self) -> Result<WeightVector, ServiceError> {
        let mut weights = lock(&self.weights);
        if let Some(w) = *weights {
            return Ok(w);
        }
        let w = compute_weights(&self.approximation.outcomes())
            .map_err(|e| ServiceError::new(ErrorCode::InvalidInstance, e.to_string()))?;
        *weights = Some(w);
        Ok(w)
    }

    fn log_path(&self, run_id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{run_id}.log")))
    }

    fn front_path(&self, run_id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{run_id}.front.csv")))
    }
}

/// Forwards search progress to the run handle and the log file.
struct Publisher {
    handle: Arc<RunHandle>,
    instance: String,
    log: Option<LineWriter<File>>,
    io_error: Option<std::io::Error>,
}

impl Publisher {
    fn write(&mut self, record: &LogRecord) {
        if let (Some(log), None) = (self.log.as_mut(), self.io_error.as_ref()) {
            if let Err(e) = log.write_all(record.to_line().as_bytes()) {
                self.io_error = Some(e);
            }
        }
    }
}

impl RunObserver for Publisher {
    fn on_start(&mut self, start: &RunStart) {
        let header = RunHeader::new(&self.instance, &self.handle.config, start);
        self.write(&LogRecord::Header(header.clone()));
        lock(&self.handle.state).header = Some(header);
    }

    fn on_trace_point(&mut self, point: &TracePoint) {
        self.write(&LogRecord::Point(*point));
        lock(&self.handle.state).points.push(*point);
    }
}

/// A reserved concurrent-run slot, released on drop.
struct Slot(Arc<AtomicUsize>);

impl Drop for Slot {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

pub struct Registry {
    config: RegistryConfig,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    active_runs: Arc<AtomicUsize>,
}

impl Registry {
    pub fn new(config: RegistryConfig) -> Self {
        Self {
            config,
            sessions: RwLock::new(HashMap::new()),
            active_runs: Arc::new(AtomicUsize::new(0)),
        }
    }

    /// Opens a registry and restores every session found in the data
    /// directory. Finished runs come back with their trace and exports;
    /// runs whose log has no final record come back as stopped, without a
    /// result.
    pub fn open(config: RegistryConfig) -> Result<Self, ServiceError> {
        let registry = Self::new(config);
        let Some(root) = registry.config.data_dir.clone() else {
            return Ok(registry);
        };
        fs::create_dir_all(&root).map_err(ServiceError::storage)?;
        let mut entries: Vec<PathBuf> = fs::read_dir(&root)
            .map_err(ServiceError::storage)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(INSTANCE_FILE).is_file())
            .collect();
        entries.sort();
        for dir in entries {
            let session = restore_session(&dir)?;
            registry.insert(session);
        }
        Ok(registry)
    }

    pub fn config(&self) -> &RegistryConfig {
        &self.config
    }

    pub fn active_runs(&self) -> usize {
        self.active_runs.load(Ordering::SeqCst)
    }

    fn insert(&self, session: Session) -> Arc<Session> {
        let session = Arc::new(session);
        self.sessions
            .write()
            .unwrap_or_else(PoisonError::into_inner)
            .insert(session.session_id.clone(), session.clone());
        session
    }

    pub fn session(&self, session_id: &str) -> Result<Arc<Session>, ServiceError> {
        self.sessions
            .read()
            .unwrap_or_else(PoisonError::into_inner)
            .get(session_id)
            .cloned()
            .ok_or_else(|| ServiceError::new(ErrorCode::UnknownSession, format!("unknown session {session_id}")))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .unwrap_or_else(PoisonError::into_inner)
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    /// Parses the instance and builds its approximation. Nothing is
    /// registered when either fails.
    pub fn create_session(&self, source: InstanceSource) -> Result<SessionSummary, ServiceError> {
        let text = match source {
            InstanceSource::Document(text) => text,
            InstanceSource::Path(path) => fs::read_to_string(&path).map_err(|e| {
                ServiceError::new(ErrorCode::InvalidInstance, format!("{}: {e}", path.display())).with_field("path")
            })?,
        };
        let instance = parse_instance(&text)?;
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let dir = self.config.data_dir.as_ref().map(|root| root.join(&session_id));
        let session = Session::new(session_id, instance, dir.clone())?;
        if let Some(dir) = &dir {
            fs::create_dir_all(dir).map_err(ServiceError::storage)?;
            fs::write(dir.join(INSTANCE_FILE), serialize_instance(&session.instance)).map_err(ServiceError::storage)?;
        }
        Ok(self.insert(session).summary())
    }

    /// Validates the request, reserves a run slot and starts the search on a
    /// new thread.
    pub fn start_run(&self, session_id: &str, request: &RunRequest) -> Result<RunAck, ServiceError> {
        let session = self.session(session_id)?;
        let mut config = request.to_config(&session.approximation)?;
        if config.reference_point.is_some() {
            config.weights = Some(session.freeze_weights()?);
        }
        let limit = self.config.max_concurrent_runs;
        self.active_runs
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| (n < limit).then_some(n + 1))
            .map_err(|_| ServiceError::new(ErrorCode::RunLimit, format!("at most {limit} runs may be active at once")))?;
        let slot = Slot(self.active_runs.clone());

        let run_id = uuid::Uuid::new_v4().simple().to_string();
        let log = match session.log_path(&run_id) {
            Some(path) => Some(LineWriter::new(File::create(path).map_err(ServiceError::storage)?)),
            None => None,
        };
        let handle = Arc::new(RunHandle::new(run_id.clone(), config));
        session
            .runs
            .write()
            .unwrap_or_else(PoisonError::into_inner)
            .insert(run_id.clone(), handle.clone());
        let publisher = Publisher {
            handle: handle.clone(),
            instance: session.instance.name.clone(),
            log,
            io_error: None,
        };
        thread::Builder::new()
            .name(format!("run-{run_id}"))
            .spawn(move || {
                let result = panic::catch_unwind(AssertUnwindSafe(|| execute(&session, &handle, publisher)))
                    .unwrap_or_else(|_| RunResult {
                        final_record: None,
                        front_csv: None,
                        error: Some("search panicked".into()),
                    });
                drop(slot);
                handle.finish(result, false);
            })
            .map_err(ServiceError::storage)?;
        Ok(RunAck {
            run_id,
            status: RunStatus::Running,
        })
    }

    pub fn poll_trace(&self, session_id: &str, run_id: &str, since: u64) -> Result<TracePoll, ServiceError> {
        Ok(self.session(session_id)?.run(run_id)?.poll(since))
    }

    /// Asks the run to stop and waits for it to wind down, which takes at
    /// most one expansion round. Stopping an ended run is a no-op.
    pub fn stop_run(&self, session_id: &str, run_id: &str) -> Result<RunAck, ServiceError> {
        let handle = self.session(session_id)?.run(run_id)?;
        handle.stop.store(true, Ordering::SeqCst);
        let status = handle.wait(Duration::from_secs(30));
        Ok(RunAck {
            run_id: handle.run_id.clone(),
            status,
        })
    }

    pub fn export(&self, session_id: &str, run_id: &str, format: ExportFormat) -> Result<String, ServiceError> {
        let session = self.session(session_id)?;
        let handle = session.run(run_id)?;
        let state = lock(&handle.state);
        let result = match (&state.status, &state.result) {
            (RunStatus::Running, _) => {
                return Err(ServiceError::new(ErrorCode::RunActive, "the run has not ended yet"))
            }
            (_, Some(result)) => result,
            (_, None) => {
                return Err(ServiceError::new(ErrorCode::NoPreferredSolution, "the run left no result"))
            }
        };
        let no_result = || ServiceError::new(ErrorCode::NoPreferredSolution, "the run left no result");
        match format {
            ExportFormat::FrontCsv => result.front_csv.clone().ok_or_else(no_result),
            ExportFormat::RunLog => {
                let header = state.header.clone().ok_or_else(no_result)?;
                Ok(RunLog {
                    header,
                    points: state.points.clone(),
                    final_record: result.final_record.clone(),
                }
                .render())
            }
            ExportFormat::PlanJson => {
                let preferred = result
                    .final_record
                    .as_ref()
                    .and_then(|f| f.most_preferred.clone())
                    .ok_or_else(|| {
                        ServiceError::new(
                            ErrorCode::NoPreferredSolution,
                            "the run has no reference point, so no most-preferred solution",
                        )
                    })?;
                drop(state);
                let pi = PeriodVector::new(preferred.pi.clone(), session.instance.horizon)
                    .map_err(|e| ServiceError::storage(e.to_string()))?;
                let solution = session
                    .evaluator
                    .evaluate_with_plan(&pi)
                    .map_err(|e| ServiceError::storage(e.to_string()))?;
                let export = PlanExport {
                    pi: preferred.pi,
                    g1: preferred.g1,
                    g2: preferred.g2,
                    achievement: preferred.achievement,
                    plan: solution.plan.ok_or_else(no_result)?,
                };
                let mut text = serde_json::to_string_pretty(&export).map_err(ServiceError::storage)?;
                text.push('\n');
                Ok(text)
            }
        }
    }
}

fn execute(session: &Session, handle: &RunHandle, mut publisher: Publisher) -> RunResult {
    let outcome = run_search(
        &session.evaluator,
        session.approximation.clone(),
        &handle.config,
        &mut publisher,
        Some(&handle.stop),
    );
    match outcome {
        Ok(run) => {
            let front_csv = run.archive.to_csv();
            if let Some(path) = session.front_path(&handle.run_id) {
                if let Err(e) = fs::write(path, &front_csv) {
                    publisher.io_error.get_or_insert(e);
                }
            }
            let final_record = RunFinal::new(&run, &handle.config);
            publisher.write(&LogRecord::Final(final_record.clone()));
            if let Some(log) = publisher.log.as_mut() {
                if let Err(e) = log.flush() {
                    publisher.io_error.get_or_insert(e);
                }
            }
            RunResult {
                final_record: Some(final_record),
                front_csv: Some(front_csv),
                error: publisher.io_error.map(|e| format!("run log: {e}")),
            }
        }
        Err(e) => RunResult {
            final_record: None,
            front_csv: None,
            error: Some(e.to_string()),
        },
    }
}

fn restore_session(dir: &Path) -> Result<Session, ServiceError> {
    let session_id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| ServiceError::storage(format!("bad session directory {}", dir.display())))?
        .to_string();
    let text = fs::read_to_string(dir.join(INSTANCE_FILE)).map_err(ServiceError::storage)?;
    let session = Session::new(session_id, parse_instance(&text)?, Some(dir.to_path_buf()))?;

    let mut logs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(ServiceError::storage)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "log"))
        .collect();
    logs.sort();
    let mut runs = BTreeMap::new();
    for path in logs {
        let run_id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let text = fs::read_to_string(&path).map_err(ServiceError::storage)?;
        let log = RunLog::parse(&text).map_err(|e| ServiceError::storage(format!("{}: {e}", path.display())))?;
        let header = &log.header;
        if let Some(w) = header.weights.filter(|_| header.reference_point.is_some()) {
            lock(&session.weights).get_or_insert(w);
        }
        let config = SearchConfig {
            mode: header.mode,
            reference_point: header.reference_point.clone(),
            weights: header.weights,
            evaluation_budget: header.evaluation_budget,
            cone_warmup_evals: header.cone_warmup_evals,
            seed: header.seed,
            trace_stride: header.trace_stride,
            record_wall_time: false,
        };
        let handle = RunHandle::new(run_id.clone(), config);
        {
            let mut state = lock(&handle.state);
            state.header = Some(log.header.clone());
            state.points = log.points.clone();
        }
        let front_csv = session
            .front_path(&run_id)
            .and_then(|p| fs::read_to_string(p).ok());
        let interrupted = log.final_record.is_none();
        handle.finish(
            RunResult {
                final_record: log.final_record,
                front_csv,
                error: interrupted.then(|| "run was interrupted".to_string()),
            },
            interrupted,
        );
        runs.insert(run_id, Arc::new(handle));
    }
    *session.runs.write().unwrap_or_else(PoisonError::into_inner) = runs;
    Ok(session)
}
