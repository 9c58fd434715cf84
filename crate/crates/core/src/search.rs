//! Construction of the rough front, and the ±1 multi-point hill climber in
//! its two frontier policies.
//!
//! Both modes keep a frontier of archive members that have not been
//! expanded yet. Expanding a member evaluates all of its neighbors in the
//! fixed order of [`neighbors`](crate::evaluation::neighbors), one budget unit each, and offers every
//! result to the archive; accepted solutions join the frontier and members
//! evicted from the archive silently leave it.
//!
//! * Guided: the frontier is ordered by achievement value with respect to
//!   the reference point (ties: lower inventory, lower distance, older
//!   member). After the warm-up, a round that starts from a member outside
//!   the cone and accepts nothing inside it ends the run.
//! * Offline: first-in first-out, no direction and no cone test.
//!
//! Every step is deterministic; the seed is only carried along and logged.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{Archive, InsertResult, Member, MemberId};
use crate::evaluation::{neighbor_moves, EvaluationError, Evaluator, Outcome, PeriodVector, Solution};
use crate::instance::Instance;
use crate::scalarize::{
    achievement, compute_weights, in_cone, ReferencePoint, ScalarizationError, WeightVector,
};

pub const DEFAULT_TRACE_STRIDE: u64 = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("guided search requires a reference point")]
    MissingReferencePoint,
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("expected a {expected:?} config, got {got:?}")]
    WrongMode { expected: SearchMode, got: SearchMode },
    #[error("archive is empty")]
    EmptyArchive,
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error(transparent)]
    Scalarization(#[from] ScalarizationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Guided,
    Offline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    BudgetExhausted,
    ConeExited,
    FrontierExhausted,
    UserStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub mode: SearchMode,
    /// Steers guided runs; in offline runs it is only used for reporting.
    pub reference_point: Option<ReferencePoint>,
    /// Frozen normalization weights. Derived from the start archive when
    /// absent.
    pub weights: Option<WeightVector>,
    pub evaluation_budget: u64,
    pub cone_warmup_evals: u64,
    pub seed: u64,
    pub trace_stride: u64,
    /// Fill `wall_ms` in trace points. Off by default so that run logs are
    /// reproducible byte for byte.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl SearchConfig {
    pub fn guided(reference_point: ReferencePoint, evaluation_budget: u64) -> Self {
        Self {
            mode: SearchMode::Guided,
            reference_point: Some(reference_point),
            weights: None,
            evaluation_budget,
            cone_warmup_evals: Self::default_warmup(evaluation_budget),
            seed: 0,
            trace_stride: DEFAULT_TRACE_STRIDE,
            record_wall_time: false,
        }
    }

    pub fn offline(evaluation_budget: u64) -> Self {
        Self {
            mode: SearchMode::Offline,
            reference_point: None,
            weights: None,
            evaluation_budget,
            cone_warmup_evals: 0,
            seed: 0,
            trace_stride: DEFAULT_TRACE_STRIDE,
            record_wall_time: false,
        }
    }

    /// A fifth of the budget, at least 100, and always below the budget.
    /// Shorter warm-ups end most runs from mid-front reference points
    /// within a few expansions, before the first in-cone improvement.
    pub fn default_warmup(evaluation_budget: u64) -> u64 {
        (evaluation_budget / 5)
            .max(100)
            .min(evaluation_budget.saturating_sub(1))
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.trace_stride == 0 {
            return Err(SearchError::InvalidConfig("trace_stride must be at least 1".into()));
        }
        if let Some(weights) = &self.weights {
            WeightVector::new(weights.w)?;
        }
        if let Some(rp) = &self.reference_point {
            ReferencePoint::new(rp.r, rp.label.clone())?;
        }
        if self.mode == SearchMode::Guided {
            if self.reference_point.is_none() {
                return Err(SearchError::MissingReferencePoint);
            }
            if self.evaluation_budget == 0 {
                return Err(SearchError::InvalidConfig("budget must be at least 1".into()));
            }
            if self.cone_warmup_evals >= self.evaluation_budget {
                return Err(SearchError::InvalidConfig(format!(
                    "warmup {} must be below budget {}",
                    self.cone_warmup_evals, self.evaluation_budget
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub eval_index: u64,
    pub best_achievement: Option<f64>,
    pub archive_size: u64,
    pub in_cone_count: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub points: Vec<TracePoint>,
    pub termination_reason: TerminationReason,
}

/// What a run knows before its first evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStart {
    pub weights: Option<WeightVector>,
    pub initial_best_achievement: Option<f64>,
    pub initial_archive_size: u64,
}

/// Receives progress from a running search. Callbacks run on the search
/// thread and must return quickly.
pub trait RunObserver {
    fn on_start(&mut self, _start: &RunStart) {}
    fn on_evaluation(&mut self, _eval_index: u64, _solution: &Solution, _result: InsertResult) {}
    fn on_trace_point(&mut self, _point: &TracePoint) {}
}

impl RunObserver for () {}

impl<A: RunObserver, B: RunObserver> RunObserver for (A, B) {
    fn on_start(&mut self, start: &RunStart) {
        self.0.on_start(start);
        self.1.on_start(start);
    }
    fn on_evaluation(&mut self, eval_index: u64, solution: &Solution, result: InsertResult) {
        self.0.on_evaluation(eval_index, solution, result);
        self.1.on_evaluation(eval_index, solution, result);
    }
    fn on_trace_point(&mut self, point: &TracePoint) {
        self.0.on_trace_point(point);
        self.1.on_trace_point(point);
    }
}

impl<T: RunObserver + ?Sized> RunObserver for &mut T {
    fn on_start(&mut self, start: &RunStart) {
        (**self).on_start(start);
    }
    fn on_evaluation(&mut self, eval_index: u64, solution: &Solution, result: InsertResult) {
        (**self).on_evaluation(eval_index, solution, result);
    }
    fn on_trace_point(&mut self, point: &TracePoint) {
        (**self).on_trace_point(point);
    }
}

#[derive(Debug, Clone)]
pub struct SearchRun {
    pub archive: Archive,
    pub trace: RunTrace,
    pub evaluations: u64,
    pub start: RunStart,
}

impl SearchRun {
    /// Most-preferred member for the run's reference point, when it has one.
    pub fn most_preferred(&self, config: &SearchConfig) -> Option<(&Member, f64)> {
        let rp = config.reference_point.as_ref()?;
        let weights = self.start.weights.as_ref()?;
        let member = most_preferred(&self.archive, rp, weights).ok()?;
        Some((member, achievement(&member.solution.outcome, rp, weights)))
    }
}

/// Result of the identical-periods construction.
#[derive(Debug, Clone)]
pub struct InitialFront {
    pub archive: Archive,
    /// First common period value that was not added: either rejected by the
    /// archive, or `horizon + 1` (which would evaluate like `horizon`).
    pub stopped_at: u32,
    pub evaluations: u32,
}

/// Evaluates `(m, ..., m)` for `m = 1, 2, ...` until the archive rejects one
/// or `m` reaches the horizon.
pub fn initial_front(evaluator: &Evaluator) -> Result<InitialFront, SearchError> {
    let n = evaluator.n_customers();
    let mut archive = Archive::new();
    let mut evaluations = 0;
    for m in 1..=evaluator.horizon() {
        let solution = evaluator.evaluate(&PeriodVector::uniform(n, m))?;
        evaluations += 1;
        if !archive.try_insert(solution, 0).is_accepted() {
            return Ok(InitialFront {
                archive,
                stopped_at: m,
                evaluations,
            });
        }
    }
    Ok(InitialFront {
        archive,
        stopped_at: evaluator.horizon() + 1,
        evaluations,
    })
}

pub fn construct_initial_front(instance: &Instance) -> Result<Archive, SearchError> {
    Ok(initial_front(&Evaluator::new(instance))?.archive)
}

fn preference(a: (f64, &Outcome), b: (f64, &Outcome)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.inventory.cmp(&b.1.inventory))
        .then(a.1.routing.total_cmp(&b.1.routing))
}

/// Member with the lowest achievement; ties go to lower inventory, then lower
/// distance, then the older member.
pub fn most_preferred<'a>(
    archive: &'a Archive,
    r: &ReferencePoint,
    w: &WeightVector,
) -> Result<&'a Member, SearchError> {
    archive
        .members()
        .iter()
        .min_by(|a, b| {
            let (x, y) = (&a.solution.outcome, &b.solution.outcome);
            preference((achievement(x, r, w), x), (achievement(y, r, w), y)).then(a.id.cmp(&b.id))
        })
        .ok_or(SearchError::EmptyArchive)
}

#[derive(Debug, Clone, Copy)]
struct GuidedEntry {
    achievement: f64,
    outcome: Outcome,
    id: MemberId,
}

impl PartialEq for GuidedEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for GuidedEntry {}

impl PartialOrd for GuidedEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GuidedEntry {
    // Reversed so that the max-heap pops the most preferred entry.
    fn cmp(&self, other: &Self) -> Ordering {
        preference(
            (other.achievement, &other.outcome),
            (self.achievement, &self.outcome),
        )
        .then(other.id.cmp(&self.id))
    }
}

enum Frontier {
    Guided(BinaryHeap<GuidedEntry>),
    Offline(VecDeque<MemberId>),
}

impl Frontier {
    fn push(&mut self, id: MemberId, outcome: Outcome, score: Option<f64>) {
        match self {
            Frontier::Guided(heap) => heap.push(GuidedEntry {
                achievement: score.expect("guided frontier needs an achievement"),
                outcome,
                id,
            }),
            Frontier::Offline(queue) => queue.push_back(id),
        }
    }

    /// Next member still present in the archive.
    fn pop(&mut self, archive: &Archive) -> Option<MemberId> {
        loop {
            let id = match self {
                Frontier::Guided(heap) => heap.pop()?.id,
                Frontier::Offline(queue) => queue.pop_front()?,
            };
            if archive.contains(id) {
                return Some(id);
            }
        }
    }
}

struct Tracker<'a> {
    reference: Option<(&'a ReferencePoint, WeightVector)>,
    stride: u64,
    clock: Option<Instant>,
    best: Option<f64>,
    points: Vec<TracePoint>,
}

impl Tracker<'_> {
    fn score(&self, outcome: &Outcome) -> Option<f64> {
        self.reference
            .as_ref()
            .map(|(rp, w)| achievement(outcome, rp, w))
    }

    fn in_cone(&self, outcome: &Outcome) -> bool {
        self.reference
            .as_ref()
            .is_some_and(|(rp, _)| in_cone(outcome, rp))
    }

    fn record(&mut self, archive: &Archive, eval_index: u64, observer: &mut dyn RunObserver) {
        if self.points.last().is_some_and(|p| p.eval_index == eval_index) {
            return;
        }
        let in_cone_count = archive
            .members()
            .iter()
            .filter(|m| self.in_cone(&m.solution.outcome))
            .count() as u64;
        let point = TracePoint {
            eval_index,
            best_achievement: self.best,
            archive_size: archive.len() as u64,
            in_cone_count,
            wall_ms: self
                .clock
                .map_or(0, |start| start.elapsed().as_millis() as u64),
        };
        observer.on_trace_point(&point);
        self.points.push(point);
    }
}

/// Runs either mode from `start`. `stop` is polled before every expansion
/// round.
pub fn run_search(
    evaluator: &Evaluator,
    start: Archive,
    config: &SearchConfig,
    observer: &mut dyn RunObserver,
    stop: Option<&AtomicBool>,
) -> Result<SearchRun, SearchError> {
    config.validate()?;
    if start.is_empty() {
        return Err(SearchError::EmptyArchive);
    }
    let guided = config.mode == SearchMode::Guided;
    let weights = match (&config.weights, &config.reference_point) {
        (Some(w), _) => Some(*w),
        (None, Some(_)) => Some(compute_weights(&start.outcomes())?),
        (None, None) => None,
    };
    let mut tracker = Tracker {
        reference: config.reference_point.as_ref().zip(weights),
        stride: config.trace_stride,
        clock: config.record_wall_time.then(Instant::now),
        best: None,
        points: Vec::new(),
    };
    tracker.best = start
        .members()
        .iter()
        .filter_map(|m| tracker.score(&m.solution.outcome))
        .min_by(f64::total_cmp);
    let run_start = RunStart {
        weights,
        initial_best_achievement: tracker.best,
        initial_archive_size: start.len() as u64,
    };
    observer.on_start(&run_start);

    let mut archive = start;
    let mut frontier = if guided {
        Frontier::Guided(BinaryHeap::new())
    } else {
        Frontier::Offline(VecDeque::new())
    };
    for member in archive.members() {
        let outcome = member.solution.outcome;
        frontier.push(member.id, outcome, tracker.score(&outcome));
    }

    let horizon = evaluator.horizon();
    let budget = config.evaluation_budget;
    let mut evaluations = 0u64;
    let reason = 'search: loop {
        if stop.is_some_and(|flag| flag.load(AtomicOrdering::Relaxed)) {
            break TerminationReason::UserStop;
        }
        if evaluations >= budget {
            break TerminationReason::BudgetExhausted;
        }
        let Some(id) = frontier.pop(&archive) else {
            break TerminationReason::FrontierExhausted;
        };
        let member = archive.get(id).expect("frontier ids are live");
        let (pi, origin) = (member.solution.pi.clone(), member.solution.outcome);

        let mut accepted_in_cone = false;
        let mut expansion = evaluator.expansion(&pi)?;
        for (k, value) in neighbor_moves(&pi, horizon) {
            if evaluations >= budget {
                break 'search TerminationReason::BudgetExhausted;
            }
            evaluations += 1;
            let solution = expansion.evaluate_change(k, value)?;
            let outcome = solution.outcome;
            let score = tracker.score(&outcome);
            let improved = match (score, tracker.best) {
                (Some(s), Some(b)) => s < b,
                (Some(_), None) => true,
                _ => false,
            };
            if improved {
                tracker.best = score;
            }
            let id = archive.next_id();
            let result = archive.try_insert(solution.clone(), evaluations);
            if result.is_accepted() {
                frontier.push(id, outcome, score);
                accepted_in_cone |= tracker.in_cone(&outcome);
            }
            observer.on_evaluation(evaluations, &solution, result);
            if improved || evaluations.is_multiple_of(tracker.stride) {
                tracker.record(&archive, evaluations, observer);
            }
        }

        if guided
            && evaluations > config.cone_warmup_evals
            && !accepted_in_cone
            && !tracker.in_cone(&origin)
        {
            break TerminationReason::ConeExited;
        }
    };
    if evaluations > 0 {
        tracker.record(&archive, evaluations, observer);
    }

    Ok(SearchRun {
        archive,
        trace: RunTrace {
            points: tracker.points,
            termination_reason: reason,
        },
        evaluations,
        start: run_start,
    })
}

fn expect_mode(config: &SearchConfig, expected: SearchMode) -> Result<(), SearchError> {
    if config.mode != expected {
        return Err(SearchError::WrongMode {
            expected,
            got: config.mode,
        });
    }
    Ok(())
}

/// Reference-point guided local search.
pub fn run_guided(
    instance: &Instance,
    start: Archive,
    config: &SearchConfig,
) -> Result<SearchRun, SearchError> {
    expect_mode(config, SearchMode::Guided)?;
    run_search(&Evaluator::new(instance), start, config, &mut (), None)
}

/// Direction-free expansion of the whole front.
pub fn run_offline(
    instance: &Instance,
    start: Archive,
    config: &SearchConfig,
) -> Result<SearchRun, SearchError> {
    expect_mode(config, SearchMode::Offline)?;
    run_search(&Evaluator::new(instance), start, config, &mut (), None)
}
