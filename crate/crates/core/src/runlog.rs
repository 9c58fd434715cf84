//! Line-delimited JSON run logs.
//!
//! A log is one `header` record, one `point` record per trace point, and a
//! closing `final` record:
//!
//! ```text
//! {"record":"header","instance":"oracle","mode":"guided",...}
//! {"record":"point","eval_index":3,"best_achievement":0.0,...}
//! {"record":"final","termination_reason":"cone_exited",...}
//! ```
//!
//! Unless wall-clock recording is switched on, the same run always produces
//! the same bytes.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::Solution;
use crate::scalarize::{ReferencePoint, WeightVector};
use crate::search::{
    RunObserver, RunStart, RunTrace, SearchConfig, SearchMode, SearchRun, TerminationReason,
    TracePoint,
};

#[derive(Debug, Error)]
pub enum RunLogError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {message}")]
    Structure { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub instance: String,
    pub mode: SearchMode,
    pub reference_point: Option<ReferencePoint>,
    pub weights: Option<WeightVector>,
    pub evaluation_budget: u64,
    pub cone_warmup_evals: u64,
    pub seed: u64,
    pub trace_stride: u64,
    pub initial_best_achievement: Option<f64>,
    pub initial_archive_size: u64,
}

impl RunHeader {
    pub fn new(instance: &str, config: &SearchConfig, start: &RunStart) -> Self {
        Self {
            instance: instance.to_string(),
            mode: config.mode,
            reference_point: config.reference_point.clone(),
            weights: start.weights,
            evaluation_budget: config.evaluation_budget,
            cone_warmup_evals: config.cone_warmup_evals,
            seed: config.seed,
            trace_stride: config.trace_stride,
            initial_best_achievement: start.initial_best_achievement,
            initial_archive_size: start.initial_archive_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferredSolution {
    pub pi: Vec<u32>,
    pub g1: u64,
    pub g2: f64,
    pub achievement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFinal {
    pub termination_reason: TerminationReason,
    pub evaluations: u64,
    pub archive_size: u64,
    pub most_preferred: Option<PreferredSolution>,
}

impl RunFinal {
    pub fn new(run: &SearchRun, config: &SearchConfig) -> Self {
        Self::with_reason(run, config, run.trace.termination_reason)
    }

    pub fn with_reason(run: &SearchRun, config: &SearchConfig, reason: TerminationReason) -> Self {
        let most_preferred = run.most_preferred(config).map(|(member, value)| {
            let Solution { pi, outcome, .. } = &member.solution;
            PreferredSolution {
                pi: pi.as_slice().to_vec(),
                g1: outcome.inventory,
                g2: outcome.routing,
                achievement: value,
            }
        });
        Self {
            termination_reason: reason,
            evaluations: run.evaluations,
            archive_size: run.archive.len() as u64,
            most_preferred,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Header(RunHeader),
    Point(TracePoint),
    Final(RunFinal),
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("log records serialize");
        line.push('\n');
        line
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: RunHeader,
    pub points: Vec<TracePoint>,
    pub final_record: Option<RunFinal>,
}

impl RunLog {
    pub fn from_run(instance: &str, config: &SearchConfig, run: &SearchRun) -> Self {
        Self {
            header: RunHeader::new(instance, config, &run.start),
            points: run.trace.points.clone(),
            final_record: Some(RunFinal::new(run, config)),
        }
    }

    /// The trace, once the run has finished.
    pub fn trace(&self) -> Option<RunTrace> {
        self.final_record.as_ref().map(|f| RunTrace {
            points: self.points.clone(),
            termination_reason: f.termination_reason,
        })
    }

    pub fn render(&self) -> String {
        let mut out = LogRecord::Header(self.header.clone()).to_line();
        for point in &self.points {
            out.push_str(&LogRecord::Point(*point).to_line());
        }
        if let Some(f) = &self.final_record {
            out.push_str(&LogRecord::Final(f.clone()).to_line());
        }
        out
    }

    /// Parses a complete or still-growing log.
    pub fn parse(text: &str) -> Result<Self, RunLogError> {
        let mut header = None;
        let mut points: Vec<TracePoint> = Vec::new();
        let mut final_record = None;
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let structure = |message: &str| RunLogError::Structure {
                line,
                message: message.to_string(),
            };
            let record: LogRecord =
                serde_json::from_str(raw).map_err(|source| RunLogError::Json { line, source })?;
            if final_record.is_some() {
                return Err(structure("record after final"));
            }
            match record {
                LogRecord::Header(h) => {
                    if header.is_some() {
                        return Err(structure("duplicate header"));
                    }
                    header = Some(h);
                }
                _ if header.is_none() => return Err(structure("log must start with a header")),
                LogRecord::Point(p) => {
                    if points.last().is_some_and(|q| q.eval_index >= p.eval_index) {
                        return Err(structure("eval_index not increasing"));
                    }
                    points.push(p);
                }
                LogRecord::Final(f) => final_record = Some(f),
            }
        }
        Ok(Self {
            header: header.ok_or(RunLogError::Structure {
                line: 1,
                message: "empty log".into(),
            })?,
            points,
            final_record,
        })
    }
}

/// Streams a run log while the search runs: the header on start, one line
/// per trace point. Call [`RunLogWriter::finish`] with the completed run.
pub struct RunLogWriter<W: Write> {
    out: W,
    instance: String,
    config: SearchConfig,
    error: Option<io::Error>,
}

impl<W: Write> RunLogWriter<W> {
    pub fn new(out: W, instance: &str, config: &SearchConfig) -> Self {
        Self {
            out,
            instance: instance.to_string(),
            config: config.clone(),
            error: None,
        }
    }

    fn emit(&mut self, record: LogRecord) {
        if self.error.is_none() {
            if let Err(e) = self.out.write_all(record.to_line().as_bytes()) {
                self.error = Some(e);
            }
        }
    }

    pub fn finish(self, run: &SearchRun) -> io::Result<W> {
        let record = RunFinal::new(run, &self.config);
        self.finish_with(record)
    }

    pub fn finish_with(mut self, record: RunFinal) -> io::Result<W> {
        self.emit(LogRecord::Final(record));
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> RunObserver for RunLogWriter<W> {
    fn on_start(&mut self, start: &RunStart) {
        let header = RunHeader::new(&self.instance, &self.config, start);
        self.emit(LogRecord::Header(header));
    }

    fn on_trace_point(&mut self, point: &TracePoint) {
        self.emit(LogRecord::Point(*point));
    }
}
