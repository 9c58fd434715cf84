//! Run requests, shared by the API and the batch commands so that both
//! build identical search configurations.

use serde::{Deserialize, Serialize};

use irp_core::archive::MemberId;
use irp_core::runlog::RunLog;
use irp_core::search::{run_search, SearchRun};
use irp_core::{construct_initial_front, Archive, Evaluator, Instance, ReferencePoint, SearchConfig, SearchMode};

use crate::error::{ErrorCode, ServiceError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    pub mode: SearchMode,
    /// Free aspiration vector.
    #[serde(default)]
    pub reference_point: Option<ReferencePoint>,
    /// Alternatively, the outcome of an approximation member.
    #[serde(default)]
    pub approximation_member: Option<MemberId>,
    pub evaluation_budget: u64,
    /// Defaults to [`SearchConfig::default_warmup`] for guided runs.
    #[serde(default)]
    pub cone_warmup_evals: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trace_stride: Option<u64>,
}

impl RunRequest {
    pub fn new(mode: SearchMode, evaluation_budget: u64) -> Self {
        Self {
            mode,
            reference_point: None,
            approximation_member: None,
            evaluation_budget,
            cone_warmup_evals: None,
            seed: 0,
            trace_stride: None,
        }
    }

    /// Search configuration against `approximation`. Weights are left
    /// unset, so the engine derives them from the start archive.
    pub fn to_config(&self, approximation: &Archive) -> Result<SearchConfig, ServiceError> {
        let reference_point = match (&self.reference_point, self.approximation_member) {
            (Some(_), Some(_)) => {
                return Err(ServiceError::invalid(
                    "approximation_member",
                    "give either reference_point or approximation_member, not both",
                ))
            }
            (Some(rp), None) => Some(
                ReferencePoint::new(rp.r, rp.label.clone())
                    .map_err(|e| ServiceError::invalid("reference_point", e.to_string()))?,
            ),
            (None, Some(id)) => {
                let member = approximation.get(id).ok_or_else(|| {
                    ServiceError::invalid("approximation_member", format!("no approximation member {id}"))
                })?;
                Some(ReferencePoint::from_outcome(&member.solution.outcome, format!("member {id}")))
            }
            (None, None) => None,
        };
        let mut config = match (self.mode, reference_point) {
            (SearchMode::Guided, None) => {
                return Err(ServiceError::new(
                    ErrorCode::MissingReferencePoint,
                    "guided runs need a reference point",
                )
                .with_field("reference_point"))
            }
            (SearchMode::Guided, Some(rp)) => SearchConfig::guided(rp, self.evaluation_budget),
            (SearchMode::Offline, rp) => SearchConfig {
                reference_point: rp,
                ..SearchConfig::offline(self.evaluation_budget)
            },
        };
        if let Some(warmup) = self.cone_warmup_evals {
            config.cone_warmup_evals = warmup;
        }
        if let Some(stride) = self.trace_stride {
            config.trace_stride = stride;
        }
        config.seed = self.seed;
        config
            .validate()
            .map_err(|e| ServiceError::invalid("evaluation_budget", e.to_string()))?;
        Ok(config)
    }
}

/// Parses `"g1,g2"`, as given on the command line or typed by a user.
pub fn parse_reference_point(text: &str, label: &str) -> Result<ReferencePoint, ServiceError> {
    let bad = || ServiceError::invalid("reference_point", format!("expected \"g1,g2\", got {text:?}"));
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [g1, g2] = parts.as_slice() else {
        return Err(bad());
    };
    let g1: f64 = g1.parse().map_err(|_| bad())?;
    let g2: f64 = g2.parse().map_err(|_| bad())?;
    ReferencePoint::new([g1, g2], label).map_err(|e| ServiceError::invalid("reference_point", e.to_string()))
}

/// Runs a request to completion without a session: construction, then the
/// search. Returns the run and its log.
pub fn run_batch(instance: &Instance, request: &RunRequest) -> anyhow::Result<(SearchConfig, SearchRun, RunLog)> {
    let approximation = construct_initial_front(instance)?;
    let config = request.to_config(&approximation)?;
    let run = run_search(&Evaluator::new(instance), approximation, &config, &mut (), None)?;
    let log = RunLog::from_run(&instance.name, &config, &run);
    Ok((config, run, log))
}
