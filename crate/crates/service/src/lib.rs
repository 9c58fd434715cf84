//! Session host for interactive inventory routing: builds the rough front
//! for an instance, runs guided and offline searches on background threads,
//! and serves traces and exports over a small JSON API.

pub mod error;
pub mod http;
pub mod registry;
pub mod request;

pub use error::{ErrorCode, ServiceError};
pub use registry::{
    ExportFormat, InstanceSource, PlanExport, Registry, RegistryConfig, RunAck, RunStatus, SessionSummary,
    TracePoll,
};
pub use request::{parse_reference_point, run_batch, RunRequest};
