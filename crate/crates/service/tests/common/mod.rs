#![allow(dead_code)]

use std::time::Duration;

use irp_core::fixtures::oracle_instance;
use irp_core::{generate, serialize_instance, GeneratorConfig};
use irp_service::{InstanceSource, Registry, RunStatus, SessionSummary};

pub fn oracle_document() -> String {
    serialize_instance(&oracle_instance())
}

pub fn generated_document(seed: u64, n_customers: usize, horizon: u32) -> String {
    let instance = generate(&GeneratorConfig {
        n_customers,
        horizon,
        seed,
        ..GeneratorConfig::default()
    })
    .unwrap();
    serialize_instance(&instance)
}

pub fn session(registry: &Registry, document: String) -> SessionSummary {
    registry.create_session(InstanceSource::Document(document)).unwrap()
}

pub fn wait(registry: &Registry, session_id: &str, run_id: &str) -> RunStatus {
    let status = registry
        .session(session_id)
        .unwrap()
        .run(run_id)
        .unwrap()
        .wait(Duration::from_secs(120));
    assert_ne!(status, RunStatus::Running, "run did not end in time");
    status
}
