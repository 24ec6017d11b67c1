//! The remote executor: holds deployed flows and runs offloaded jobs
//! against them. This is the component a remote instance exposes over HTTP;
//! in-process it doubles as a network-free transport for tests.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::engine::{
    registry_with_defaults, run_traversal, Clock, JobContext, Location, Message, NodeRegistry,
    Payload, SpinWorkRunner, SystemClock,
};
use crate::flow::{validate, FlowGraph, NodeKind};

use super::client::TransportError;
use super::offload::{RemoteDeployFailure, RemoteTransport};
use super::wire::{DeployRejection, OffloadRequest, OffloadResponse, ViolationReport};

/// Serves deployed flows: validates and stores them, executes jobs against
/// them, measures remote service time. Safe to share across request
/// threads.
pub struct RemoteExecutor {
    flows: RwLock<HashMap<String, Arc<Prepared>>>,
    registry: NodeRegistry,
    clock: Arc<dyn Clock>,
    seconds_per_unit: f64,
}

struct Prepared {
    flow: FlowGraph,
    entry: String,
}

impl RemoteExecutor {
    pub fn new(seconds_per_unit: f64) -> Self {
        RemoteExecutor::with_registry(seconds_per_unit, registry_with_defaults())
    }

    /// Uses a custom registry, for remote flows with nonstandard kinds.
    pub fn with_registry(seconds_per_unit: f64, registry: NodeRegistry) -> Self {
        RemoteExecutor {
            flows: RwLock::new(HashMap::new()),
            registry,
            clock: Arc::new(SystemClock::new()),
            seconds_per_unit,
        }
    }

    /// Validates and stores `flow`, returning its id: the id of the tab
    /// holding the entry link-in. Redeploying is idempotent — the same flow
    /// keeps its id and a single stored instance.
    pub fn deploy(&self, flow: FlowGraph) -> Result<String, DeployRejection> {
        let mut reports: Vec<ViolationReport> = validate(&flow)
            .iter()
            .map(violation_report)
            .collect();
        for node in &flow.nodes {
            if self.registry.resolve(&node.kind).is_none() {
                reports.push(ViolationReport {
                    code: "unresolved-kind".into(),
                    id: Some(node.kind.as_str().to_string()),
                    detail: format!("no behavior registered for node kind {:?}", node.kind.as_str()),
                });
            }
        }
        let entries: Vec<_> = flow
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::LinkIn)
            .collect();
        if entries.len() != 1 {
            reports.push(ViolationReport {
                code: "entry-link-count".into(),
                id: None,
                detail: format!(
                    "a deployable flow needs exactly one link-in entry, found {}",
                    entries.len()
                ),
            });
        }
        if !reports.is_empty() {
            return Err(DeployRejection {
                violations: reports,
            });
        }
        let entry = entries[0];
        let flow_id = entry.tab.clone();
        let prepared = Arc::new(Prepared {
            entry: entry.id.clone(),
            flow,
        });
        self.flows.write().unwrap().insert(flow_id.clone(), prepared);
        Ok(flow_id)
    }

    /// The stored flow document, if `flow_id` is deployed.
    pub fn flow(&self, flow_id: &str) -> Option<FlowGraph> {
        self.flows
            .read()
            .unwrap()
            .get(flow_id)
            .map(|p| p.flow.clone())
    }

    /// Runs one job. `None` means the flow id is unknown; execution errors
    /// come back as an error-status response, never as a panic or transport
    /// failure.
    pub fn execute(&self, flow_id: &str, job_id: u64, payload: Payload) -> Option<OffloadResponse> {
        let prepared = self.flows.read().unwrap().get(flow_id).cloned()?;
        let started = self.clock.now_s();
        let mut message = Message::new(job_id, payload, (started * 1000.0) as u64);
        let work = SpinWorkRunner {
            seconds_per_unit: self.seconds_per_unit,
        };
        let mut ctx = JobContext {
            clock: self.clock.as_ref(),
            work: &work,
            location: Location::Local,
        };
        let response = match run_traversal(
            &prepared.flow,
            &self.registry,
            &prepared.entry,
            &mut message,
            &mut ctx,
        ) {
            Ok(outputs) => OffloadResponse::Ok {
                job_id,
                payload: outputs.into_iter().next().unwrap_or_default(),
                remote_duration_s: self.clock.now_s() - started,
            },
            Err(e) => OffloadResponse::Error {
                error_detail: e.to_string(),
            },
        };
        Some(response)
    }
}

fn violation_report(violation: &crate::flow::Violation) -> ViolationReport {
    ViolationReport {
        code: violation.code().to_string(),
        id: violation.subject().map(str::to_string),
        detail: violation.to_string(),
    }
}

/// [`RemoteTransport`] that calls a [`RemoteExecutor`] directly — identical
/// semantics to the HTTP binding, minus the network.
#[derive(Clone)]
pub struct InProcessTransport {
    executor: Arc<RemoteExecutor>,
}

impl InProcessTransport {
    pub fn new(executor: Arc<RemoteExecutor>) -> Self {
        InProcessTransport { executor }
    }
}

impl RemoteTransport for InProcessTransport {
    fn deploy(&self, flow: &FlowGraph) -> Result<String, RemoteDeployFailure> {
        self.executor
            .deploy(flow.clone())
            .map_err(RemoteDeployFailure::Rejected)
    }

    fn execute(&self, request: &OffloadRequest) -> Result<OffloadResponse, TransportError> {
        Ok(self
            .executor
            .execute(&request.flow_id, request.job_id, request.payload.clone())
            .unwrap_or(OffloadResponse::Error {
                error_detail: "unknown flow".into(),
            }))
    }

    fn fetch(&self, flow_id: &str) -> Result<Option<FlowGraph>, TransportError> {
        Ok(self.executor.flow(flow_id))
    }
}
