//! The offload-link node handler and the one-call deployment that wires a
//! rewritten flow to a remote executor.

use std::sync::Arc;

use thiserror::Error;

use crate::engine::{
    deploy, registry_with_defaults, run_traversal, DeployError, EngineConfig, EngineHandle,
    JobContext, Location, Message, NodeAction, NodeBehavior, NodeRegistry,
};
use crate::flow::{
    FlowGraph, FlowNode, NodeKind, RewriteResult, CONFIG_POLICY,
};
use crate::metrics::{JobsGauge, MetricsSnapshot};
use crate::policy::{decide, parse_policy, PolicyParseError, PolicySpec, Target};

use super::client::TransportError;
use super::wire::{DeployRejection, OffloadRequest, OffloadResponse};
use super::Fallback;

/// Produces the admission-time snapshot an offload decision is based on.
pub type SnapshotFn = Arc<dyn Fn() -> MetricsSnapshot + Send + Sync>;

/// A deployable remote side, transport-agnostic: HTTP in production,
/// in-process in tests and single-machine setups.
pub trait RemoteTransport: Send + Sync {
    /// Deploys the flow, returning its id. Idempotent for identical flows.
    fn deploy(&self, flow: &FlowGraph) -> Result<String, RemoteDeployFailure>;
    /// Runs one job on a previously deployed flow.
    fn execute(&self, request: &OffloadRequest) -> Result<OffloadResponse, TransportError>;
    /// The deployed flow document behind `flow_id`, if any.
    fn fetch(&self, flow_id: &str) -> Result<Option<FlowGraph>, TransportError>;
}

#[derive(Debug, Error, PartialEq)]
pub enum RemoteDeployFailure {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("remote rejected the flow: {}", format_rejection(.0))]
    Rejected(DeployRejection),
}

fn format_rejection(rejection: &DeployRejection) -> String {
    rejection
        .violations
        .iter()
        .map(|v| v.detail.as_str())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Handler for `offload-link` nodes: sample metrics, decide, route.
///
/// A Local decision runs the extracted sub-flow in-process with the jobs
/// gauge held around it; a Remote decision sends the job over the
/// transport. Remote failures either fall back to a local run or fail the
/// job, per the configured [`Fallback`]. Exactly one remote attempt is ever
/// made per job.
pub struct OffloadLinkBehavior {
    policy: PolicySpec,
    flow_id: String,
    transport: Arc<dyn RemoteTransport>,
    sampler: SnapshotFn,
    gauge: Arc<JobsGauge>,
    fallback: Fallback,
    subflow: Arc<FlowGraph>,
    subflow_entry: String,
    subflow_registry: Arc<NodeRegistry>,
}

impl OffloadLinkBehavior {
    fn run_local(&self, message: &mut Message, ctx: &mut JobContext<'_>) -> Result<(), String> {
        self.gauge.increment();
        let mut sub = Message::new(message.job_id, message.payload.clone(), message.injected_at_ms);
        let result = run_traversal(
            &self.subflow,
            &self.subflow_registry,
            &self.subflow_entry,
            &mut sub,
            ctx,
        );
        self.gauge.decrement().map_err(|e| e.to_string())?;
        let outputs = result.map_err(|e| e.to_string())?;
        message.payload = outputs.into_iter().next().unwrap_or_default();
        Ok(())
    }
}

impl NodeBehavior for OffloadLinkBehavior {
    fn on_message(
        &self,
        _node: &FlowNode,
        message: &mut Message,
        ctx: &mut JobContext<'_>,
    ) -> Result<NodeAction, String> {
        let snapshot = (self.sampler)();
        let decision = decide(&self.policy, &snapshot);
        match decision.target {
            Target::Local => self.run_local(message, ctx)?,
            Target::Remote => {
                let request = OffloadRequest {
                    job_id: message.job_id,
                    flow_id: self.flow_id.clone(),
                    payload: message.payload.clone(),
                    sent_at: ctx.clock.now_s(),
                };
                let failure = match self.transport.execute(&request) {
                    Ok(OffloadResponse::Ok { payload, .. }) => {
                        message.payload = payload;
                        ctx.set_job_location(Location::Remote);
                        None
                    }
                    Ok(OffloadResponse::Error { error_detail }) => Some(error_detail),
                    Err(transport) => Some(transport.to_string()),
                };
                if let Some(detail) = failure {
                    match self.fallback {
                        Fallback::Local => self.run_local(message, ctx)?,
                        Fallback::Fail => {
                            return Err(format!("remote execution failed: {detail}"))
                        }
                    }
                }
            }
        }
        Ok(NodeAction::Forward)
    }
}

#[derive(Debug, Error)]
pub enum OffloadDeployError {
    #[error("local flow has no offload-link node")]
    NoOffloadLink,
    #[error("offload-link {node:?} has an invalid policy: {source}")]
    BadPolicy {
        node: String,
        source: PolicyParseError,
    },
    #[error("remote flow has no link-in entry")]
    NoEntry,
    #[error("remote deploy failed: {0}")]
    Remote(#[from] RemoteDeployFailure),
    #[error("remote returned flow id {got:?}, expected {expected:?}")]
    FlowIdMismatch { got: String, expected: String },
    #[error("local deploy failed: {0}")]
    Engine(#[from] DeployError),
}

/// Deploys both halves of a rewrite: the remote flow over `transport`, the
/// local flow into an engine whose offload-link routes per the policy
/// embedded in the flow document.
pub fn deploy_with_offload(
    rewrite: &RewriteResult,
    transport: Arc<dyn RemoteTransport>,
    sampler: SnapshotFn,
    gauge: Arc<JobsGauge>,
    fallback: Fallback,
    engine_config: EngineConfig,
) -> Result<EngineHandle, OffloadDeployError> {
    let olink = rewrite
        .local_flow
        .nodes
        .iter()
        .find(|n| n.kind == NodeKind::OffloadLink)
        .ok_or(OffloadDeployError::NoOffloadLink)?;
    let policy_text = olink.config_str(CONFIG_POLICY).unwrap_or("always-local");
    let policy = parse_policy(policy_text).map_err(|source| OffloadDeployError::BadPolicy {
        node: olink.id.clone(),
        source,
    })?;

    let entry = rewrite
        .remote_flow
        .nodes
        .iter()
        .find(|n| n.kind == NodeKind::LinkIn)
        .ok_or(OffloadDeployError::NoEntry)?;

    let flow_id = transport.deploy(&rewrite.remote_flow)?;
    if flow_id != rewrite.flow_id {
        return Err(OffloadDeployError::FlowIdMismatch {
            got: flow_id,
            expected: rewrite.flow_id.clone(),
        });
    }

    let behavior = OffloadLinkBehavior {
        policy,
        flow_id,
        transport,
        sampler,
        gauge,
        fallback,
        subflow: Arc::new(rewrite.remote_flow.clone()),
        subflow_entry: entry.id.clone(),
        subflow_registry: Arc::new(registry_with_defaults()),
    };
    let mut registry = registry_with_defaults();
    registry.register(&NodeKind::OffloadLink, Arc::new(behavior));
    Ok(deploy(rewrite.local_flow.clone(), registry, engine_config)?)
}
