//! The threaded executor: deploys a validated flow and runs each injected
//! message to completion on its own thread.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::flow::{validate, FlowGraph, NodeKind, Violation};

use super::behavior::{JobContext, NodeRegistry, SpinWorkRunner};
use super::traversal::run_traversal;
use super::{Clock, JobRecord, Location, Message, Payload, SystemClock};

/// Tunables for a deployment.
pub struct EngineConfig {
    /// Wall seconds one work unit costs at full speed.
    pub seconds_per_unit: f64,
    /// How long [`EngineHandle::drain`] waits before giving up.
    pub drain_timeout_s: f64,
    /// Source of all timestamps and work deadlines.
    pub clock: Arc<dyn Clock>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            seconds_per_unit: 0.001,
            drain_timeout_s: 60.0,
            clock: Arc::new(SystemClock::new()),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DeployError {
    #[error("flow is invalid: {0:?}")]
    InvalidFlow(Vec<Violation>),
    #[error("no behavior registered for node kind {kind:?}")]
    UnresolvedKind { kind: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InjectError {
    #[error("flow has no inject node")]
    NoInjectNode,
    #[error("engine is shut down")]
    ShutDown,
}

/// A finished job: its record plus everything the traversal produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedJob {
    pub record: JobRecord,
    /// Payloads collected at sinks and terminal link-outs, in visit order.
    pub outputs: Vec<Payload>,
    /// Failure description when `record.success` is false.
    pub error: Option<String>,
}

/// What [`EngineHandle::drain`] came back with.
#[derive(Debug, Clone, PartialEq)]
pub struct DrainOutcome {
    /// Records of all jobs completed so far, ordered by job id.
    pub records: Vec<JobRecord>,
    /// False when the timeout expired with jobs still in flight, making the
    /// records a partial view.
    pub complete: bool,
}

/// Validates the flow, resolves every node kind against the registry, and
/// arms the inject nodes.
pub fn deploy(
    flow: FlowGraph,
    registry: NodeRegistry,
    config: EngineConfig,
) -> Result<EngineHandle, DeployError> {
    let violations = validate(&flow);
    if !violations.is_empty() {
        return Err(DeployError::InvalidFlow(violations));
    }
    for node in &flow.nodes {
        if registry.resolve(&node.kind).is_none() {
            return Err(DeployError::UnresolvedKind {
                kind: node.kind.as_str().to_string(),
            });
        }
    }
    let inject_nodes: Vec<String> = flow
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Inject)
        .map(|n| n.id.clone())
        .collect();
    Ok(EngineHandle {
        inner: Arc::new(Inner {
            flow,
            registry,
            clock: config.clock,
            seconds_per_unit: config.seconds_per_unit,
            drain_timeout_s: config.drain_timeout_s,
            inject_nodes,
            next_job_id: AtomicU64::new(0),
            shut_down: AtomicBool::new(false),
            state: Mutex::new(State::default()),
            job_done: Condvar::new(),
        }),
    })
}

/// A deployed flow. Cloneable and safe to inject into from many threads;
/// each job runs on its own thread and completes independently.
#[derive(Clone)]
pub struct EngineHandle {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for EngineHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let state = self.inner.state.lock().unwrap();
        f.debug_struct("EngineHandle")
            .field("inject_points", &self.inner.inject_nodes.len())
            .field("in_flight", &state.in_flight)
            .field("completed", &state.completed.len())
            .finish()
    }
}

struct Inner {
    flow: FlowGraph,
    registry: NodeRegistry,
    clock: Arc<dyn Clock>,
    seconds_per_unit: f64,
    drain_timeout_s: f64,
    inject_nodes: Vec<String>,
    next_job_id: AtomicU64,
    shut_down: AtomicBool,
    state: Mutex<State>,
    job_done: Condvar,
}

#[derive(Default)]
struct State {
    in_flight: usize,
    completed: Vec<CompletedJob>,
}

impl EngineHandle {
    /// How many inject nodes are armed.
    pub fn inject_points(&self) -> usize {
        self.inner.inject_nodes.len()
    }

    /// Starts one job with `payload`, entering at the first inject node.
    /// Returns its id immediately; completion is asynchronous.
    pub fn inject(&self, payload: Payload) -> Result<u64, InjectError> {
        if self.inner.shut_down.load(Ordering::SeqCst) {
            return Err(InjectError::ShutDown);
        }
        let entry = self
            .inner
            .inject_nodes
            .first()
            .ok_or(InjectError::NoInjectNode)?
            .clone();
        let job_id = self.inner.next_job_id.fetch_add(1, Ordering::SeqCst) + 1;
        self.inner.state.lock().unwrap().in_flight += 1;

        let inner = Arc::clone(&self.inner);
        std::thread::spawn(move || {
            let started_at = inner.clock.now_s();
            let mut message = Message::new(job_id, payload, (started_at * 1000.0) as u64);
            let work = SpinWorkRunner {
                seconds_per_unit: inner.seconds_per_unit,
            };
            let mut ctx = JobContext {
                clock: inner.clock.as_ref(),
                work: &work,
                location: Location::Local,
            };
            let result = run_traversal(&inner.flow, &inner.registry, &entry, &mut message, &mut ctx);
            let finished_at = inner.clock.now_s();
            let completed = CompletedJob {
                record: JobRecord {
                    job_id,
                    location: ctx.location,
                    duration_s: finished_at - started_at,
                    success: result.is_ok(),
                    started_at,
                    finished_at,
                },
                outputs: result.as_ref().map(|o| o.clone()).unwrap_or_default(),
                error: result.err().map(|e| e.to_string()),
            };
            let mut state = inner.state.lock().unwrap();
            state.completed.push(completed);
            state.in_flight -= 1;
            inner.job_done.notify_all();
        });
        Ok(job_id)
    }

    /// Waits for all in-flight jobs, up to the configured timeout, then
    /// returns all records so far ordered by job id. Safe to call again:
    /// completed records are kept.
    pub fn drain(&self) -> DrainOutcome {
        let deadline = Instant::now() + Duration::from_secs_f64(self.inner.drain_timeout_s);
        let mut state = self.inner.state.lock().unwrap();
        while state.in_flight > 0 {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                break;
            }
            let (next, _) = self.inner.job_done.wait_timeout(state, remaining).unwrap();
            state = next;
        }
        let complete = state.in_flight == 0;
        let mut records: Vec<JobRecord> = state.completed.iter().map(|c| c.record.clone()).collect();
        records.sort_by_key(|r| r.job_id);
        DrainOutcome { records, complete }
    }

    /// Snapshot of every job completed so far, ordered by job id, with
    /// outputs and errors. Call after [`drain`](Self::drain) for the full
    /// picture.
    pub fn completed_jobs(&self) -> Vec<CompletedJob> {
        let state = self.inner.state.lock().unwrap();
        let mut jobs = state.completed.clone();
        jobs.sort_by_key(|c| c.record.job_id);
        jobs
    }

    /// Stops accepting new injections. Jobs already running finish normally.
    pub fn shutdown(&self) {
        self.inner.shut_down.store(true, Ordering::SeqCst);
    }
}
