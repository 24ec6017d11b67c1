//! Edge-to-cloud computation offloading runtime.
//!
//! `edgeflow` executes event-driven programs ("flows") on an IoT gateway and
//! dynamically offloads their computationally intensive parts to a remote
//! executor when local resources run short. The crate bundles everything
//! needed to build and study such a system at desk scale:
//!
//! - [`flow`] — flow graphs (tabs, nodes, wires), their file format, and the
//!   rewrite that extracts an offloadable tab behind an `offload-link` node.
//! - [`engine`] — a message-driven executor for flow graphs producing per-job
//!   records and aggregate statistics.
//! - [`metrics`] — resource snapshots (memory, CPU, temperature, jobs in
//!   flight) from host counters, a simulated gateway, or a replay script.
//! - [`policy`] — threshold rules mapping a metrics snapshot to a
//!   local-or-remote decision, plus `all-of`/`any-of` combinators.
//! - [`remote`] — the offload wire protocol, an in-process remote executor,
//!   its HTTP binding, and the `offload-link` node handler.
//! - [`sim`] — a deterministic virtual gateway with thermal throttling that
//!   reproduces slow thermal experiments in milliseconds of wall time.
//! - [`bench`] — experiment harness: no-offload characterization, strategy
//!   comparison, CSV artifacts, and tolerance checks.
//!
//! Start with the runnable examples (`cargo run --example ...`); each major
//! capability has one. A thin `edgeflow` binary exposes the same harness as
//! `characterize`, `compare`, `serve`, and `rewrite` subcommands.

pub mod bench;
pub mod engine;
pub mod flow;
pub mod metrics;
pub mod policy;
pub mod remote;
pub mod sim;

pub use engine::{EngineStats, JobRecord, Location};
pub use flow::{FlowGraph, RewriteResult};
pub use metrics::MetricsSnapshot;
pub use policy::{OffloadDecision, PolicySpec, Target};
