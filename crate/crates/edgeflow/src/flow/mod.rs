//! Flow graphs and the TabDeployer rewrite.
//!
//! A flow is an event-driven program: nodes interconnected by wires, grouped
//! into tabs. Messages enter at `inject` nodes, are transformed along wires,
//! and leave at `sink` nodes. Tabs are connected to each other not by wires
//! but by link references: a `link-out` node names the `link-in` node it
//! feeds via its `target` config key.
//!
//! One tab may be flagged `offloadable`. [`extract_offloadable`] cuts that
//! tab out into a separately deployable flow and splices an `offload-link`
//! node into the remaining graph, so a policy can route each message through
//! the extracted sub-flow either in-process or on a remote executor.

mod model;
mod parse;
mod rewrite;
mod validate;

pub use model::{FlowGraph, FlowNode, NodeKind, RewriteResult, Tab, Wire};
pub use parse::{parse_flow, serialize_flow, ParseError};
pub use rewrite::{extract_offloadable, RewriteError, OFFLOAD_LINK_SUFFIX};
pub use validate::{validate, Violation};

/// Config key on `work` nodes: CPU demand in abstract work units.
pub const CONFIG_WORK_UNITS: &str = "work_units";
/// Config key on `offload-link` nodes: the policy spec string.
pub const CONFIG_POLICY: &str = "policy";
/// Config key on `offload-link` nodes: base URL of the remote executor.
pub const CONFIG_REMOTE_URL: &str = "remote_url";
/// Config key on `offload-link` nodes: id of the flow deployed remotely.
pub const CONFIG_FLOW_ID: &str = "flow_id";
/// Config key on `link-out` and `offload-link` nodes: id of the `link-in`
/// node that receives their output. Optional on `link-out`; a link-out
/// without a target is a terminal output port.
pub const CONFIG_TARGET: &str = "target";
