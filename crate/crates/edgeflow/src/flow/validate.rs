//! Structural validation of flow graphs.

use std::collections::HashSet;
use std::fmt;

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use super::model::{FlowGraph, NodeKind};
use super::{CONFIG_POLICY, CONFIG_REMOTE_URL, CONFIG_TARGET, CONFIG_WORK_UNITS};

/// One invariant violation. Violations are data, not errors: [`validate`]
/// returns all of them rather than failing on the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Two nodes share an id.
    DuplicateNodeId { node: String },
    /// Two tabs share an id.
    DuplicateTabId { tab: String },
    /// A wire endpoint references a node that does not exist.
    UnknownWireEndpoint { endpoint: String, end: WireEnd },
    /// A wire connects a node to itself.
    SelfWire { node: String },
    /// A wire connects nodes on different tabs; cross-tab connections must
    /// use link nodes.
    CrossTabWire { from: String, to: String },
    /// A node references a tab that does not exist.
    UnknownTab { node: String, tab: String },
    /// More than one tab is flagged offloadable.
    MultipleOffloadableTabs,
    /// A required kind-specific config key is missing.
    MissingConfig { node: String, key: &'static str },
    /// A `work` node's `work_units` does not parse as a positive number.
    InvalidWorkUnits { node: String, value: String },
    /// A link target names a node that does not exist.
    DanglingLinkTarget { node: String, target: String },
    /// A link target names a node of the wrong kind.
    BadLinkTarget { node: String, target: String },
}

/// Which end of a wire a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireEnd {
    From,
    To,
}

impl Violation {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Violation::DuplicateNodeId { .. } => "duplicate-node-id",
            Violation::DuplicateTabId { .. } => "duplicate-tab-id",
            Violation::UnknownWireEndpoint { .. } => "unknown-wire-endpoint",
            Violation::SelfWire { .. } => "self-wire",
            Violation::CrossTabWire { .. } => "cross-tab-wire",
            Violation::UnknownTab { .. } => "unknown-tab",
            Violation::MultipleOffloadableTabs => "multiple-offloadable-tabs",
            Violation::MissingConfig { .. } => "missing-config",
            Violation::InvalidWorkUnits { .. } => "invalid-work-units",
            Violation::DanglingLinkTarget { .. } => "dangling-link-target",
            Violation::BadLinkTarget { .. } => "bad-link-target",
        }
    }

    /// The node, tab, or wire-endpoint id the violation is about.
    pub fn subject(&self) -> Option<&str> {
        match self {
            Violation::DuplicateNodeId { node } => Some(node),
            Violation::DuplicateTabId { tab } => Some(tab),
            Violation::UnknownWireEndpoint { endpoint, .. } => Some(endpoint),
            Violation::SelfWire { node } => Some(node),
            Violation::CrossTabWire { from, .. } => Some(from),
            Violation::UnknownTab { node, .. } => Some(node),
            Violation::MultipleOffloadableTabs => None,
            Violation::MissingConfig { node, .. } => Some(node),
            Violation::InvalidWorkUnits { node, .. } => Some(node),
            Violation::DanglingLinkTarget { node, .. } => Some(node),
            Violation::BadLinkTarget { node, .. } => Some(node),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNodeId { node } => write!(f, "duplicate node id {node:?}"),
            Violation::DuplicateTabId { tab } => write!(f, "duplicate tab id {tab:?}"),
            Violation::UnknownWireEndpoint { endpoint, end } => {
                let side = match end {
                    WireEnd::From => "from",
                    WireEnd::To => "to",
                };
                write!(f, "wire {side}-endpoint {endpoint:?} is not a node")
            }
            Violation::SelfWire { node } => write!(f, "wire from {node:?} to itself"),
            Violation::CrossTabWire { from, to } => {
                write!(f, "wire {from:?} -> {to:?} crosses tabs; use link nodes")
            }
            Violation::UnknownTab { node, tab } => {
                write!(f, "node {node:?} references unknown tab {tab:?}")
            }
            Violation::MultipleOffloadableTabs => {
                write!(f, "more than one tab is flagged offloadable")
            }
            Violation::MissingConfig { node, key } => {
                write!(f, "node {node:?} is missing config key {key:?}")
            }
            Violation::InvalidWorkUnits { node, value } => {
                write!(f, "node {node:?} has invalid work_units {value:?}")
            }
            Violation::DanglingLinkTarget { node, target } => {
                write!(f, "node {node:?} targets unknown link-in {target:?}")
            }
            Violation::BadLinkTarget { node, target } => {
                write!(f, "node {node:?} targets {target:?}, which is not a link-in")
            }
        }
    }
}

// Wire form used by the remote deploy endpoint's 422 body.
impl Serialize for Violation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Violation", 3)?;
        s.serialize_field("code", self.code())?;
        s.serialize_field("id", &self.subject())?;
        s.serialize_field("detail", &self.to_string())?;
        s.end()
    }
}

/// Checks every flow-graph invariant. Returns the empty list iff all hold.
pub fn validate(flow: &FlowGraph) -> Vec<Violation> {
    let mut violations = Vec::new();

    let mut tab_ids = HashSet::new();
    for tab in &flow.tabs {
        if !tab_ids.insert(tab.id.as_str()) {
            violations.push(Violation::DuplicateTabId {
                tab: tab.id.clone(),
            });
        }
    }

    let mut node_ids = HashSet::new();
    for node in &flow.nodes {
        if !node_ids.insert(node.id.as_str()) {
            violations.push(Violation::DuplicateNodeId {
                node: node.id.clone(),
            });
        }
        if !tab_ids.contains(node.tab.as_str()) {
            violations.push(Violation::UnknownTab {
                node: node.id.clone(),
                tab: node.tab.clone(),
            });
        }
    }

    for wire in &flow.wires {
        if !node_ids.contains(wire.from.as_str()) {
            violations.push(Violation::UnknownWireEndpoint {
                endpoint: wire.from.clone(),
                end: WireEnd::From,
            });
        }
        if !node_ids.contains(wire.to.as_str()) {
            violations.push(Violation::UnknownWireEndpoint {
                endpoint: wire.to.clone(),
                end: WireEnd::To,
            });
        }
        if wire.from == wire.to {
            violations.push(Violation::SelfWire {
                node: wire.from.clone(),
            });
        } else if let (Some(a), Some(b)) = (flow.node(&wire.from), flow.node(&wire.to)) {
            if a.tab != b.tab {
                violations.push(Violation::CrossTabWire {
                    from: wire.from.clone(),
                    to: wire.to.clone(),
                });
            }
        }
    }

    if flow.tabs.iter().filter(|t| t.offloadable).count() > 1 {
        violations.push(Violation::MultipleOffloadableTabs);
    }

    for node in &flow.nodes {
        match &node.kind {
            NodeKind::Work => match node.config_str(CONFIG_WORK_UNITS) {
                None => violations.push(Violation::MissingConfig {
                    node: node.id.clone(),
                    key: CONFIG_WORK_UNITS,
                }),
                Some(raw) => match raw.parse::<f64>() {
                    Ok(v) if v > 0.0 && v.is_finite() => {}
                    _ => violations.push(Violation::InvalidWorkUnits {
                        node: node.id.clone(),
                        value: raw.to_string(),
                    }),
                },
            },
            NodeKind::OffloadLink => {
                for key in [CONFIG_POLICY, CONFIG_REMOTE_URL] {
                    if node.config_str(key).is_none() {
                        violations.push(Violation::MissingConfig {
                            node: node.id.clone(),
                            key,
                        });
                    }
                }
                check_link_target(flow, node, &mut violations);
            }
            NodeKind::LinkOut => check_link_target(flow, node, &mut violations),
            _ => {}
        }
    }

    violations
}

// A link target, when present, must name an existing link-in node — or an
// offload-link, which stands in for an extracted tab's entry after a rewrite.
fn check_link_target(
    flow: &FlowGraph,
    node: &super::model::FlowNode,
    violations: &mut Vec<Violation>,
) {
    let Some(target) = node.config_str(CONFIG_TARGET) else {
        return;
    };
    match flow.node(target) {
        None => violations.push(Violation::DanglingLinkTarget {
            node: node.id.clone(),
            target: target.to_string(),
        }),
        Some(t) => {
            if t.kind != NodeKind::LinkIn && t.kind != NodeKind::OffloadLink {
                violations.push(Violation::BadLinkTarget {
                    node: node.id.clone(),
                    target: target.to_string(),
                });
            }
        }
    }
}
