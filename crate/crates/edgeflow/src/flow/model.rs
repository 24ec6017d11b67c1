//! Flow graph data model.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

/// An event-driven program: tabs, nodes, and the wires connecting them.
///
/// Values are immutable after construction and safe to share across threads.
/// All operations on flows are pure functions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowGraph {
    pub tabs: Vec<Tab>,
    pub nodes: Vec<FlowNode>,
    pub wires: Vec<Wire>,
}

impl FlowGraph {
    /// Flow with no tabs, nodes, or wires. Valid and trivially deployable.
    pub fn empty() -> Self {
        FlowGraph {
            tabs: Vec::new(),
            nodes: Vec::new(),
            wires: Vec::new(),
        }
    }

    /// Looks up a node by id.
    pub fn node(&self, id: &str) -> Option<&FlowNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Looks up a tab by id.
    pub fn tab(&self, id: &str) -> Option<&Tab> {
        self.tabs.iter().find(|t| t.id == id)
    }

    /// Nodes belonging to the given tab, in declaration order.
    pub fn nodes_in_tab<'a>(&'a self, tab_id: &'a str) -> impl Iterator<Item = &'a FlowNode> {
        self.nodes.iter().filter(move |n| n.tab == tab_id)
    }

    /// The tab flagged offloadable, if exactly one exists.
    pub fn offloadable_tab(&self) -> Option<&Tab> {
        let mut it = self.tabs.iter().filter(|t| t.offloadable);
        match (it.next(), it.next()) {
            (Some(t), None) => Some(t),
            _ => None,
        }
    }
}

/// A named sub-graph of a flow; the unit of offloading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tab {
    pub id: String,
    pub name: String,
    /// At most one tab per graph may be flagged offloadable.
    #[serde(default, skip_serializing_if = "is_false")]
    pub offloadable: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One node of a flow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowNode {
    pub id: String,
    /// Id of the tab this node belongs to.
    pub tab: String,
    pub kind: NodeKind,
    /// Kind-specific configuration (`work_units`, `policy`, `target`, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub config: BTreeMap<String, String>,
}

impl FlowNode {
    pub fn config_str(&self, key: &str) -> Option<&str> {
        self.config.get(key).map(String::as_str)
    }
}

/// Node kind. The six built-in kinds have engine-provided handlers; any
/// other kind string parses as [`NodeKind::Custom`] and must be resolved by
/// a registered handler at deploy time.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeKind {
    /// Entry point; messages are triggered here.
    Inject,
    /// CPU-bound node consuming `work_units` of demand.
    Work,
    /// Receiving end of a cross-tab link.
    LinkIn,
    /// Sending end of a cross-tab link; `target` names the link-in it feeds.
    LinkOut,
    /// Decision node routing a job to local or remote execution.
    OffloadLink,
    /// Terminal node; the message payload here is the flow's output.
    Sink,
    /// Any other kind; requires a registered handler.
    Custom(String),
}

impl NodeKind {
    pub fn as_str(&self) -> &str {
        match self {
            NodeKind::Inject => "inject",
            NodeKind::Work => "work",
            NodeKind::LinkIn => "link-in",
            NodeKind::LinkOut => "link-out",
            NodeKind::OffloadLink => "offload-link",
            NodeKind::Sink => "sink",
            NodeKind::Custom(s) => s,
        }
    }

    pub fn from_str_lossy(s: &str) -> NodeKind {
        match s {
            "inject" => NodeKind::Inject,
            "work" => NodeKind::Work,
            "link-in" => NodeKind::LinkIn,
            "link-out" => NodeKind::LinkOut,
            "offload-link" => NodeKind::OffloadLink,
            "sink" => NodeKind::Sink,
            other => NodeKind::Custom(other.to_string()),
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for NodeKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for NodeKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct KindVisitor;
        impl Visitor<'_> for KindVisitor {
            type Value = NodeKind;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a node kind string")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<NodeKind, E> {
                Ok(NodeKind::from_str_lossy(v))
            }
        }
        deserializer.deserialize_str(KindVisitor)
    }
}

/// A directed connection between two nodes on the same tab.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wire {
    pub from: String,
    pub to: String,
}

impl Wire {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Wire {
            from: from.into(),
            to: to.into(),
        }
    }
}

/// Output of [`extract_offloadable`](super::extract_offloadable): the local
/// flow with the offloadable tab replaced by one `offload-link` node, and
/// the extracted tab as a separately deployable flow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteResult {
    pub local_flow: FlowGraph,
    pub remote_flow: FlowGraph,
    /// Id of the spliced-in offload-link node.
    pub offload_link_id: String,
    /// Id of the extracted flow, equal to the extracted tab's id; this is
    /// what the remote executor knows the deployed flow by.
    pub flow_id: String,
}
