//! The tab-extraction rewrite: pull the offloadable tab out of a flow and
//! splice an offload-link node into its place.

use thiserror::Error;

use super::model::{FlowGraph, FlowNode, NodeKind, RewriteResult};
use super::validate::{validate, Violation};
use super::{CONFIG_FLOW_ID, CONFIG_POLICY, CONFIG_REMOTE_URL, CONFIG_TARGET};

/// Appended to the extracted tab's id to form the offload-link node id, so
/// repeated rewrites of the same flow produce identical output.
pub const OFFLOAD_LINK_SUFFIX: &str = "-olink";

/// Why a flow cannot be rewritten.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum RewriteError {
    #[error("flow is invalid: {}", format_violations(.0))]
    InvalidFlow(Vec<Violation>),
    #[error("no tab is marked offloadable")]
    NoOffloadableTab,
    #[error("offloadable tab {tab:?} has no link-in entry")]
    NoEntryLink { tab: String },
    #[error("offloadable tab {tab:?} has multiple link-in entries: {links:?}")]
    MultipleEntries { tab: String, links: Vec<String> },
    #[error("offloadable tab {tab:?} has no link-out exit")]
    NoExitLink { tab: String },
    #[error("offloadable tab {tab:?} has multiple link-out exits: {links:?}")]
    MultipleExits { tab: String, links: Vec<String> },
    #[error("entry link-in {entry:?} is not targeted by any node outside its tab")]
    EntryNotLinked { entry: String },
    #[error("exit link-out {exit:?} has no target")]
    ExitUntargeted { exit: String },
    #[error("exit link-out {exit:?} targets {target:?} inside the offloadable tab")]
    ExitTargetInsideTab { exit: String, target: String },
    #[error("generated offload-link id {id:?} collides with an existing node")]
    OffloadLinkIdTaken { id: String },
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Splits `flow` into a local part and a remote part.
///
/// The offloadable tab's nodes and wires move verbatim into `remote_flow`,
/// with the exit link-out's target removed so it becomes the remote flow's
/// output port. In `local_flow` the tab is replaced by a single offload-link
/// node: every link that targeted the tab's entry now targets the
/// offload-link, and the offload-link forwards to whatever the tab's exit
/// used to target.
pub fn extract_offloadable(
    flow: &FlowGraph,
    remote_url: &str,
    policy_spec: &str,
) -> Result<RewriteResult, RewriteError> {
    let violations = validate(flow);
    if !violations.is_empty() {
        return Err(RewriteError::InvalidFlow(violations));
    }

    let tab = flow
        .offloadable_tab()
        .ok_or(RewriteError::NoOffloadableTab)?;

    let entries: Vec<&FlowNode> = flow
        .nodes_in_tab(&tab.id)
        .filter(|n| n.kind == NodeKind::LinkIn)
        .collect();
    let entry = match entries.as_slice() {
        [] => {
            return Err(RewriteError::NoEntryLink {
                tab: tab.id.clone(),
            })
        }
        [one] => *one,
        many => {
            return Err(RewriteError::MultipleEntries {
                tab: tab.id.clone(),
                links: many.iter().map(|n| n.id.clone()).collect(),
            })
        }
    };

    let exits: Vec<&FlowNode> = flow
        .nodes_in_tab(&tab.id)
        .filter(|n| n.kind == NodeKind::LinkOut)
        .collect();
    let exit = match exits.as_slice() {
        [] => {
            return Err(RewriteError::NoExitLink {
                tab: tab.id.clone(),
            })
        }
        [one] => *one,
        many => {
            return Err(RewriteError::MultipleExits {
                tab: tab.id.clone(),
                links: many.iter().map(|n| n.id.clone()).collect(),
            })
        }
    };

    let callers: Vec<&FlowNode> = flow
        .nodes
        .iter()
        .filter(|n| n.tab != tab.id && n.config_str(CONFIG_TARGET) == Some(&entry.id))
        .collect();
    if callers.is_empty() {
        return Err(RewriteError::EntryNotLinked {
            entry: entry.id.clone(),
        });
    }

    let exit_target = exit
        .config_str(CONFIG_TARGET)
        .ok_or_else(|| RewriteError::ExitUntargeted {
            exit: exit.id.clone(),
        })?
        .to_string();
    if flow.node(&exit_target).is_some_and(|n| n.tab == tab.id) {
        return Err(RewriteError::ExitTargetInsideTab {
            exit: exit.id.clone(),
            target: exit_target,
        });
    }

    let offload_link_id = format!("{}{}", tab.id, OFFLOAD_LINK_SUFFIX);
    if flow.node(&offload_link_id).is_some() {
        return Err(RewriteError::OffloadLinkIdTaken {
            id: offload_link_id,
        });
    }

    let mut local_flow = FlowGraph::empty();
    let mut remote_flow = FlowGraph::empty();

    for t in &flow.tabs {
        if t.id == tab.id {
            let mut remote_tab = t.clone();
            remote_tab.offloadable = false;
            remote_flow.tabs.push(remote_tab);
        } else {
            local_flow.tabs.push(t.clone());
        }
    }

    for n in &flow.nodes {
        if n.tab == tab.id {
            let mut moved = n.clone();
            if moved.id == exit.id {
                moved.config.remove(CONFIG_TARGET);
            }
            remote_flow.nodes.push(moved);
        } else {
            let mut kept = n.clone();
            if kept.config_str(CONFIG_TARGET) == Some(&entry.id) {
                kept.config
                    .insert(CONFIG_TARGET.to_string(), offload_link_id.clone());
            }
            local_flow.nodes.push(kept);
        }
    }

    let mut olink = FlowNode {
        id: offload_link_id.clone(),
        tab: callers[0].tab.clone(),
        kind: NodeKind::OffloadLink,
        config: Default::default(),
    };
    olink
        .config
        .insert(CONFIG_POLICY.to_string(), policy_spec.to_string());
    olink
        .config
        .insert(CONFIG_REMOTE_URL.to_string(), remote_url.to_string());
    olink
        .config
        .insert(CONFIG_FLOW_ID.to_string(), tab.id.clone());
    olink.config.insert(CONFIG_TARGET.to_string(), exit_target);
    local_flow.nodes.push(olink);

    for w in &flow.wires {
        let owner = flow.node(&w.from).expect("validated").tab.clone();
        if owner == tab.id {
            remote_flow.wires.push(w.clone());
        } else {
            local_flow.wires.push(w.clone());
        }
    }

    debug_assert_eq!(
        local_flow.nodes.len() + remote_flow.nodes.len(),
        flow.nodes.len() + 1
    );
    debug_assert!(validate(&local_flow).is_empty());
    debug_assert!(validate(&remote_flow).is_empty());

    Ok(RewriteResult {
        local_flow,
        remote_flow,
        offload_link_id,
        flow_id: tab.id.clone(),
    })
}
