//! The pure traversal: walk one message through a flow graph, invoking node
//! behaviors and collecting outputs. No threads, no time of its own — the
//! caller supplies clock and work runner through the context.

use thiserror::Error;

use crate::flow::{FlowGraph, FlowNode, CONFIG_TARGET};

use super::behavior::{JobContext, NodeAction, NodeRegistry};
use super::{Message, Payload};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("start node {node:?} not found")]
    UnknownStart { node: String },
    #[error("node kind {kind:?} has no registered behavior")]
    UnresolvedKind { kind: String },
    #[error("traversal revisited node {node:?}")]
    Cycle { node: String },
    #[error("node {node:?} failed: {detail}")]
    Behavior { node: String, detail: String },
}

/// Walks `message` through `flow` starting at node `start`, returning every
/// collected output payload in visit order.
///
/// A message leaves a node along its outgoing wires in declaration order,
/// then along its link `target` if it has one; fan-out clones the message
/// per branch. A payload is collected wherever a behavior says [`NodeAction::End`]
/// (sinks) and wherever a message has nowhere left to go (terminal
/// link-outs). Revisiting a node within one branch is an error, so traversal
/// always terminates.
pub fn run_traversal(
    flow: &FlowGraph,
    registry: &NodeRegistry,
    start: &str,
    message: &mut Message,
    ctx: &mut JobContext<'_>,
) -> Result<Vec<Payload>, ExecError> {
    let node = flow.node(start).ok_or_else(|| ExecError::UnknownStart {
        node: start.to_string(),
    })?;
    let mut outputs = Vec::new();
    visit(flow, registry, node, message, ctx, &mut outputs)?;
    Ok(outputs)
}

fn visit(
    flow: &FlowGraph,
    registry: &NodeRegistry,
    node: &FlowNode,
    message: &mut Message,
    ctx: &mut JobContext<'_>,
    outputs: &mut Vec<Payload>,
) -> Result<(), ExecError> {
    if message.hops.iter().any(|h| h == &node.id) {
        return Err(ExecError::Cycle {
            node: node.id.clone(),
        });
    }
    message.hops.push(node.id.clone());

    let behavior = registry
        .resolve(&node.kind)
        .ok_or_else(|| ExecError::UnresolvedKind {
            kind: node.kind.as_str().to_string(),
        })?;
    let action =
        behavior
            .on_message(node, message, ctx)
            .map_err(|detail| ExecError::Behavior {
                node: node.id.clone(),
                detail,
            })?;

    match action {
        NodeAction::End => {
            outputs.push(message.payload.clone());
            return Ok(());
        }
        NodeAction::Work { units } => ctx.work.run(units, ctx.clock),
        NodeAction::Forward => {}
    }

    let mut successors: Vec<&str> = flow
        .wires
        .iter()
        .filter(|w| w.from == node.id)
        .map(|w| w.to.as_str())
        .collect();
    if let Some(target) = node.config_str(CONFIG_TARGET) {
        successors.push(target);
    }

    match successors.as_slice() {
        [] => {
            outputs.push(message.payload.clone());
            Ok(())
        }
        [only] => {
            let next = flow.node(only).ok_or_else(|| ExecError::UnknownStart {
                node: only.to_string(),
            })?;
            visit(flow, registry, next, message, ctx, outputs)
        }
        many => {
            for branch in many {
                let next = flow.node(branch).ok_or_else(|| ExecError::UnknownStart {
                    node: branch.to_string(),
                })?;
                let mut copy = message.clone();
                visit(flow, registry, next, &mut copy, ctx, outputs)?;
            }
            Ok(())
        }
    }
}
