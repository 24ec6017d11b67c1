//! Node behaviors: the per-kind handlers a traversal invokes, and the
//! registry that resolves a flow's kinds before deployment.

use std::collections::HashMap;
use std::sync::Arc;

use crate::flow::{FlowNode, NodeKind, CONFIG_WORK_UNITS};

use super::{Clock, Location, Message};

/// What the runtime should do after a node has seen a message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeAction {
    /// Hand the message to the node's successors.
    Forward,
    /// Consume `units` of CPU work, then forward.
    Work { units: f64 },
    /// Terminate the traversal here and collect the payload as an output.
    End,
}

/// Per-job state a behavior may consult or update.
pub struct JobContext<'a> {
    pub clock: &'a dyn Clock,
    pub work: &'a dyn WorkRunner,
    /// Where the job's computation ran; behaviors that route work elsewhere
    /// set this to `Remote`.
    pub location: Location,
}

impl JobContext<'_> {
    pub fn set_job_location(&mut self, location: Location) {
        self.location = location;
    }
}

/// Handler for one node kind.
pub trait NodeBehavior: Send + Sync {
    /// Reacts to `message` arriving at `node`. May mutate the payload and
    /// the context; returns what the runtime should do next, or an error
    /// description that fails the job.
    fn on_message(
        &self,
        node: &FlowNode,
        message: &mut Message,
        ctx: &mut JobContext<'_>,
    ) -> Result<NodeAction, String>;
}

/// Burns CPU: how `work` nodes convert abstract units into elapsed effort.
pub trait WorkRunner: Send + Sync {
    fn run(&self, units: f64, clock: &dyn Clock);
}

/// Spins the calling thread for `seconds_per_unit · units` seconds — real
/// CPU-bound load, not sleep, so host metrics actually move.
#[derive(Debug, Clone, Copy)]
pub struct SpinWorkRunner {
    pub seconds_per_unit: f64,
}

impl WorkRunner for SpinWorkRunner {
    fn run(&self, units: f64, clock: &dyn Clock) {
        let deadline = clock.now_s() + units * self.seconds_per_unit;
        while clock.now_s() < deadline {
            std::hint::spin_loop();
        }
    }
}

/// Maps node kinds to behaviors. Keyed by the kind's canonical string so
/// custom kinds can be registered alongside the built-in ones.
#[derive(Default, Clone)]
pub struct NodeRegistry {
    behaviors: HashMap<String, Arc<dyn NodeBehavior>>,
}

impl NodeRegistry {
    pub fn new() -> Self {
        NodeRegistry::default()
    }

    pub fn register(&mut self, kind: &NodeKind, behavior: Arc<dyn NodeBehavior>) {
        self.behaviors.insert(kind.as_str().to_string(), behavior);
    }

    pub fn resolve(&self, kind: &NodeKind) -> Option<&Arc<dyn NodeBehavior>> {
        self.behaviors.get(kind.as_str())
    }
}

/// The built-in behaviors: `inject`, `link-in`, `link-out` pass messages
/// through; `work` consumes its configured units and marks the payload;
/// `sink` ends the traversal. `offload-link` is deliberately absent — it
/// needs runtime wiring (policy, transport, gauge) and is registered by the
/// offload runtime.
pub fn registry_with_defaults() -> NodeRegistry {
    struct PassThrough;
    impl NodeBehavior for PassThrough {
        fn on_message(
            &self,
            _node: &FlowNode,
            _message: &mut Message,
            _ctx: &mut JobContext<'_>,
        ) -> Result<NodeAction, String> {
            Ok(NodeAction::Forward)
        }
    }

    struct Sink;
    impl NodeBehavior for Sink {
        fn on_message(
            &self,
            _node: &FlowNode,
            _message: &mut Message,
            _ctx: &mut JobContext<'_>,
        ) -> Result<NodeAction, String> {
            Ok(NodeAction::End)
        }
    }

    struct WorkNode;
    impl NodeBehavior for WorkNode {
        fn on_message(
            &self,
            node: &FlowNode,
            message: &mut Message,
            _ctx: &mut JobContext<'_>,
        ) -> Result<NodeAction, String> {
            let units: f64 = node
                .config_str(CONFIG_WORK_UNITS)
                .ok_or_else(|| format!("work node {:?} has no work_units", node.id))?
                .parse()
                .map_err(|_| format!("work node {:?} has unparseable work_units", node.id))?;
            message
                .payload
                .insert(format!("worked:{}", node.id), format!("{units}"));
            Ok(NodeAction::Work { units })
        }
    }

    let mut registry = NodeRegistry::new();
    let pass: Arc<dyn NodeBehavior> = Arc::new(PassThrough);
    registry.register(&NodeKind::Inject, Arc::clone(&pass));
    registry.register(&NodeKind::LinkIn, Arc::clone(&pass));
    registry.register(&NodeKind::LinkOut, pass);
    registry.register(&NodeKind::Work, Arc::new(WorkNode));
    registry.register(&NodeKind::Sink, Arc::new(Sink));
    registry
}
