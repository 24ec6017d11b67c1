//! Offloading a job to another machine: the wire protocol, the remote
//! executor that serves deployed flows, its HTTP binding, and the
//! `offload-link` node handler that ties policy, metrics, and transport into
//! the engine.
//!
//! The protocol is transport-agnostic request/response; [`HttpTransport`] is
//! the shipped binding and [`InProcessTransport`] the zero-network stand-in
//! for tests and single-process setups. Either way the executor code path is
//! the same, so a job's output payload does not depend on where it ran.

mod client;
mod executor;
mod offload;
mod server;
mod wire;

pub use client::{HttpTransport, TransportError};
pub use executor::{InProcessTransport, RemoteExecutor};
pub use offload::{deploy_with_offload, OffloadDeployError, OffloadLinkBehavior, RemoteTransport, SnapshotFn};
pub use server::{RemoteServer, ServeError};
pub use offload::RemoteDeployFailure;
pub use wire::{
    decode_request, decode_response, encode_request, encode_response, DeployAck, DeployRejection,
    OffloadRequest, OffloadResponse, ViolationReport, WireError,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How to reach a remote executor, and what to do when it fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteEndpoint {
    pub base_url: String,
    pub connect_timeout_ms: u64,
    pub request_timeout_ms: u64,
    pub fallback: Fallback,
}

/// Behavior when a remote execution cannot produce a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fallback {
    /// Run the job locally instead — degraded, not interrupted.
    Local,
    /// Fail the job; useful in tests and when local execution is
    /// unacceptable.
    Fail,
}

impl RemoteEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        RemoteEndpoint {
            base_url: base_url.into(),
            connect_timeout_ms: 1000,
            request_timeout_ms: 120_000,
            fallback: Fallback::Local,
        }
    }

    pub fn validated(self) -> Result<Self, InvalidEndpoint> {
        if self.connect_timeout_ms == 0 || self.request_timeout_ms == 0 {
            return Err(InvalidEndpoint::ZeroTimeout);
        }
        Ok(self)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InvalidEndpoint {
    #[error("endpoint timeouts must be positive")]
    ZeroTimeout,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_defaults_validate() {
        assert!(RemoteEndpoint::new("http://127.0.0.1:1880")
            .validated()
            .is_ok());
    }

    #[test]
    fn zero_timeouts_are_rejected() {
        let endpoint = RemoteEndpoint {
            connect_timeout_ms: 0,
            ..RemoteEndpoint::new("http://x")
        };
        assert_eq!(endpoint.validated(), Err(InvalidEndpoint::ZeroTimeout));
    }
}
