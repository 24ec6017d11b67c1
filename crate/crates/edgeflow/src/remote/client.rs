//! Client side of the HTTP binding: a [`RemoteTransport`] over `ureq`.

use std::time::Duration;

use thiserror::Error;

use crate::flow::{parse_flow, serialize_flow, FlowGraph};

use super::offload::{RemoteDeployFailure, RemoteTransport};
use super::wire::{
    decode_response, encode_request, DeployAck, DeployRejection, OffloadRequest, OffloadResponse,
};
use super::{InvalidEndpoint, RemoteEndpoint};

/// The request never produced a usable response. A response with
/// `status: error` is *not* a transport error — it made it across the wire.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("remote unreachable: {detail}")]
    Unreachable { detail: String },
    #[error("remote timed out: {detail}")]
    Timeout { detail: String },
    #[error("protocol violation: {detail}")]
    Protocol { detail: String },
}

fn protocol(detail: impl Into<String>) -> TransportError {
    TransportError::Protocol {
        detail: detail.into(),
    }
}

/// HTTP [`RemoteTransport`] speaking to a [`RemoteServer`] (or any other
/// implementation of the same endpoints).
///
/// [`RemoteServer`]: super::RemoteServer
pub struct HttpTransport {
    endpoint: RemoteEndpoint,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: RemoteEndpoint) -> Result<Self, InvalidEndpoint> {
        let endpoint = endpoint.validated()?;
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_millis(endpoint.connect_timeout_ms))
            .timeout(Duration::from_millis(endpoint.request_timeout_ms))
            .build();
        Ok(HttpTransport { endpoint, agent })
    }

    pub fn endpoint(&self) -> &RemoteEndpoint {
        &self.endpoint
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.endpoint.base_url.trim_end_matches('/'), path)
    }
}

fn classify(err: ureq::Transport) -> TransportError {
    let detail = err.to_string();
    if detail.contains("timed out") || detail.contains("timeout") {
        return TransportError::Timeout { detail };
    }
    match err.kind() {
        ureq::ErrorKind::Dns | ureq::ErrorKind::ConnectionFailed | ureq::ErrorKind::Io => {
            TransportError::Unreachable { detail }
        }
        _ => TransportError::Protocol { detail },
    }
}

fn read_body(response: ureq::Response) -> Result<String, TransportError> {
    response
        .into_string()
        .map_err(|e| protocol(format!("unreadable response body: {e}")))
}

impl RemoteTransport for HttpTransport {
    fn deploy(&self, flow: &FlowGraph) -> Result<String, RemoteDeployFailure> {
        let outcome = self
            .agent
            .post(&self.url("/flows"))
            .set("content-type", "application/json")
            .send_string(&serialize_flow(flow));
        match outcome {
            Ok(response) if response.status() == 201 => {
                let body = read_body(response)?;
                let ack: DeployAck = serde_json::from_str(&body)
                    .map_err(|e| protocol(format!("bad deploy ack: {e}")))?;
                Ok(ack.flow_id)
            }
            Ok(response) => {
                Err(protocol(format!("unexpected deploy status {}", response.status())).into())
            }
            Err(ureq::Error::Status(422, response)) => {
                let body = read_body(response)?;
                let rejection: DeployRejection = serde_json::from_str(&body)
                    .map_err(|e| protocol(format!("bad rejection body: {e}")))?;
                Err(RemoteDeployFailure::Rejected(rejection))
            }
            Err(ureq::Error::Status(code, _)) => {
                Err(protocol(format!("unexpected deploy status {code}")).into())
            }
            Err(ureq::Error::Transport(t)) => Err(classify(t).into()),
        }
    }

    fn execute(&self, request: &OffloadRequest) -> Result<OffloadResponse, TransportError> {
        let outcome = self
            .agent
            .post(&self.url(&format!("/flows/{}/execute", request.flow_id)))
            .set("content-type", "application/json")
            .send_string(&encode_request(request));
        let (status, response) = match outcome {
            Ok(response) => (response.status(), response),
            Err(ureq::Error::Status(code, response)) => (code, response),
            Err(ureq::Error::Transport(t)) => return Err(classify(t)),
        };
        match status {
            // 404 for an unknown flow id carries the error-status body, so
            // both arrive here and decode identically.
            200 | 404 => {
                let body = read_body(response)?;
                decode_response(&body).map_err(|e| protocol(e.to_string()))
            }
            code => Err(protocol(format!("unexpected execute status {code}"))),
        }
    }

    fn fetch(&self, flow_id: &str) -> Result<Option<FlowGraph>, TransportError> {
        let outcome = self.agent.get(&self.url(&format!("/flows/{flow_id}"))).call();
        match outcome {
            Ok(response) if response.status() == 200 => {
                let body = read_body(response)?;
                let flow = parse_flow(&body)
                    .map_err(|e| protocol(format!("undecodable flow document: {e}")))?;
                Ok(Some(flow))
            }
            Ok(response) => Err(protocol(format!(
                "unexpected fetch status {}",
                response.status()
            ))),
            Err(ureq::Error::Status(404, _)) => Ok(None),
            Err(ureq::Error::Status(code, _)) => {
                Err(protocol(format!("unexpected fetch status {code}")))
            }
            Err(ureq::Error::Transport(t)) => Err(classify(t)),
        }
    }
}
