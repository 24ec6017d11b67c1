//! The offload wire protocol: body encodings shared by every transport.
//!
//! Execute-request bodies carry only `job_id` and `payload`; the flow id
//! rides in the URL and `sent_at` is the sender's local bookkeeping, never
//! serialized. Bodies are canonical: object keys in fixed order, payload
//! maps sorted, so encoding the decoded body reproduces it byte for byte.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Payload;

/// One job offloaded to a remote executor.
#[derive(Debug, Clone, PartialEq)]
pub struct OffloadRequest {
    pub job_id: u64,
    /// Which deployed flow should run the job; addressed via the URL, not
    /// the body.
    pub flow_id: String,
    pub payload: Payload,
    /// When the sender handed the request to the transport (seconds on the
    /// sender's clock). Not part of the wire format.
    pub sent_at: f64,
}

/// What the remote executor sent back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase", deny_unknown_fields)]
pub enum OffloadResponse {
    Ok {
        job_id: u64,
        payload: Payload,
        remote_duration_s: f64,
    },
    Error {
        error_detail: String,
    },
}

/// One relayed validation violation, as produced by the deploy endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub code: String,
    pub id: Option<String>,
    pub detail: String,
}

/// Body of a 422 deploy response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeployRejection {
    pub violations: Vec<ViolationReport>,
}

/// Body of a 201 deploy response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeployAck {
    pub flow_id: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed wire body: {detail}")]
pub struct WireError {
    pub detail: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExecuteBody {
    job_id: u64,
    payload: Payload,
}

/// Renders the execute-request body.
pub fn encode_request(request: &OffloadRequest) -> String {
    serde_json::to_string(&ExecuteBody {
        job_id: request.job_id,
        payload: request.payload.clone(),
    })
    .expect("string maps always serialize")
}

/// Parses an execute-request body. `flow_id` comes from the URL and
/// `received_at` from the receiver's clock, since neither is in the body.
pub fn decode_request(
    body: &str,
    flow_id: &str,
    received_at: f64,
) -> Result<OffloadRequest, WireError> {
    let parsed: ExecuteBody = serde_json::from_str(body).map_err(|e| WireError {
        detail: e.to_string(),
    })?;
    Ok(OffloadRequest {
        job_id: parsed.job_id,
        flow_id: flow_id.to_string(),
        payload: parsed.payload,
        sent_at: received_at,
    })
}

/// Renders a response body.
pub fn encode_response(response: &OffloadResponse) -> String {
    serde_json::to_string(response).expect("string maps always serialize")
}

/// Parses a response body.
pub fn decode_response(body: &str) -> Result<OffloadResponse, WireError> {
    serde_json::from_str(body).map_err(|e| WireError {
        detail: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn request(job_id: u64, pairs: &[(&str, &str)]) -> OffloadRequest {
        OffloadRequest {
            job_id,
            flow_id: "tab-ocr".into(),
            payload: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            sent_at: 12.5,
        }
    }

    #[test]
    fn request_body_shape_is_pinned() {
        let body = encode_request(&request(7, &[("work_units", "100")]));
        assert_eq!(body, r#"{"job_id":7,"payload":{"work_units":"100"}}"#);
    }

    #[test]
    fn ok_response_shape_is_pinned() {
        let body = encode_response(&OffloadResponse::Ok {
            job_id: 7,
            payload: [("result".to_string(), "text".to_string())].into(),
            remote_duration_s: 0.25,
        });
        assert_eq!(
            body,
            r#"{"status":"ok","job_id":7,"payload":{"result":"text"},"remote_duration_s":0.25}"#
        );
    }

    #[test]
    fn deploy_ack_shape_is_pinned() {
        let body = serde_json::to_string(&DeployAck {
            flow_id: "tab-ocr".into(),
        })
        .unwrap();
        assert_eq!(body, r#"{"flow_id":"tab-ocr"}"#);
    }

    #[test]
    fn error_response_shape_is_pinned() {
        let body = encode_response(&OffloadResponse::Error {
            error_detail: "unknown flow".into(),
        });
        assert_eq!(body, r#"{"status":"error","error_detail":"unknown flow"}"#);
    }

    #[test]
    fn decode_fills_url_and_clock_fields() {
        let decoded = decode_request(r#"{"job_id":3,"payload":{}}"#, "tab-x", 9.0).unwrap();
        assert_eq!(decoded.job_id, 3);
        assert_eq!(decoded.flow_id, "tab-x");
        assert_eq!(decoded.sent_at, 9.0);
    }

    #[test]
    fn malformed_bodies_are_rejected() {
        assert!(decode_request("{", "f", 0.0).is_err());
        assert!(decode_request(r#"{"payload":{}}"#, "f", 0.0).is_err());
        assert!(decode_response(r#"{"status":"maybe"}"#).is_err());
    }

    fn arb_payload() -> impl Strategy<Value = Payload> {
        proptest::collection::btree_map("[a-z_]{1,8}", "[ -~]{0,16}", 0..6)
    }

    proptest! {
        #[test]
        fn request_bytes_survive_a_round_trip(job_id in any::<u64>(), payload in arb_payload()) {
            let request = OffloadRequest {
                job_id,
                flow_id: "f1".into(),
                payload,
                sent_at: 0.0,
            };
            let body = encode_request(&request);
            let decoded = decode_request(&body, "f1", 0.0).unwrap();
            prop_assert_eq!(&decoded, &request);
            prop_assert_eq!(encode_request(&decoded), body);
        }

        #[test]
        fn response_bytes_survive_a_round_trip(
            job_id in any::<u64>(),
            payload in arb_payload(),
            duration in 0.0..3600.0f64,
            error in proptest::option::of("[ -~]{1,32}"),
        ) {
            let response = match error {
                Some(error_detail) => OffloadResponse::Error { error_detail },
                None => OffloadResponse::Ok { job_id, payload, remote_duration_s: duration },
            };
            let body = encode_response(&response);
            let decoded = decode_response(&body).unwrap();
            prop_assert_eq!(&decoded, &response);
            prop_assert_eq!(encode_response(&decoded), body);
        }
    }
}
