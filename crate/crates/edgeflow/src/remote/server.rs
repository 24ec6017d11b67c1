//! Server side of the HTTP binding: exposes a [`RemoteExecutor`] on the
//! three flow endpoints.
//!
//! Routes and status codes:
//!
//! | route                       | outcome                                  |
//! |-----------------------------|------------------------------------------|
//! | `POST /flows`               | 201 `{"flow_id"}` / 422 `{"violations"}` |
//! | `GET /flows/{id}`           | 200 flow document / 404                  |
//! | `POST /flows/{id}/execute`  | 200 response body / 404 unknown flow     |
//!
//! Unreadable or undecodable request bodies get a 400; the 404 for an
//! unknown flow id carries the error-status response body so clients can
//! surface the same detail either way.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use thiserror::Error;
use tiny_http::{Header, Method, Request, Response, Server};

use crate::flow::{parse_flow, serialize_flow, ParseError};

use super::executor::RemoteExecutor;
use super::wire::{decode_request, encode_response, DeployAck, OffloadResponse};

#[derive(Debug, Error)]
#[error("could not serve on {addr}: {detail}")]
pub struct ServeError {
    pub addr: String,
    pub detail: String,
}

/// A running HTTP front end over a shared [`RemoteExecutor`].
///
/// Listens on its own thread and answers each request on a short-lived
/// worker thread, so slow jobs do not block deploys or other jobs.
/// Stops (and joins the listener) on [`stop`](RemoteServer::stop) or drop.
pub struct RemoteServer {
    base_url: String,
    stop: Arc<AtomicBool>,
    listener: Option<JoinHandle<()>>,
}

impl RemoteServer {
    /// Binds `addr` (e.g. `"127.0.0.1:0"` for an ephemeral port) and starts
    /// serving immediately.
    pub fn serve(executor: Arc<RemoteExecutor>, addr: &str) -> Result<RemoteServer, ServeError> {
        let server = Server::http(addr).map_err(|e| ServeError {
            addr: addr.to_string(),
            detail: e.to_string(),
        })?;
        let bound = server.server_addr().to_ip().ok_or_else(|| ServeError {
            addr: addr.to_string(),
            detail: "not a tcp listener".into(),
        })?;
        let stop = Arc::new(AtomicBool::new(false));
        let listener = {
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || listen(server, executor, stop))
        };
        Ok(RemoteServer {
            base_url: format!("http://{bound}"),
            stop,
            listener: Some(listener),
        })
    }

    /// `http://host:port` of the bound listener.
    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(listener) = self.listener.take() {
            let _ = listener.join();
        }
    }
}

impl Drop for RemoteServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn listen(server: Server, executor: Arc<RemoteExecutor>, stop: Arc<AtomicBool>) {
    let started = Instant::now();
    while !stop.load(Ordering::SeqCst) {
        match server.recv_timeout(Duration::from_millis(50)) {
            Ok(Some(request)) => {
                let executor = Arc::clone(&executor);
                std::thread::spawn(move || handle(request, &executor, started));
            }
            Ok(None) => {}
            Err(_) => break,
        }
    }
}

fn handle(mut request: Request, executor: &RemoteExecutor, started: Instant) {
    let method = request.method().clone();
    let path = request.url().split('?').next().unwrap_or("").to_string();
    let mut body = String::new();
    let (status, response_body) = if request.as_reader().read_to_string(&mut body).is_err() {
        (400, error_body("unreadable request body"))
    } else {
        route(&method, &path, &body, executor, started.elapsed().as_secs_f64())
    };
    let json: Header = Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
        .expect("static header");
    let _ = request.respond(
        Response::from_string(response_body)
            .with_status_code(status)
            .with_header(json),
    );
}

fn error_body(detail: &str) -> String {
    encode_response(&OffloadResponse::Error {
        error_detail: detail.into(),
    })
}

fn route(
    method: &Method,
    path: &str,
    body: &str,
    executor: &RemoteExecutor,
    received_at: f64,
) -> (u16, String) {
    let segments: Vec<&str> = path.trim_matches('/').split('/').collect();
    match (method, segments.as_slice()) {
        (Method::Post, ["flows"]) => deploy_route(body, executor),
        (Method::Get, ["flows", flow_id]) => fetch_route(flow_id, executor),
        (Method::Post, ["flows", flow_id, "execute"]) => {
            execute_route(flow_id, body, executor, received_at)
        }
        _ => (404, error_body("no such route")),
    }
}

fn deploy_route(body: &str, executor: &RemoteExecutor) -> (u16, String) {
    let flow = match parse_flow(body) {
        Ok(flow) => flow,
        Err(ParseError::Invalid(violations)) => {
            let rejection = serde_json::json!({ "violations": violations });
            return (422, rejection.to_string());
        }
        Err(e) => return (400, error_body(&format!("undecodable flow document: {e}"))),
    };
    match executor.deploy(flow) {
        Ok(flow_id) => (
            201,
            serde_json::to_string(&DeployAck { flow_id }).expect("plain struct"),
        ),
        Err(rejection) => (
            422,
            serde_json::to_string(&rejection).expect("plain struct"),
        ),
    }
}

fn fetch_route(flow_id: &str, executor: &RemoteExecutor) -> (u16, String) {
    match executor.flow(flow_id) {
        Some(flow) => (200, serialize_flow(&flow)),
        None => (404, error_body("unknown flow")),
    }
}

fn execute_route(
    flow_id: &str,
    body: &str,
    executor: &RemoteExecutor,
    received_at: f64,
) -> (u16, String) {
    let request = match decode_request(body, flow_id, received_at) {
        Ok(request) => request,
        Err(e) => return (400, error_body(&e.to_string())),
    };
    match executor.execute(&request.flow_id, request.job_id, request.payload) {
        Some(response) => (200, encode_response(&response)),
        None => (404, error_body("unknown flow")),
    }
}
