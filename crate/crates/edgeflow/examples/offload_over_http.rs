//! End to end over HTTP: serve a remote executor, rewrite a flow, and watch
//! a jobs:1 policy send overflow work to the remote side.

use std::collections::BTreeMap;
use std::error::Error;
use std::sync::Arc;

use edgeflow::engine::{EngineConfig, Payload};
use edgeflow::flow::extract_offloadable;
use edgeflow::metrics::{FieldValidity, JobsGauge, MetricsSnapshot};
use edgeflow::remote::{
    deploy_with_offload, Fallback, HttpTransport, RemoteEndpoint, RemoteExecutor, RemoteServer,
    SnapshotFn,
};
use edgeflow::bench::default_offloadable_flow;

fn main() -> Result<(), Box<dyn Error>> {
    let executor = Arc::new(RemoteExecutor::new(0.002));
    let server = RemoteServer::serve(executor, "127.0.0.1:0")?;
    println!("remote executor listening at {}", server.base_url());

    let flow = default_offloadable_flow(50);
    let rewrite = extract_offloadable(&flow, server.base_url(), "jobs:1")?;

    let transport = Arc::new(HttpTransport::new(RemoteEndpoint::new(server.base_url()))?);
    let gauge = Arc::new(JobsGauge::new());
    let sampler: SnapshotFn = {
        let gauge = Arc::clone(&gauge);
        Arc::new(move || MetricsSnapshot {
            jobs_in_flight: gauge.get().max(0) as u32,
            validity: FieldValidity::all_valid(),
            ..MetricsSnapshot::default()
        })
    };

    let config = EngineConfig {
        seconds_per_unit: 0.002,
        ..EngineConfig::default()
    };
    let handle = deploy_with_offload(&rewrite, transport, sampler, gauge, Fallback::Fail, config)?;

    for i in 0..4 {
        let mut payload: Payload = BTreeMap::new();
        payload.insert("item".to_string(), i.to_string());
        handle.inject(payload)?;
    }

    let outcome = handle.drain();
    for record in &outcome.records {
        println!(
            "job {} ran {} in {:.3} s",
            record.job_id, record.location, record.duration_s
        );
    }
    handle.shutdown();
    Ok(())
}
