//! Deploy a single-tab flow on the threaded engine, inject jobs, and export
//! the records as CSV.

use std::collections::BTreeMap;
use std::error::Error;

use edgeflow::engine::{
    deploy, records_to_csv, registry_with_defaults, stats, EngineConfig, Payload,
};
use edgeflow::flow::{FlowGraph, FlowNode, NodeKind, Tab, Wire};

fn flow() -> FlowGraph {
    let node = |id: &str, kind: NodeKind, config: &[(&str, &str)]| FlowNode {
        id: id.to_string(),
        tab: "main".to_string(),
        kind,
        config: config
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    };
    FlowGraph {
        tabs: vec![Tab {
            id: "main".to_string(),
            name: "main".to_string(),
            offloadable: false,
        }],
        nodes: vec![
            node("in", NodeKind::Inject, &[]),
            node("crunch", NodeKind::Work, &[("work_units", "20")]),
            node("out", NodeKind::Sink, &[]),
        ],
        wires: vec![Wire::new("in", "crunch"), Wire::new("crunch", "out")],
    }
}

fn main() -> Result<(), Box<dyn Error>> {
    let config = EngineConfig {
        seconds_per_unit: 0.002,
        ..EngineConfig::default()
    };
    let handle = deploy(flow(), registry_with_defaults(), config)?;

    for i in 0..5 {
        let mut payload: Payload = BTreeMap::new();
        payload.insert("item".to_string(), i.to_string());
        let job_id = handle.inject(payload)?;
        println!("injected job {job_id}");
    }

    let outcome = handle.drain();
    println!("drained: {} records, complete = {}", outcome.records.len(), outcome.complete);

    for job in handle.completed_jobs() {
        let first_output = job.outputs.first();
        println!(
            "job {} -> {:?}",
            job.record.job_id,
            first_output.and_then(|p| p.get("item"))
        );
    }

    let stats = stats(&outcome.records);
    println!(
        "\n{} jobs, all local: avg {:.3} s, max {:.3} s",
        stats.jobs_total, stats.avg_local_duration_s, stats.max_local_duration_s
    );
    println!("\n{}", records_to_csv(&outcome.records));
    handle.shutdown();
    Ok(())
}
