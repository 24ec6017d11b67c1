//! Split a flow with an offloadable tab into two deployable halves.

use std::error::Error;

use edgeflow::bench::default_offloadable_flow;
use edgeflow::flow::{extract_offloadable, serialize_flow, CONFIG_POLICY, CONFIG_REMOTE_URL};

fn main() -> Result<(), Box<dyn Error>> {
    let flow = default_offloadable_flow(40);
    let rewrite = extract_offloadable(&flow, "http://10.0.0.2:7070", "any-of(jobs:4, temp:75)")?;

    println!("extracted flow id: {}", rewrite.flow_id);
    println!("offload-link node: {}", rewrite.offload_link_id);

    let olink = rewrite
        .local_flow
        .node(&rewrite.offload_link_id)
        .expect("rewrite keeps the offload link in the local flow");
    println!("  policy     = {}", olink.config_str(CONFIG_POLICY).unwrap());
    println!("  remote_url = {}", olink.config_str(CONFIG_REMOTE_URL).unwrap());

    println!("\nlocal half keeps {} nodes:", rewrite.local_flow.nodes.len());
    for node in &rewrite.local_flow.nodes {
        println!("  {} ({})", node.id, node.kind);
    }
    println!("remote half keeps {} nodes:", rewrite.remote_flow.nodes.len());
    for node in &rewrite.remote_flow.nodes {
        println!("  {} ({})", node.id, node.kind);
    }

    println!("\nremote half as JSON:\n{}", serialize_flow(&rewrite.remote_flow));
    Ok(())
}
