//! Parse a flow from JSON, validate it, and show what a broken flow reports.

use std::error::Error;

use edgeflow::flow::{parse_flow, validate};

const FLOW_JSON: &str = r#"{
  "tabs": [
    { "id": "main", "name": "main" },
    { "id": "heavy", "name": "heavy", "offloadable": true }
  ],
  "nodes": [
    { "id": "in", "tab": "main", "kind": "inject" },
    { "id": "send", "tab": "main", "kind": "link-out", "config": { "target": "entry" } },
    { "id": "recv", "tab": "main", "kind": "link-in" },
    { "id": "out", "tab": "main", "kind": "sink" },
    { "id": "entry", "tab": "heavy", "kind": "link-in" },
    { "id": "crunch", "tab": "heavy", "kind": "work", "config": { "work_units": "40" } },
    { "id": "exit", "tab": "heavy", "kind": "link-out", "config": { "target": "recv" } }
  ],
  "wires": [
    { "from": "in", "to": "send" },
    { "from": "recv", "to": "out" },
    { "from": "entry", "to": "crunch" },
    { "from": "crunch", "to": "exit" }
  ]
}"#;

fn main() -> Result<(), Box<dyn Error>> {
    let flow = parse_flow(FLOW_JSON)?;
    println!(
        "parsed: {} tabs, {} nodes, {} wires",
        flow.tabs.len(),
        flow.nodes.len(),
        flow.wires.len()
    );
    if let Some(tab) = flow.offloadable_tab() {
        println!("offloadable tab: {} ({})", tab.id, tab.name);
    }

    let violations = validate(&flow);
    println!("violations: {}", violations.len());

    let mut broken = flow.clone();
    broken.wires[0].to = "nowhere".to_string();
    broken.nodes[4].tab = "main".to_string();
    println!("\nafter breaking a wire and moving a node:");
    for violation in validate(&broken) {
        println!("  {violation}");
    }
    Ok(())
}
