//! Replay a recorded metrics trace and show how two policies would have
//! routed jobs at each point in time.

use std::error::Error;

use edgeflow::metrics::ReplayScript;
use edgeflow::policy::{decide, parse_policy};

const TRACE: &str = "\
t_ms,mem_util,cpu_util,cpu_temp_c,jobs_in_flight,cpu_freq_mhz
0,0.35,0.10,55.0,0,1200
10000,0.42,0.55,66.0,2,1200
20000,0.48,0.80,73.0,4,1200
30000,0.55,0.95,79.5,5,1200
40000,0.61,0.97,81.0,6,900
50000,0.58,0.90,78.0,4,900
60000,0.45,0.40,70.0,1,1200
";

fn main() -> Result<(), Box<dyn Error>> {
    let script = ReplayScript::parse(TRACE)?;
    let policies = [parse_policy("temp:75")?, parse_policy("any-of(jobs:4, cpu:0.9)")?];

    for policy in &policies {
        println!("policy {policy}:");
        let mut t_ms = 0;
        while t_ms <= script.end_ms() {
            let snapshot = script.sample_at(t_ms);
            let decision = decide(policy, &snapshot);
            println!(
                "  t={:>2}s -> {:<6} ({})",
                t_ms / 1000,
                decision.target.to_string(),
                decision.reason
            );
            t_ms += 10_000;
        }
        println!();
    }
    Ok(())
}
