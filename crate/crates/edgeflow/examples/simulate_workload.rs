//! Drive the gateway simulator directly: one workload, one policy, and the
//! raw records and time series it produces.

use std::error::Error;

use edgeflow::engine::stats;
use edgeflow::policy::parse_policy;
use edgeflow::sim::{simulate, GatewayModel, RemoteModel, WorkloadSpec};

fn main() -> Result<(), Box<dyn Error>> {
    let model = GatewayModel::default();
    let workload = WorkloadSpec::OpenLoop {
        inter_arrival_s: 5.0,
        total_jobs: 60,
        seed: 7,
    };
    let policy = parse_policy("temp:75")?;
    let remote = RemoteModel::default();

    let result = simulate(&model, &workload, &policy, &remote)?;

    let stats = stats(&result.records);
    println!(
        "{} jobs: {:.1}% local, avg local {:.2} s, max local {:.2} s",
        stats.jobs_total,
        100.0 * stats.local_fraction,
        stats.avg_local_duration_s,
        stats.max_local_duration_s
    );

    let peak = result
        .series
        .iter()
        .max_by(|a, b| a.temp_c.total_cmp(&b.temp_c))
        .expect("series is never empty");
    println!(
        "peak temperature {:.1} °C at t = {:.1} s ({} MHz)",
        peak.temp_c, peak.t_s, peak.freq_mhz
    );

    println!("\nfirst remote-routed jobs:");
    for record in result
        .records
        .iter()
        .filter(|r| r.location == edgeflow::Location::Remote)
        .take(3)
    {
        println!(
            "  job {} at t = {:.1} s, turnaround {:.2} s",
            record.job_id, record.started_at, record.duration_s
        );
    }
    Ok(())
}
