//! Sample the host's real /proc and /sys counters a few times and print the
//! readings, flagging any field served from a degraded fallback.

use std::error::Error;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use edgeflow::metrics::{HostPaths, HostSampler, JobsGauge};

fn main() -> Result<(), Box<dyn Error>> {
    let gauge = Arc::new(JobsGauge::new());
    let paths = HostPaths::default().with_env_overrides();
    let mut sampler = HostSampler::new(paths, Arc::clone(&gauge), 0.4);

    gauge.increment();
    for round in 1..=3 {
        let snap = sampler.sample();
        let degraded: Vec<&str> = [
            ("mem", snap.validity.mem),
            ("cpu", snap.validity.cpu),
            ("temp", snap.validity.temp),
            ("freq", snap.validity.freq),
        ]
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| *name)
        .collect();

        println!(
            "sample {round}: mem {:.2}, cpu {:.2}, temp {:.1} °C, {} MHz, {} job(s) in flight",
            snap.mem_util, snap.cpu_util, snap.cpu_temp_c, snap.cpu_freq_mhz, snap.jobs_in_flight
        );
        if degraded.is_empty() {
            println!("  all readings live");
        } else {
            println!("  degraded fields: {}", degraded.join(", "));
        }
        thread::sleep(Duration::from_millis(200));
    }
    Ok(())
}
