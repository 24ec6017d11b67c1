//! Characterize the simulated gateway under sustained full load: job
//! durations before, during, and after thermal throttling.

use std::error::Error;

use edgeflow::bench::{render_characterize_summary, run_characterize, BenchConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let config = BenchConfig::default();
    let report = run_characterize(&config)?;
    println!("{}", render_characterize_summary(&report));

    if let Some(onset) = report.phases.onset_s {
        let hot = report
            .series
            .iter()
            .filter(|p| p.t_s >= onset)
            .take(5)
            .map(|p| format!("{} MHz @ {:.1} °C", p.freq_mhz, p.temp_c))
            .collect::<Vec<_>>()
            .join(", ");
        println!("\nfirst samples after onset: {hot}");
    }
    Ok(())
}
