//! Run the same workload under several offloading strategies and print the
//! comparison table.

use std::error::Error;

use edgeflow::bench::{comparison_csv, render_compare_report, run_compare, BenchConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let config = BenchConfig::default();
    let report = run_compare(&config)?;
    println!("{}", render_compare_report(&report));
    println!("as CSV:\n{}", comparison_csv(&report));
    Ok(())
}
