//! Message-driven execution of flow graphs.
//!
//! A deployed flow accepts injected messages; each message traverses the
//! graph node by node, doing the work its nodes describe, and finishes as a
//! [`JobRecord`]. The traversal logic is pure ([`run_traversal`]); the
//! threaded executor ([`deploy`]) drives it with one thread per job on a
//! pluggable [`Clock`], so the same node behaviors serve live runs and
//! deterministic tests.

mod behavior;
mod executor;
mod traversal;

pub use behavior::{
    registry_with_defaults, JobContext, NodeAction, NodeBehavior, NodeRegistry, SpinWorkRunner,
    WorkRunner,
};
pub use executor::{
    deploy, CompletedJob, DeployError, DrainOutcome, EngineConfig, EngineHandle, InjectError,
};
pub use traversal::{run_traversal, ExecError};

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

/// Message payloads are flat string maps, like environment variables: easy
/// to assert on, order-stable, and trivially serializable.
pub type Payload = BTreeMap<String, String>;

/// One message traversing a flow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    /// Strictly increasing per engine, starting at 1.
    pub job_id: u64,
    pub payload: Payload,
    /// Milliseconds since the engine's epoch at injection time.
    pub injected_at_ms: u64,
    /// Node ids visited so far, in order; never revisits a node.
    pub hops: Vec<String>,
}

impl Message {
    pub fn new(job_id: u64, payload: Payload, injected_at_ms: u64) -> Self {
        Message {
            job_id,
            payload,
            injected_at_ms,
            hops: Vec::new(),
        }
    }
}

/// Where a finished job actually ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Location {
    Local,
    Remote,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Location::Local => "local",
            Location::Remote => "remote",
        })
    }
}

/// Lifecycle summary of one finished job. Timestamps are seconds since the
/// engine's epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct JobRecord {
    pub job_id: u64,
    pub location: Location,
    pub duration_s: f64,
    pub success: bool,
    pub started_at: f64,
    pub finished_at: f64,
}

/// Aggregates over a set of job records, shaped like a strategy-comparison
/// table row. Duration columns cover local jobs only; when no job ran
/// locally they are 0 and `local_count` says why.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineStats {
    pub jobs_total: usize,
    pub local_count: usize,
    pub local_fraction: f64,
    pub avg_local_duration_s: f64,
    pub max_local_duration_s: f64,
    pub success_ratio: f64,
}

impl EngineStats {
    pub fn zero() -> Self {
        EngineStats {
            jobs_total: 0,
            local_count: 0,
            local_fraction: 0.0,
            avg_local_duration_s: 0.0,
            max_local_duration_s: 0.0,
            success_ratio: 0.0,
        }
    }
}

/// Folds records into [`EngineStats`]. Pure: permuting the input changes no
/// field (sums are reordered into a canonical order before adding).
pub fn stats(records: &[JobRecord]) -> EngineStats {
    if records.is_empty() {
        return EngineStats::zero();
    }
    let jobs_total = records.len();
    let mut local_durations: Vec<f64> = records
        .iter()
        .filter(|r| r.location == Location::Local)
        .map(|r| r.duration_s)
        .collect();
    local_durations.sort_by(f64::total_cmp);
    let local_count = local_durations.len();
    let local_sum: f64 = local_durations.iter().sum();
    let successes = records.iter().filter(|r| r.success).count();
    EngineStats {
        jobs_total,
        local_count,
        local_fraction: local_count as f64 / jobs_total as f64,
        avg_local_duration_s: if local_count == 0 {
            0.0
        } else {
            local_sum / local_count as f64
        },
        max_local_duration_s: local_durations.last().copied().unwrap_or(0.0),
        success_ratio: successes as f64 / jobs_total as f64,
    }
}

/// Header of the job-record export format.
pub const JOB_CSV_HEADER: &str = "job_id,location,duration_s,success,started_at,finished_at";

/// Renders records as CSV, timestamps in seconds with millisecond precision.
pub fn records_to_csv(records: &[JobRecord]) -> String {
    let mut out = String::from(JOB_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{:.3},{},{:.3},{:.3}\n",
            r.job_id, r.location, r.duration_s, r.success, r.started_at, r.finished_at
        ));
    }
    out
}

/// Time source for the engine: all timestamps and work deadlines come from
/// here, so swapping the clock swaps real execution for deterministic tests.
pub trait Clock: Send + Sync {
    /// Seconds since this clock's epoch. Must never decrease.
    fn now_s(&self) -> f64;
}

/// Wall clock counting from its creation.
#[derive(Debug)]
pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock {
            start: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock::new()
    }
}

impl Clock for SystemClock {
    fn now_s(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(job_id: u64, location: Location, duration_s: f64, success: bool) -> JobRecord {
        JobRecord {
            job_id,
            location,
            duration_s,
            success,
            started_at: 0.0,
            finished_at: duration_s,
        }
    }

    #[test]
    fn stats_matches_a_comparison_table_row() {
        let mut records: Vec<JobRecord> = Vec::new();
        let local_durations = [20.0, 25.0, 25.0, 25.5, 27.0, 31.3, 31.7];
        for (i, d) in local_durations.iter().enumerate() {
            records.push(record(i as u64 + 1, Location::Local, *d, true));
        }
        for i in 7..10 {
            records.push(record(i as u64 + 1, Location::Remote, 12.0, true));
        }
        let s = stats(&records);
        assert_eq!(s.jobs_total, 10);
        assert_eq!(s.local_count, 7);
        assert!((s.local_fraction - 0.70).abs() < 1e-12);
        assert!((s.avg_local_duration_s - 26.5).abs() < 1e-9);
        assert_eq!(s.max_local_duration_s, 31.7);
        assert_eq!(s.success_ratio, 1.0);
    }

    #[test]
    fn empty_records_give_zero_stats() {
        assert_eq!(stats(&[]), EngineStats::zero());
    }

    #[test]
    fn all_remote_records_zero_the_duration_columns() {
        let records = [record(1, Location::Remote, 9.0, true)];
        let s = stats(&records);
        assert_eq!(s.local_count, 0);
        assert_eq!(s.local_fraction, 0.0);
        assert_eq!(s.avg_local_duration_s, 0.0);
        assert_eq!(s.max_local_duration_s, 0.0);
    }

    #[test]
    fn csv_header_and_precision() {
        let csv = records_to_csv(&[record(1, Location::Local, 24.5002, true)]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(JOB_CSV_HEADER));
        assert_eq!(lines.next(), Some("1,local,24.500,true,0.000,24.500"));
    }

    proptest! {
        #[test]
        fn stats_ignores_record_order(
            durations in proptest::collection::vec((0.0..100.0f64, any::<bool>(), any::<bool>()), 0..40),
            seed in any::<u64>(),
        ) {
            let records: Vec<JobRecord> = durations
                .iter()
                .enumerate()
                .map(|(i, (d, local, ok))| {
                    record(
                        i as u64 + 1,
                        if *local { Location::Local } else { Location::Remote },
                        *d,
                        *ok,
                    )
                })
                .collect();
            let mut shuffled = records.clone();
            // Cheap deterministic shuffle: rotate then swap pairs by seed.
            let n = shuffled.len();
            if n > 1 {
                shuffled.rotate_left((seed as usize) % n);
                shuffled.swap(0, (seed as usize / 7) % n);
            }
            prop_assert_eq!(stats(&records), stats(&shuffled));
        }
    }
}
