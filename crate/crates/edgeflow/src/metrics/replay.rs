//! Scripted metrics: replay a recorded (or hand-written) trace of readings,
//! so policy behavior can be studied without a host or simulator.

use thiserror::Error;

use super::{FieldValidity, MetricsSnapshot};

/// Exact header a replay script must start with.
pub const REPLAY_HEADER: &str = "t_ms,mem_util,cpu_util,cpu_temp_c,jobs_in_flight,cpu_freq_mhz";

/// A time-indexed sequence of snapshots parsed from comma-separated rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayScript {
    rows: Vec<ReplayRow>,
}

#[derive(Debug, Clone, PartialEq)]
struct ReplayRow {
    t_ms: u64,
    snapshot: MetricsSnapshot,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayParseError {
    #[error("replay script must start with header {REPLAY_HEADER:?}")]
    BadHeader,
    #[error("replay script has no data rows")]
    Empty,
    #[error("line {line}: expected 6 fields, found {found}")]
    WrongFieldCount { line: usize, found: usize },
    #[error("line {line}: field {field:?} does not parse: {value:?}")]
    BadField {
        line: usize,
        field: &'static str,
        value: String,
    },
}

impl ReplayScript {
    /// Parses the CSV text. Rows are sorted by time; duplicate timestamps
    /// keep their relative order (the later row wins at sample time).
    pub fn parse(text: &str) -> Result<Self, ReplayParseError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == REPLAY_HEADER => {}
            _ => return Err(ReplayParseError::BadHeader),
        }

        let mut rows = Vec::new();
        for (index, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let line_no = index + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(ReplayParseError::WrongFieldCount {
                    line: line_no,
                    found: fields.len(),
                });
            }
            fn parse<T: std::str::FromStr>(
                line: usize,
                field: &'static str,
                value: &str,
            ) -> Result<T, ReplayParseError> {
                value.parse().map_err(|_| ReplayParseError::BadField {
                    line,
                    field,
                    value: value.to_string(),
                })
            }
            let t_ms: u64 = parse(line_no, "t_ms", fields[0])?;
            let snapshot = MetricsSnapshot {
                mem_util: parse(line_no, "mem_util", fields[1])?,
                cpu_util: parse(line_no, "cpu_util", fields[2])?,
                cpu_temp_c: parse(line_no, "cpu_temp_c", fields[3])?,
                jobs_in_flight: parse(line_no, "jobs_in_flight", fields[4])?,
                cpu_freq_mhz: parse(line_no, "cpu_freq_mhz", fields[5])?,
                taken_at: t_ms as f64 / 1000.0,
                validity: FieldValidity::all_valid(),
            }
            .sanitized();
            rows.push(ReplayRow { t_ms, snapshot });
        }
        if rows.is_empty() {
            return Err(ReplayParseError::Empty);
        }
        rows.sort_by_key(|r| r.t_ms);
        Ok(ReplayScript { rows })
    }

    /// Returns the last row with `t_ms ≤ t`. Times before the first row
    /// clamp to the first row, so the script covers all of time.
    pub fn sample_at(&self, t_ms: u64) -> MetricsSnapshot {
        let position = self.rows.partition_point(|r| r.t_ms <= t_ms);
        let row = &self.rows[position.saturating_sub(1).min(self.rows.len() - 1)];
        let mut snapshot = row.snapshot;
        snapshot.taken_at = t_ms as f64 / 1000.0;
        snapshot
    }

    /// Time of the final row, i.e. how long the script meaningfully lasts.
    pub fn end_ms(&self) -> u64 {
        self.rows.last().map(|r| r.t_ms).unwrap_or(0)
    }
}
