//! The no-offload characterization run: everything executes locally and the
//! job durations tell the thermal story — a band of fast jobs while the
//! gateway is cold, a throttle onset, and a slower steady band after.

use serde::{Deserialize, Serialize};

use crate::engine::{stats, EngineStats, JobRecord, Location};
use crate::policy::PolicySpec;
use crate::sim::{simulate_with_limit, SeriesPoint, WorkloadSpec};

use super::{within, BenchConfig, BenchError, CheckConfig, CheckOutcome};

/// Duration statistics for the local jobs of one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub count: usize,
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

impl PhaseStats {
    pub fn of(durations: &[f64]) -> Self {
        if durations.is_empty() {
            return PhaseStats {
                count: 0,
                mean_s: 0.0,
                min_s: 0.0,
                max_s: 0.0,
            };
        }
        let sum: f64 = durations.iter().sum();
        let min_s = durations.iter().copied().fold(f64::INFINITY, f64::min);
        let max_s = durations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        PhaseStats {
            count: durations.len(),
            mean_s: sum / durations.len() as f64,
            min_s,
            max_s,
        }
    }
}

/// Local-job statistics split around the first throttle onset.
///
/// Jobs that finished before onset are pre-throttle; jobs that started at
/// least the settle interval after onset are post-throttle; everything
/// straddling the change is transitional and belongs to neither band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSplit {
    /// Time of the first sample at or above the temperature limit; `None`
    /// when the gateway never throttled.
    pub onset_s: Option<f64>,
    pub pre: PhaseStats,
    pub transition: PhaseStats,
    pub post: PhaseStats,
}

fn first_crossing(series: &[SeriesPoint], t_limit_c: f64) -> Option<f64> {
    series
        .iter()
        .find(|point| point.temp_c >= t_limit_c)
        .map(|point| point.t_s)
}

/// Local-job durations per phase: (pre, transition, post).
fn partition_durations(
    records: &[JobRecord],
    onset_s: Option<f64>,
    settle_s: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut pre = Vec::new();
    let mut transition = Vec::new();
    let mut post = Vec::new();
    for record in records {
        if record.location != Location::Local {
            continue;
        }
        match onset_s {
            None => pre.push(record.duration_s),
            Some(onset) => {
                if record.finished_at < onset {
                    pre.push(record.duration_s);
                } else if record.started_at >= onset + settle_s {
                    post.push(record.duration_s);
                } else {
                    transition.push(record.duration_s);
                }
            }
        }
    }
    (pre, transition, post)
}

/// Splits local-job durations into pre/transition/post phases around the
/// first time the sampled temperature reaches `t_limit_c`.
pub fn split_phases(
    records: &[JobRecord],
    series: &[SeriesPoint],
    t_limit_c: f64,
    settle_s: f64,
) -> PhaseSplit {
    let onset_s = first_crossing(series, t_limit_c);
    let (pre, transition, post) = partition_durations(records, onset_s, settle_s);
    PhaseSplit {
        onset_s,
        pre: PhaseStats::of(&pre),
        transition: PhaseStats::of(&transition),
        post: PhaseStats::of(&post),
    }
}

/// Everything the characterization experiment produced: raw records and
/// series for the CSVs, aggregate stats, the phase split, and the evaluated
/// tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterizeReport {
    pub workload: WorkloadSpec,
    pub records: Vec<JobRecord>,
    pub series: Vec<SeriesPoint>,
    pub stats: EngineStats,
    /// The temperature limit the phase split keyed on.
    pub t_limit_c: f64,
    pub phases: PhaseSplit,
    pub checks: Vec<CheckOutcome>,
}

impl CharacterizeReport {
    /// Builds the report from a finished run's records and series; shared
    /// by the simulated and host paths.
    pub fn from_run(
        workload: WorkloadSpec,
        records: Vec<JobRecord>,
        series: Vec<SeriesPoint>,
        t_limit_c: f64,
        check: &CheckConfig,
    ) -> Self {
        let onset_s = first_crossing(&series, t_limit_c);
        let (pre, transition, post) =
            partition_durations(&records, onset_s, check.post_settle_s);
        let phases = PhaseSplit {
            onset_s,
            pre: PhaseStats::of(&pre),
            transition: PhaseStats::of(&transition),
            post: PhaseStats::of(&post),
        };
        let checks = evaluate_checks(check, &phases, &pre, t_limit_c);
        CharacterizeReport {
            workload,
            stats: stats(&records),
            records,
            series,
            t_limit_c,
            phases,
            checks,
        }
    }
}

/// The workload characterization uses when the config doesn't override it:
/// four jobs kept in flight until 120 have finished.
pub fn default_characterize_workload() -> WorkloadSpec {
    WorkloadSpec::ClosedLoop {
        parallelism: 4,
        total_jobs: 120,
        seed: 42,
    }
}

/// Runs the characterization experiment in simulation: the configured
/// workload (closed-loop 4×120 by default) with every job kept local.
pub fn run_characterize(config: &BenchConfig) -> Result<CharacterizeReport, BenchError> {
    let workload = config
        .workload
        .clone()
        .unwrap_or_else(default_characterize_workload);
    let result = simulate_with_limit(
        &config.model,
        &workload,
        &PolicySpec::AlwaysLocal,
        &config.remote,
        config.max_virtual_time_s,
    )?;
    Ok(CharacterizeReport::from_run(
        workload,
        result.records,
        result.series,
        config.model.t_limit_c,
        &config.check,
    ))
}

fn evaluate_checks(
    check: &CheckConfig,
    phases: &PhaseSplit,
    pre_durations: &[f64],
    t_limit_c: f64,
) -> Vec<CheckOutcome> {
    let mut outcomes = Vec::new();

    let [lo, hi] = check.pre_band_s;
    let outcome = if pre_durations.is_empty() {
        CheckOutcome::new("pre-throttle band", false, "no pre-throttle jobs".to_string())
    } else {
        let in_band = pre_durations
            .iter()
            .filter(|d| within(**d, check.pre_band_s))
            .count();
        let fraction = in_band as f64 / pre_durations.len() as f64;
        CheckOutcome::new(
            "pre-throttle band",
            fraction >= check.pre_band_min_fraction,
            format!(
                "{in_band}/{count} jobs in [{lo}, {hi}] s (need >= {need:.0}%)",
                count = pre_durations.len(),
                need = check.pre_band_min_fraction * 100.0
            ),
        )
    };
    outcomes.push(outcome);

    let outcome = match phases.onset_s {
        Some(onset) => CheckOutcome::new(
            "throttle onset",
            within(onset, check.onset_band_s),
            format!(
                "{onset:.1} s vs [{lo}, {hi}] s",
                lo = check.onset_band_s[0],
                hi = check.onset_band_s[1]
            ),
        ),
        None => CheckOutcome::new(
            "throttle onset",
            false,
            format!("temperature never reached {t_limit_c} °C"),
        ),
    };
    outcomes.push(outcome);

    let post = &phases.post;
    let outcome = if post.count == 0 {
        CheckOutcome::new(
            "post-throttle mean",
            false,
            "no post-throttle jobs".to_string(),
        )
    } else {
        CheckOutcome::new(
            "post-throttle mean",
            within(post.mean_s, check.post_mean_band_s),
            format!(
                "{mean:.2} s over {count} jobs vs [{lo}, {hi}] s",
                mean = post.mean_s,
                count = post.count,
                lo = check.post_mean_band_s[0],
                hi = check.post_mean_band_s[1]
            ),
        )
    };
    outcomes.push(outcome);

    outcomes
}
