//! The strategy comparison run: every policy processes the identical
//! arrival sequence (same workload, same seed), so differences between the
//! table rows are attributable to policy alone.

use crate::engine::{stats, EngineStats, JobRecord};
use crate::policy::parse_policy;
use crate::sim::{simulate_with_limit, SeriesPoint, WorkloadSpec};

use super::{within, BenchConfig, BenchError, CheckConfig, CheckOutcome};

/// One strategy's run: the canonical policy text, its aggregate stats, and
/// the raw material for its CSVs.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRow {
    /// Canonical form of the policy (parsed, then printed), so tolerance
    /// lookups are insensitive to spacing in the input.
    pub strategy: String,
    pub stats: EngineStats,
    pub records: Vec<JobRecord>,
    pub series: Vec<SeriesPoint>,
}

/// The comparison experiment's product: one row per strategy plus the
/// evaluated tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub workload: WorkloadSpec,
    pub rows: Vec<StrategyRow>,
    pub checks: Vec<CheckOutcome>,
}

impl CompareReport {
    /// Builds the report from already-run rows; shared by the simulated and
    /// host paths.
    pub fn from_rows(workload: WorkloadSpec, rows: Vec<StrategyRow>, check: &CheckConfig) -> Self {
        let checks = evaluate_checks(check, &rows);
        CompareReport {
            workload,
            rows,
            checks,
        }
    }
}

/// The workload the comparison uses when the config doesn't override it:
/// one job every five seconds until 120 have arrived.
pub fn default_compare_workload() -> WorkloadSpec {
    WorkloadSpec::OpenLoop {
        inter_arrival_s: 5.0,
        total_jobs: 120,
        seed: 42,
    }
}

/// Runs every configured strategy against the same simulated workload.
pub fn run_compare(config: &BenchConfig) -> Result<CompareReport, BenchError> {
    if config.strategies.is_empty() {
        return Err(BenchError::Config {
            detail: "no strategies to compare".to_string(),
        });
    }
    let workload = config
        .workload
        .clone()
        .unwrap_or_else(default_compare_workload);
    let mut rows = Vec::new();
    for raw in &config.strategies {
        let policy = parse_policy(raw)?;
        let result = simulate_with_limit(
            &config.model,
            &workload,
            &policy,
            &config.remote,
            config.max_virtual_time_s,
        )?;
        rows.push(StrategyRow {
            strategy: policy.to_string(),
            stats: stats(&result.records),
            records: result.records,
            series: result.series,
        });
    }
    Ok(CompareReport::from_rows(workload, rows, &config.check))
}

/// File-name-safe form of a strategy name: `cpu:0.75` → `cpu-0.75`.
pub fn strategy_slug(strategy: &str) -> String {
    let mut slug = String::new();
    for c in strategy.chars() {
        if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' {
            slug.push(c);
        } else if !slug.is_empty() && !slug.ends_with('-') {
            slug.push('-');
        }
    }
    slug.trim_end_matches('-').to_string()
}

fn evaluate_checks(check: &CheckConfig, rows: &[StrategyRow]) -> Vec<CheckOutcome> {
    let mut outcomes = Vec::new();
    for row in rows {
        if let Some(band) = check.fraction_bands_pct.get(&row.strategy) {
            let pct = row.stats.local_fraction * 100.0;
            outcomes.push(CheckOutcome::new(
                &format!("local fraction ({})", row.strategy),
                within(pct, *band),
                format!("{pct:.1}% vs [{lo}, {hi}]%", lo = band[0], hi = band[1]),
            ));
        }
    }
    outcomes.push(ordering_check(
        "lowest max local duration",
        &check.lowest_max_duration,
        rows,
        |s| s.max_local_duration_s,
        Expect::Lowest,
        true,
    ));
    outcomes.push(ordering_check(
        "highest max local duration",
        &check.highest_max_duration,
        rows,
        |s| s.max_local_duration_s,
        Expect::Highest,
        true,
    ));
    outcomes.push(ordering_check(
        "lowest local fraction",
        &check.lowest_local_fraction,
        rows,
        |s| s.local_fraction,
        Expect::Lowest,
        false,
    ));
    outcomes
}

#[derive(Clone, Copy, PartialEq)]
enum Expect {
    Lowest,
    Highest,
}

/// Checks that the named strategy sits at the expected end of `metric`
/// across the rows. Duration orderings only consider rows that ran local
/// jobs — a row with none has no durations to rank.
fn ordering_check(
    name: &str,
    expected: &str,
    rows: &[StrategyRow],
    metric: fn(&EngineStats) -> f64,
    expect: Expect,
    local_jobs_only: bool,
) -> CheckOutcome {
    let Some(subject) = rows.iter().find(|r| r.strategy == expected) else {
        return CheckOutcome::new(name, false, format!("strategy {expected} not in the run"));
    };
    if local_jobs_only && subject.stats.local_count == 0 {
        return CheckOutcome::new(name, false, format!("{expected} ran no local jobs"));
    }
    let subject_value = metric(&subject.stats);
    let rivals: Vec<f64> = rows
        .iter()
        .filter(|r| r.strategy != subject.strategy)
        .filter(|r| !local_jobs_only || r.stats.local_count > 0)
        .map(|r| metric(&r.stats))
        .collect();
    if rivals.is_empty() {
        return CheckOutcome::new(name, true, format!("{expected} is the only eligible row"));
    }
    let (passed, nearest) = match expect {
        Expect::Lowest => {
            let best_rival = rivals.iter().copied().fold(f64::INFINITY, f64::min);
            (subject_value < best_rival, best_rival)
        }
        Expect::Highest => {
            let best_rival = rivals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (subject_value > best_rival, best_rival)
        }
    };
    CheckOutcome::new(
        name,
        passed,
        format!("{expected} at {subject_value:.3} vs nearest rival {nearest:.3}"),
    )
}
