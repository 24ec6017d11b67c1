//! Artifact writers: CSVs and plain-text reports, all written atomically
//! (temp file in the target directory, then rename) so a killed run never
//! leaves a partial file, and all rendered with fixed precision so the same
//! experiment produces byte-identical bytes.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::engine::records_to_csv;
use crate::sim::{timeseries_to_csv, WorkloadSpec};

use super::{
    strategy_slug, BenchError, CharacterizeReport, CheckOutcome, CompareReport, PhaseStats,
};

pub const COMPARISON_CSV_HEADER: &str =
    "strategy,jobs_total,local_count,local_fraction,avg_local_duration_s,max_local_duration_s,success_ratio";

/// Writes `contents` to `path` atomically: the bytes land in a temp file in
/// the same directory and are renamed into place, so readers only ever see
/// the old file or the complete new one.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), BenchError> {
    let io_err = |source: std::io::Error| BenchError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Where the characterization artifacts landed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterizePaths {
    pub jobs_csv: PathBuf,
    pub timeseries_csv: PathBuf,
    pub summary_txt: PathBuf,
}

/// Writes jobs.csv, timeseries.csv, and summary.txt under `out_dir`.
pub fn write_characterize_artifacts(
    report: &CharacterizeReport,
    out_dir: &Path,
) -> Result<CharacterizePaths, BenchError> {
    let paths = CharacterizePaths {
        jobs_csv: out_dir.join("jobs.csv"),
        timeseries_csv: out_dir.join("timeseries.csv"),
        summary_txt: out_dir.join("summary.txt"),
    };
    write_atomic(&paths.jobs_csv, &records_to_csv(&report.records))?;
    write_atomic(&paths.timeseries_csv, &timeseries_to_csv(&report.series))?;
    write_atomic(&paths.summary_txt, &render_characterize_summary(report))?;
    Ok(paths)
}

/// Where the comparison artifacts landed; one jobs/timeseries CSV pair per
/// strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparePaths {
    pub report_txt: PathBuf,
    pub comparison_csv: PathBuf,
    /// `(strategy, jobs csv, timeseries csv)` in row order.
    pub strategies: Vec<(String, PathBuf, PathBuf)>,
}

/// Writes report.txt, comparison.csv, and per-strategy CSVs under
/// `out_dir`. Strategy file names use slugs (`cpu:0.75` → `cpu-0.75`),
/// suffixed with the row number on collision.
pub fn write_compare_artifacts(
    report: &CompareReport,
    out_dir: &Path,
) -> Result<ComparePaths, BenchError> {
    let mut used = BTreeSet::new();
    let mut strategies = Vec::new();
    for (i, row) in report.rows.iter().enumerate() {
        let mut slug = strategy_slug(&row.strategy);
        if slug.is_empty() {
            slug = format!("strategy-{}", i + 1);
        }
        if !used.insert(slug.clone()) {
            slug = format!("{slug}-{}", i + 1);
            used.insert(slug.clone());
        }
        let jobs_csv = out_dir.join(format!("{slug}_jobs.csv"));
        let timeseries_csv = out_dir.join(format!("{slug}_timeseries.csv"));
        write_atomic(&jobs_csv, &records_to_csv(&row.records))?;
        write_atomic(&timeseries_csv, &timeseries_to_csv(&row.series))?;
        strategies.push((row.strategy.clone(), jobs_csv, timeseries_csv));
    }
    let paths = ComparePaths {
        report_txt: out_dir.join("report.txt"),
        comparison_csv: out_dir.join("comparison.csv"),
        strategies,
    };
    write_atomic(&paths.report_txt, &render_compare_report(report))?;
    write_atomic(&paths.comparison_csv, &comparison_csv(report))?;
    Ok(paths)
}

fn workload_line(workload: &WorkloadSpec) -> String {
    match *workload {
        WorkloadSpec::ClosedLoop {
            parallelism,
            total_jobs,
            seed,
        } => format!("closed-loop, parallelism {parallelism}, {total_jobs} jobs, seed {seed}"),
        WorkloadSpec::OpenLoop {
            inter_arrival_s,
            total_jobs,
            seed,
        } => format!("open-loop, {inter_arrival_s} s inter-arrival, {total_jobs} jobs, seed {seed}"),
    }
}

fn phase_line(label: &str, stats: &PhaseStats) -> String {
    if stats.count == 0 {
        format!("{label} no jobs")
    } else {
        format!(
            "{label} {count} jobs, {min:.2}..{max:.2} s, mean {mean:.2} s",
            count = stats.count,
            min = stats.min_s,
            max = stats.max_s,
            mean = stats.mean_s
        )
    }
}

fn checks_section(out: &mut String, checks: &[CheckOutcome]) {
    let passed = checks.iter().filter(|c| c.passed).count();
    out.push_str(&format!("checks: {passed}/{} passed\n", checks.len()));
    for check in checks {
        let mark = if check.passed { "pass" } else { "FAIL" };
        out.push_str(&format!("  [{mark}] {}: {}\n", check.name, check.detail));
    }
}

/// Renders summary.txt: run header, phase-split durations, checks.
pub fn render_characterize_summary(report: &CharacterizeReport) -> String {
    let mut out = String::new();
    out.push_str("gateway characterization (no offloading)\n");
    out.push_str(&format!("workload: {}\n", workload_line(&report.workload)));
    out.push_str(&format!(
        "jobs: {} total, {} local, success {:.1}%\n\n",
        report.stats.jobs_total,
        report.stats.local_count,
        report.stats.success_ratio * 100.0
    ));
    match report.phases.onset_s {
        Some(onset) => out.push_str(&format!(
            "throttle onset: {onset:.1} s (first sample at or above {limit} °C)\n",
            limit = report.t_limit_c
        )),
        None => out.push_str(&format!(
            "throttle onset: none (temperature stayed below {limit} °C)\n",
            limit = report.t_limit_c
        )),
    }
    out.push_str(&phase_line("pre-throttle: ", &report.phases.pre));
    out.push('\n');
    out.push_str(&phase_line("transition:   ", &report.phases.transition));
    out.push('\n');
    out.push_str(&phase_line("post-throttle:", &report.phases.post));
    out.push_str("\n\n");
    checks_section(&mut out, &report.checks);
    out
}

const NO_LOCAL_JOBS: &str = "no local jobs";

/// Renders report.txt: one table row per strategy (local share plus local
/// duration columns), then the checks.
pub fn render_compare_report(report: &CompareReport) -> String {
    let mut out = String::new();
    out.push_str("offloading strategy comparison\n");
    out.push_str(&format!("workload: {}\n\n", workload_line(&report.workload)));

    let name_width = report
        .rows
        .iter()
        .map(|r| r.strategy.len())
        .chain(std::iter::once("strategy".len()))
        .max()
        .unwrap_or(8);
    out.push_str(&format!(
        "{:<name_width$}  {:>14}  {:>14}  {:>14}\n",
        "strategy", "local jobs %", "avg local s", "max local s"
    ));
    for row in &report.rows {
        let pct = format!("{:.1}", row.stats.local_fraction * 100.0);
        let (avg, max) = if row.stats.local_count == 0 {
            (NO_LOCAL_JOBS.to_string(), NO_LOCAL_JOBS.to_string())
        } else {
            (
                format!("{:.2}", row.stats.avg_local_duration_s),
                format!("{:.2}", row.stats.max_local_duration_s),
            )
        };
        out.push_str(&format!(
            "{:<name_width$}  {pct:>14}  {avg:>14}  {max:>14}\n",
            row.strategy
        ));
    }
    out.push('\n');
    checks_section(&mut out, &report.checks);
    out
}

fn csv_field(value: &str) -> String {
    if value.contains(',') || value.contains('"') {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

/// Renders comparison.csv: one machine-readable row per strategy.
pub fn comparison_csv(report: &CompareReport) -> String {
    let mut out = String::from(COMPARISON_CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{:.4},{:.3},{:.3},{:.4}\n",
            csv_field(&row.strategy),
            row.stats.jobs_total,
            row.stats.local_count,
            row.stats.local_fraction,
            row.stats.avg_local_duration_s,
            row.stats.max_local_duration_s,
            row.stats.success_ratio
        ));
    }
    out
}
