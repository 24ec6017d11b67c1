//! Snapshots from live host counters: `/proc` for CPU and memory, sysfs for
//! temperature and frequency.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use super::{Ewma, FieldValidity, JobsGauge, MetricsSnapshot};

/// Environment variable overriding the temperature file path.
pub const THERMAL_PATH_ENV: &str = "EDGEFLOW_THERMAL_PATH";

/// Locations of the host counter files. Paths are configuration, not code:
/// point them at copies or fakes to test, or at the right thermal zone on
/// boards where zone 0 is not the CPU.
#[derive(Debug, Clone)]
pub struct HostPaths {
    pub cpu_stat: PathBuf,
    pub meminfo: PathBuf,
    pub thermal: PathBuf,
    pub cpufreq: PathBuf,
}

impl Default for HostPaths {
    fn default() -> Self {
        HostPaths {
            cpu_stat: PathBuf::from("/proc/stat"),
            meminfo: PathBuf::from("/proc/meminfo"),
            thermal: PathBuf::from("/sys/class/thermal/thermal_zone0/temp"),
            cpufreq: PathBuf::from("/sys/devices/system/cpu/cpu0/cpufreq/scaling_cur_freq"),
        }
    }
}

impl HostPaths {
    /// Applies environment overrides (currently [`THERMAL_PATH_ENV`]).
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(path) = std::env::var(THERMAL_PATH_ENV) {
            self.thermal = PathBuf::from(path);
        }
        self
    }
}

/// Aggregate jiffy counters from the `cpu` summary line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CpuCounters {
    busy: u64,
    total: u64,
}

/// Stateful sampler over host counters. CPU utilization is computed from the
/// change in cumulative busy/total jiffies between consecutive calls (the
/// first call uses the since-boot totals), then smoothed.
pub struct HostSampler {
    paths: HostPaths,
    gauge: Arc<JobsGauge>,
    ewma: Ewma,
    previous: Option<CpuCounters>,
    started: Instant,
}

impl HostSampler {
    pub fn new(paths: HostPaths, gauge: Arc<JobsGauge>, smoothing_alpha: f64) -> Self {
        HostSampler {
            paths,
            gauge,
            ewma: Ewma::new(smoothing_alpha),
            previous: None,
            started: Instant::now(),
        }
    }

    /// Reads every counter once. Unreadable counters degrade to a safe value
    /// with the matching validity flag lowered; the call itself never fails.
    pub fn sample(&mut self) -> MetricsSnapshot {
        let mut validity = FieldValidity::all_valid();

        let mem_util = match read_mem_util(&self.paths.meminfo) {
            Some(v) => v,
            None => {
                validity.mem = false;
                0.0
            }
        };

        let cpu_instant = match read_cpu_counters(&self.paths.cpu_stat) {
            Some(current) => {
                let instant = match self.previous {
                    Some(prev) if current.total > prev.total => {
                        (current.busy.saturating_sub(prev.busy)) as f64
                            / (current.total - prev.total) as f64
                    }
                    Some(_) => {
                        validity.cpu = false;
                        0.0
                    }
                    None if current.total > 0 => current.busy as f64 / current.total as f64,
                    None => {
                        validity.cpu = false;
                        0.0
                    }
                };
                self.previous = Some(current);
                instant
            }
            None => {
                validity.cpu = false;
                0.0
            }
        };
        let cpu_util = self.ewma.update(cpu_instant);

        let cpu_temp_c = match read_scaled_integer(&self.paths.thermal, 1000.0) {
            Some(v) => v,
            None => {
                validity.temp = false;
                0.0
            }
        };

        let cpu_freq_mhz = match read_scaled_integer(&self.paths.cpufreq, 1000.0) {
            Some(v) if v >= 1.0 => v as u32,
            _ => {
                validity.freq = false;
                1
            }
        };

        MetricsSnapshot {
            mem_util,
            cpu_util,
            cpu_temp_c,
            jobs_in_flight: self.gauge.get().max(0) as u32,
            cpu_freq_mhz,
            taken_at: self.started.elapsed().as_secs_f64(),
            validity,
        }
        .sanitized()
    }
}

// The aggregate "cpu " line sums jiffies across all cores, so a delta over a
// window of w seconds totals w · cores · HZ and busy/total is already the
// per-capacity utilization.
fn read_cpu_counters(path: &Path) -> Option<CpuCounters> {
    let text = fs::read_to_string(path).ok()?;
    let line = text.lines().find(|l| l.starts_with("cpu "))?;
    let fields: Vec<u64> = line
        .split_whitespace()
        .skip(1)
        .map_while(|f| f.parse().ok())
        .collect();
    if fields.len() < 4 {
        return None;
    }
    let idle_all: u64 = fields.get(3).copied().unwrap_or(0) + fields.get(4).copied().unwrap_or(0);
    let total: u64 = fields.iter().sum();
    Some(CpuCounters {
        busy: total - idle_all,
        total,
    })
}

fn read_mem_util(path: &Path) -> Option<f64> {
    let text = fs::read_to_string(path).ok()?;
    let field = |name: &str| -> Option<f64> {
        text.lines()
            .find(|l| l.starts_with(name))?
            .split_whitespace()
            .nth(1)?
            .parse()
            .ok()
    };
    let total = field("MemTotal:")?;
    let available = field("MemAvailable:")?;
    if total <= 0.0 {
        return None;
    }
    Some((total - available) / total)
}

fn read_scaled_integer(path: &Path, divisor: f64) -> Option<f64> {
    let text = fs::read_to_string(path).ok()?;
    let raw: f64 = text.trim().parse().ok()?;
    Some(raw / divisor)
}
