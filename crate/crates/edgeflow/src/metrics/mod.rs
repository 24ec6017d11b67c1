//! Resource monitoring: snapshots of the four quantities offload decisions
//! are made on (memory utilization, CPU utilization, CPU temperature, jobs
//! in flight), plus CPU frequency for the record.
//!
//! Snapshots come from pluggable sources: live host counters ([`host`]), the
//! simulated gateway (`sim` module), or a scripted replay ([`replay`]). All
//! sources clamp out-of-band readings into the sanity band and flag the
//! affected field instead of propagating garbage.

mod host;
mod replay;

pub use host::{HostPaths, HostSampler};
pub use replay::{ReplayParseError, ReplayScript};

use std::sync::atomic::{AtomicI64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Temperatures outside this band are treated as sensor glitches.
pub const TEMP_SANITY_MIN_C: f64 = -20.0;
/// Upper end of the plausible-temperature band.
pub const TEMP_SANITY_MAX_C: f64 = 120.0;

/// One reading of the monitored resources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsSnapshot {
    /// Used memory as a fraction of total, in `[0, 1]`.
    pub mem_util: f64,
    /// Busy CPU time as a fraction of capacity over the sample window, in
    /// `[0, 1]`; optionally smoothed (see [`Ewma`]).
    pub cpu_util: f64,
    /// CPU temperature in degrees Celsius, within the sanity band.
    pub cpu_temp_c: f64,
    /// Jobs currently executing locally.
    pub jobs_in_flight: u32,
    /// Current CPU clock in MHz, always positive.
    pub cpu_freq_mhz: u32,
    /// Seconds since the source's epoch (process start or virtual time 0).
    pub taken_at: f64,
    /// Which fields reflect real readings rather than degraded fallbacks.
    pub validity: FieldValidity,
}

impl MetricsSnapshot {
    /// Clamps every field into its sanity band, lowering the matching
    /// validity flag for any field that had to be clamped.
    pub fn sanitized(mut self) -> Self {
        if !(0.0..=1.0).contains(&self.mem_util) || self.mem_util.is_nan() {
            self.mem_util = self.mem_util.clamp(0.0, 1.0);
            if self.mem_util.is_nan() {
                self.mem_util = 0.0;
            }
            self.validity.mem = false;
        }
        if !(0.0..=1.0).contains(&self.cpu_util) || self.cpu_util.is_nan() {
            self.cpu_util = self.cpu_util.clamp(0.0, 1.0);
            if self.cpu_util.is_nan() {
                self.cpu_util = 0.0;
            }
            self.validity.cpu = false;
        }
        if !(TEMP_SANITY_MIN_C..=TEMP_SANITY_MAX_C).contains(&self.cpu_temp_c)
            || self.cpu_temp_c.is_nan()
        {
            self.cpu_temp_c = self.cpu_temp_c.clamp(TEMP_SANITY_MIN_C, TEMP_SANITY_MAX_C);
            if self.cpu_temp_c.is_nan() {
                self.cpu_temp_c = TEMP_SANITY_MIN_C;
            }
            self.validity.temp = false;
        }
        if self.cpu_freq_mhz == 0 {
            self.cpu_freq_mhz = 1;
            self.validity.freq = false;
        }
        self
    }
}

impl Default for MetricsSnapshot {
    fn default() -> Self {
        MetricsSnapshot {
            mem_util: 0.0,
            cpu_util: 0.0,
            cpu_temp_c: 20.0,
            jobs_in_flight: 0,
            cpu_freq_mhz: 1500,
            taken_at: 0.0,
            validity: FieldValidity::all_valid(),
        }
    }
}

/// Per-field health of a snapshot. A `false` flag means the field carries a
/// degraded fallback because the underlying counter was unreadable or out of
/// band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FieldValidity {
    pub mem: bool,
    pub cpu: bool,
    pub temp: bool,
    pub freq: bool,
}

impl FieldValidity {
    pub fn all_valid() -> Self {
        FieldValidity {
            mem: true,
            cpu: true,
            temp: true,
            freq: true,
        }
    }

    pub fn is_fully_valid(&self) -> bool {
        self.mem && self.cpu && self.temp && self.freq
    }
}

/// Where snapshots come from and how they are conditioned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSource {
    pub kind: SourceKind,
    /// Width of the CPU-utilization window, and the suggested polling cadence.
    pub sample_period_ms: u64,
    /// Exponential smoothing factor for `cpu_util`; 1.0 disables smoothing.
    pub smoothing_alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Host,
    Simulated,
    Replay,
}

impl MetricsSource {
    pub fn new(kind: SourceKind) -> Self {
        MetricsSource {
            kind,
            sample_period_ms: 1000,
            smoothing_alpha: 1.0,
        }
    }

    pub fn validated(self) -> Result<Self, InvalidSource> {
        if self.sample_period_ms < 10 {
            return Err(InvalidSource::PeriodTooShort {
                period_ms: self.sample_period_ms,
            });
        }
        if !(0.0..=1.0).contains(&self.smoothing_alpha) || self.smoothing_alpha.is_nan() {
            return Err(InvalidSource::AlphaOutOfRange {
                alpha: self.smoothing_alpha,
            });
        }
        Ok(self)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InvalidSource {
    #[error("sample period {period_ms} ms is below the 10 ms minimum")]
    PeriodTooShort { period_ms: u64 },
    #[error("smoothing alpha {alpha} is outside [0, 1]")]
    AlphaOutOfRange { alpha: f64 },
}

/// Exponentially weighted moving average over CPU utilization.
///
/// State starts at 0.0; `alpha` = 1.0 makes the output track the input
/// exactly (smoothing off).
#[derive(Debug, Clone)]
pub struct Ewma {
    alpha: f64,
    state: f64,
}

impl Ewma {
    pub fn new(alpha: f64) -> Self {
        Ewma { alpha, state: 0.0 }
    }

    pub fn update(&mut self, instant: f64) -> f64 {
        self.state = self.alpha * instant + (1.0 - self.alpha) * self.state;
        self.state
    }

    pub fn value(&self) -> f64 {
        self.state
    }
}

/// Count of jobs currently executing locally, shared between the node
/// handler that admits jobs and the samplers that report on them.
#[derive(Debug, Default)]
pub struct JobsGauge(AtomicI64);

/// A decrement without a matching increment — a caller bug, never a
/// recoverable runtime condition.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("jobs gauge decremented below zero")]
pub struct GaugeUnderflow;

impl JobsGauge {
    pub fn new() -> Self {
        JobsGauge(AtomicI64::new(0))
    }

    /// Registers one more running local job; returns the new count.
    pub fn increment(&self) -> i64 {
        self.0.fetch_add(1, Ordering::SeqCst) + 1
    }

    /// Registers a local job completion; returns the new count.
    pub fn decrement(&self) -> Result<i64, GaugeUnderflow> {
        let mut current = self.0.load(Ordering::SeqCst);
        loop {
            if current == 0 {
                return Err(GaugeUnderflow);
            }
            match self.0.compare_exchange_weak(
                current,
                current - 1,
                Ordering::SeqCst,
                Ordering::SeqCst,
            ) {
                Ok(_) => return Ok(current - 1),
                Err(observed) => current = observed,
            }
        }
    }

    pub fn get(&self) -> i64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn gauge_counts_up_and_down() {
        let gauge = JobsGauge::new();
        assert_eq!(gauge.increment(), 1);
        assert_eq!(gauge.increment(), 2);
        assert_eq!(gauge.decrement(), Ok(1));
        assert_eq!(gauge.get(), 1);
    }

    #[test]
    fn gauge_underflow_is_loud() {
        let gauge = JobsGauge::new();
        assert_eq!(gauge.decrement(), Err(GaugeUnderflow));
    }

    #[test]
    fn gauge_is_exact_under_concurrency() {
        let gauge = Arc::new(JobsGauge::new());
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let gauge = Arc::clone(&gauge);
                std::thread::spawn(move || {
                    for _ in 0..1000 {
                        gauge.increment();
                        gauge.decrement().unwrap();
                    }
                    gauge.increment();
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(gauge.get(), 8);
    }

    #[test]
    fn ewma_starts_at_zero_and_halves_the_step() {
        let mut ewma = Ewma::new(0.5);
        assert_eq!(ewma.update(1.0), 0.5);
    }

    #[test]
    fn ewma_alpha_one_tracks_input() {
        let mut ewma = Ewma::new(1.0);
        assert_eq!(ewma.update(0.3), 0.3);
        assert_eq!(ewma.update(0.9), 0.9);
    }

    #[test]
    fn sanitize_clamps_and_flags() {
        let snap = MetricsSnapshot {
            mem_util: 1.7,
            cpu_util: -0.2,
            cpu_temp_c: 400.0,
            cpu_freq_mhz: 0,
            ..MetricsSnapshot::default()
        }
        .sanitized();
        assert_eq!(snap.mem_util, 1.0);
        assert_eq!(snap.cpu_util, 0.0);
        assert_eq!(snap.cpu_temp_c, TEMP_SANITY_MAX_C);
        assert_eq!(snap.cpu_freq_mhz, 1);
        assert!(!snap.validity.mem);
        assert!(!snap.validity.cpu);
        assert!(!snap.validity.temp);
        assert!(!snap.validity.freq);
    }

    #[test]
    fn sanitize_keeps_in_band_values_valid() {
        let snap = MetricsSnapshot::default().sanitized();
        assert!(snap.validity.is_fully_valid());
    }

    #[test]
    fn source_validation_bounds() {
        assert!(MetricsSource::new(SourceKind::Host).validated().is_ok());
        let short = MetricsSource {
            sample_period_ms: 5,
            ..MetricsSource::new(SourceKind::Host)
        };
        assert_eq!(
            short.validated(),
            Err(InvalidSource::PeriodTooShort { period_ms: 5 })
        );
        let alpha = MetricsSource {
            smoothing_alpha: 1.5,
            ..MetricsSource::new(SourceKind::Replay)
        };
        assert_eq!(
            alpha.validated(),
            Err(InvalidSource::AlphaOutOfRange { alpha: 1.5 })
        );
    }
}
