//! Workload shapes for simulated experiments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How jobs are injected into a simulated run.
///
/// Closed-loop keeps a fixed number in flight ("starting N jobs and
/// injecting a new one as soon as one finishes"); open-loop injects on a
/// fixed schedule regardless of completions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WorkloadSpec {
    ClosedLoop {
        parallelism: u32,
        total_jobs: u32,
        seed: u64,
    },
    OpenLoop {
        inter_arrival_s: f64,
        total_jobs: u32,
        seed: u64,
    },
}

impl WorkloadSpec {
    pub fn total_jobs(&self) -> u32 {
        match *self {
            WorkloadSpec::ClosedLoop { total_jobs, .. } => total_jobs,
            WorkloadSpec::OpenLoop { total_jobs, .. } => total_jobs,
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            WorkloadSpec::ClosedLoop { seed, .. } => seed,
            WorkloadSpec::OpenLoop { seed, .. } => seed,
        }
    }

    pub fn validated(&self) -> Result<&Self, InvalidWorkload> {
        match *self {
            WorkloadSpec::ClosedLoop { parallelism, .. } => {
                if parallelism == 0 {
                    return Err(InvalidWorkload::ZeroParallelism);
                }
            }
            WorkloadSpec::OpenLoop {
                inter_arrival_s, ..
            } => {
                if !(inter_arrival_s > 0.0) || !inter_arrival_s.is_finite() {
                    return Err(InvalidWorkload::BadInterArrival {
                        value: inter_arrival_s,
                    });
                }
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InvalidWorkload {
    #[error("closed-loop parallelism must be at least 1")]
    ZeroParallelism,
    #[error("inter-arrival time must be positive and finite, got {value}")]
    BadInterArrival { value: f64 },
}

/// The offloading target as the gateway sees it: unthrottled, fixed
/// capacity. An offloaded job completes after one round trip plus the
/// remote service time, independent of how many jobs are offloaded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteModel {
    pub service_time_s: f64,
    pub rtt_s: f64,
}

impl Default for RemoteModel {
    fn default() -> Self {
        RemoteModel {
            service_time_s: 12.0,
            rtt_s: 0.25,
        }
    }
}

impl RemoteModel {
    pub fn turnaround_s(&self) -> f64 {
        self.service_time_s + self.rtt_s
    }

    pub fn validated(&self) -> Result<&Self, InvalidRemoteModel> {
        if !(self.service_time_s >= 0.0) || !self.service_time_s.is_finite() {
            return Err(InvalidRemoteModel::BadServiceTime {
                value: self.service_time_s,
            });
        }
        if !(self.rtt_s >= 0.0) || !self.rtt_s.is_finite() {
            return Err(InvalidRemoteModel::BadRtt { value: self.rtt_s });
        }
        Ok(self)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InvalidRemoteModel {
    #[error("remote service time must be nonnegative and finite, got {value}")]
    BadServiceTime { value: f64 },
    #[error("remote rtt must be nonnegative and finite, got {value}")]
    BadRtt { value: f64 },
}
