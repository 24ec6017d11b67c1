//! Benchmark harness behind the CLI: the no-offload characterization run,
//! the multi-strategy comparison run, host-mode drivers for both, artifact
//! writers, and data-driven tolerance checks.
//!
//! The two experiments mirror how a gateway is usually evaluated: first
//! characterize the device alone (how long do jobs take, when does thermal
//! throttling set in), then compare offloading strategies against the same
//! arrival sequence so differences are attributable to policy alone. Every
//! tolerance lives in [`CheckConfig`] — checks are data, not code.

mod artifacts;
mod characterize;
mod compare;
mod host;

pub use artifacts::{
    comparison_csv, render_characterize_summary, render_compare_report, write_atomic,
    write_characterize_artifacts, write_compare_artifacts, CharacterizePaths, ComparePaths,
    COMPARISON_CSV_HEADER,
};
pub use characterize::{
    default_characterize_workload, run_characterize, split_phases, CharacterizeReport, PhaseSplit,
    PhaseStats,
};
pub use compare::{
    default_compare_workload, run_compare, strategy_slug, CompareReport, StrategyRow,
};
pub use host::{default_offloadable_flow, run_host, HostOptions, HostRun};

use std::collections::BTreeMap;
use std::io;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{DeployError, InjectError};
use crate::flow::ParseError;
use crate::policy::PolicyParseError;
use crate::remote::{InvalidEndpoint, OffloadDeployError};
use crate::sim::{GatewayModel, RemoteModel, SimError, WorkloadSpec, DEFAULT_MAX_VIRTUAL_TIME_S};

/// Everything an experiment reads from its config file. Every field has a
/// default, so `{}` is a complete config and the file is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Simulated gateway; also supplies the temperature limit used to split
    /// phases in host mode.
    pub model: GatewayModel,
    /// Simulated offload target.
    pub remote: RemoteModel,
    /// Workload override. `None` picks the command's own default shape:
    /// closed-loop 4×120 for characterization, open-loop 5 s×120 for
    /// comparison.
    pub workload: Option<WorkloadSpec>,
    /// Policy specs the comparison runs, one row each.
    pub strategies: Vec<String>,
    /// Tolerances applied when checks are requested.
    pub check: CheckConfig,
    /// Simulated runs abort past this virtual time instead of spinning.
    pub max_virtual_time_s: f64,
    /// Host mode: wall seconds one work unit costs (the simulator's scale
    /// is fixed at one second per unit at full speed).
    pub seconds_per_unit: f64,
    /// Host mode: metrics sampling period.
    pub sample_period_ms: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            model: GatewayModel::default(),
            remote: RemoteModel::default(),
            workload: None,
            strategies: default_strategies(),
            check: CheckConfig::default(),
            max_virtual_time_s: DEFAULT_MAX_VIRTUAL_TIME_S,
            seconds_per_unit: 0.05,
            sample_period_ms: 1000,
        }
    }
}

/// The four strategies the comparison runs by default: a concurrency cap, a
/// CPU-utilization threshold, a memory threshold, and a temperature
/// threshold.
pub fn default_strategies() -> Vec<String> {
    vec![
        "jobs:4".to_string(),
        "cpu:0.75".to_string(),
        "mem:0.75".to_string(),
        "temp:75".to_string(),
    ]
}

/// Tolerance data for `--check`. Bands are inclusive `[low, high]` pairs.
///
/// Defaults encode the calibration targets: pre-throttle durations in
/// 23–26 s, throttle onset around 170 s, post-throttle mean around 29 s,
/// local-job fractions within ten percentage points of the reference table,
/// and three orderings (CPU-capped has the tightest max duration,
/// memory-capped the loosest, temperature-capped offloads the most).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// Band pre-throttle local durations must fall in.
    pub pre_band_s: [f64; 2],
    /// Minimum fraction of pre-throttle jobs inside `pre_band_s`.
    pub pre_band_min_fraction: f64,
    /// Band the throttle onset time must fall in.
    pub onset_band_s: [f64; 2],
    /// Band the post-throttle mean duration must fall in.
    pub post_mean_band_s: [f64; 2],
    /// Jobs starting within this long after onset are transitional and
    /// belong to neither phase.
    pub post_settle_s: f64,
    /// Local-jobs percentage band per strategy; strategies without an entry
    /// get no fraction check.
    pub fraction_bands_pct: BTreeMap<String, [f64; 2]>,
    /// Strategy expected to show the lowest max local duration.
    pub lowest_max_duration: String,
    /// Strategy expected to show the highest max local duration.
    pub highest_max_duration: String,
    /// Strategy expected to keep the smallest fraction of jobs local.
    pub lowest_local_fraction: String,
}

impl Default for CheckConfig {
    fn default() -> Self {
        let mut fraction_bands_pct = BTreeMap::new();
        fraction_bands_pct.insert("jobs:4".to_string(), [60.0, 80.0]);
        fraction_bands_pct.insert("cpu:0.75".to_string(), [52.5, 72.5]);
        fraction_bands_pct.insert("mem:0.75".to_string(), [60.8, 80.8]);
        fraction_bands_pct.insert("temp:75".to_string(), [43.3, 63.3]);
        CheckConfig {
            pre_band_s: [23.0, 26.0],
            pre_band_min_fraction: 0.9,
            onset_band_s: [140.0, 200.0],
            post_mean_band_s: [28.0, 30.0],
            post_settle_s: 30.0,
            fraction_bands_pct,
            lowest_max_duration: "cpu:0.75".to_string(),
            highest_max_duration: "mem:0.75".to_string(),
            lowest_local_fraction: "temp:75".to_string(),
        }
    }
}

/// One evaluated tolerance: what was checked, whether it held, and the
/// measured numbers spelled out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    pub(crate) fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckOutcome {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// True when every outcome passed (vacuously true for none).
pub fn all_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|o| o.passed)
}

pub(crate) fn within(value: f64, band: [f64; 2]) -> bool {
    value >= band[0] && value <= band[1]
}

/// Anything that can go wrong while running an experiment or writing its
/// artifacts.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment configuration: {detail}")]
    Config { detail: String },
    #[error(transparent)]
    Policy(#[from] PolicyParseError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Rewrite(#[from] crate::flow::RewriteError),
    #[error(transparent)]
    Endpoint(#[from] InvalidEndpoint),
    #[error(transparent)]
    OffloadDeploy(#[from] OffloadDeployError),
    #[error(transparent)]
    Deploy(#[from] DeployError),
    #[error(transparent)]
    Inject(#[from] InjectError),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_file_is_complete() {
        let config: BenchConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(config, BenchConfig::default());
        assert_eq!(config.strategies.len(), 4);
        assert!(config.workload.is_none());
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut config = BenchConfig::default();
        config.workload = Some(WorkloadSpec::OpenLoop {
            inter_arrival_s: 2.5,
            total_jobs: 30,
            seed: 7,
        });
        config.check.pre_band_min_fraction = 0.8;
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: BenchConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let err = serde_json::from_str::<BenchConfig>(r#"{"modle": {}}"#).unwrap_err();
        assert!(err.to_string().contains("modle"));
    }

    #[test]
    fn default_tolerances_cover_the_default_strategies() {
        let check = CheckConfig::default();
        for strategy in default_strategies() {
            assert!(
                check.fraction_bands_pct.contains_key(&strategy),
                "no fraction band for {strategy}"
            );
        }
        assert!(within(70.0, check.fraction_bands_pct["jobs:4"]));
        assert!(!within(80.1, check.fraction_bands_pct["jobs:4"]));
    }

    #[test]
    fn check_outcomes_aggregate() {
        let good = CheckOutcome::new("a", true, "ok".into());
        let bad = CheckOutcome::new("b", false, "off by one".into());
        assert!(all_passed(&[good.clone()]));
        assert!(all_passed(&[]));
        assert!(!all_passed(&[good, bad]));
    }
}
