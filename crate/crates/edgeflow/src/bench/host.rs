//! Host-mode drivers: the same experiments, but on the real threaded engine
//! under wall-clock time, with metrics sampled from the operating system.
//! The engine and the series sampler share one clock, so job records and
//! time-series rows line up on a common epoch.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use crate::engine::{
    deploy, registry_with_defaults, Clock, EngineConfig, EngineHandle, JobRecord, Payload,
    SystemClock,
};
use crate::flow::{
    extract_offloadable, FlowGraph, FlowNode, NodeKind, Tab, Wire, CONFIG_TARGET,
    CONFIG_WORK_UNITS,
};
use crate::metrics::{HostPaths, HostSampler, JobsGauge};
use crate::policy::{parse_policy, PolicySpec};
use crate::remote::{
    deploy_with_offload, Fallback, HttpTransport, InProcessTransport, RemoteEndpoint,
    RemoteExecutor, RemoteTransport,
};
use crate::sim::{SeriesPoint, WorkloadSpec};

use super::BenchError;

/// Knobs for a host-mode run.
#[derive(Debug, Clone)]
pub struct HostOptions {
    /// Wall seconds one work unit costs on this machine.
    pub seconds_per_unit: f64,
    /// Metrics sampling period.
    pub sample_period_ms: u64,
    /// Remote executor base URL; `None` runs the offloaded half in-process.
    pub remote_url: Option<String>,
    /// What the offload link does when a remote call fails.
    pub fallback: Fallback,
    /// How long the final drain waits for stragglers.
    pub drain_timeout_s: f64,
    /// Smoothing factor for the sampled CPU utilization.
    pub smoothing_alpha: f64,
}

impl Default for HostOptions {
    fn default() -> Self {
        HostOptions {
            seconds_per_unit: 0.05,
            sample_period_ms: 1000,
            remote_url: None,
            fallback: Fallback::Fail,
            drain_timeout_s: 120.0,
            smoothing_alpha: 0.4,
        }
    }
}

/// What a host run produced: the engine's job records and the sampled
/// series, both timed against the same epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct HostRun {
    pub records: Vec<JobRecord>,
    pub series: Vec<SeriesPoint>,
}

/// A minimal flow with one offloadable tab: inject → (offloadable work) →
/// sink. The default subject for host-mode runs and a worked example of the
/// link-target wiring between tabs.
pub fn default_offloadable_flow(work_units: u32) -> FlowGraph {
    let node = |id: &str, tab: &str, kind: NodeKind, config: &[(&str, String)]| FlowNode {
        id: id.to_string(),
        tab: tab.to_string(),
        kind,
        config: config
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect::<BTreeMap<_, _>>(),
    };
    let wire = |from: &str, to: &str| Wire {
        from: from.to_string(),
        to: to.to_string(),
    };
    FlowGraph {
        tabs: vec![
            Tab {
                id: "main".to_string(),
                name: "main".to_string(),
                offloadable: false,
            },
            Tab {
                id: "heavy".to_string(),
                name: "heavy".to_string(),
                offloadable: true,
            },
        ],
        nodes: vec![
            node("in", "main", NodeKind::Inject, &[]),
            node(
                "send",
                "main",
                NodeKind::LinkOut,
                &[(CONFIG_TARGET, "entry".to_string())],
            ),
            node("recv", "main", NodeKind::LinkIn, &[]),
            node("out", "main", NodeKind::Sink, &[]),
            node("entry", "heavy", NodeKind::LinkIn, &[]),
            node(
                "crunch",
                "heavy",
                NodeKind::Work,
                &[(CONFIG_WORK_UNITS, work_units.to_string())],
            ),
            node(
                "exit",
                "heavy",
                NodeKind::LinkOut,
                &[(CONFIG_TARGET, "recv".to_string())],
            ),
        ],
        wires: vec![
            wire("in", "send"),
            wire("recv", "out"),
            wire("entry", "crunch"),
            wire("crunch", "exit"),
        ],
    }
}

/// Runs `workload` against `flow` on the threaded engine under
/// `policy_text`.
///
/// A flow with an offloadable tab is rewritten and deployed with an offload
/// link (remote half over HTTP when `remote_url` is set, in-process
/// otherwise). A flow without one can only run `always-local`.
pub fn run_host(
    flow: &FlowGraph,
    policy_text: &str,
    workload: &WorkloadSpec,
    options: &HostOptions,
) -> Result<HostRun, BenchError> {
    let policy = parse_policy(policy_text)?;
    workload.validated().map_err(|e| BenchError::Config {
        detail: e.to_string(),
    })?;

    let clock: Arc<SystemClock> = Arc::new(SystemClock::new());
    let gauge = Arc::new(JobsGauge::new());
    let sampler = Arc::new(Mutex::new(HostSampler::new(
        HostPaths::default().with_env_overrides(),
        Arc::clone(&gauge),
        options.smoothing_alpha,
    )));
    let engine_config = EngineConfig {
        seconds_per_unit: options.seconds_per_unit,
        drain_timeout_s: options.drain_timeout_s,
        clock: Arc::clone(&clock) as Arc<dyn Clock>,
    };

    let offloadable = flow.tabs.iter().any(|t| t.offloadable);
    let (handle, driver_owns_gauge) = if offloadable {
        let embedded_url = options
            .remote_url
            .clone()
            .unwrap_or_else(|| "http://in-process.invalid".to_string());
        let rewrite = extract_offloadable(flow, &embedded_url, policy_text)?;
        let transport: Arc<dyn RemoteTransport> = match &options.remote_url {
            Some(url) => Arc::new(HttpTransport::new(RemoteEndpoint::new(url.clone()))?),
            None => Arc::new(InProcessTransport::new(Arc::new(RemoteExecutor::new(
                options.seconds_per_unit,
            )))),
        };
        let snapshot_fn = {
            let sampler = Arc::clone(&sampler);
            Arc::new(move || sampler.lock().unwrap().sample())
        };
        let handle = deploy_with_offload(
            &rewrite,
            transport,
            snapshot_fn,
            Arc::clone(&gauge),
            options.fallback,
            engine_config,
        )?;
        (handle, false)
    } else {
        if policy != PolicySpec::AlwaysLocal {
            return Err(BenchError::Config {
                detail: format!(
                    "flow has no offloadable tab, so policy {policy} has nowhere to send jobs; \
                     only always-local applies"
                ),
            });
        }
        let handle = deploy(flow.clone(), registry_with_defaults(), engine_config)?;
        (handle, true)
    };

    let series = Arc::new(Mutex::new(Vec::new()));
    let stop = Arc::new(AtomicBool::new(false));
    push_sample(&sampler, &clock, &series);
    let sampler_thread = {
        let sampler = Arc::clone(&sampler);
        let clock = Arc::clone(&clock);
        let series = Arc::clone(&series);
        let stop = Arc::clone(&stop);
        let period = Duration::from_millis(options.sample_period_ms.max(1));
        thread::spawn(move || {
            let mut next = period;
            loop {
                // Sleep in short slices so a finished run stops promptly
                // even with second-scale sampling periods.
                while clock.now_s() < next.as_secs_f64() {
                    if stop.load(Ordering::SeqCst) {
                        return;
                    }
                    thread::sleep(Duration::from_millis(5));
                }
                if stop.load(Ordering::SeqCst) {
                    return;
                }
                push_sample(&sampler, &clock, &series);
                next += period;
            }
        })
    };

    let drive = drive_workload(&handle, workload, &gauge, driver_owns_gauge, &clock);
    stop.store(true, Ordering::SeqCst);
    sampler_thread.join().expect("sampler thread panicked");
    drive?;

    let outcome = handle.drain();
    push_sample(&sampler, &clock, &series);
    handle.shutdown();
    let series = Arc::try_unwrap(series)
        .expect("no one else holds the series")
        .into_inner()
        .unwrap();
    Ok(HostRun {
        records: outcome.records,
        series,
    })
}

fn push_sample(
    sampler: &Arc<Mutex<HostSampler>>,
    clock: &Arc<SystemClock>,
    series: &Arc<Mutex<Vec<SeriesPoint>>>,
) {
    let snapshot = sampler.lock().unwrap().sample();
    series.lock().unwrap().push(SeriesPoint {
        t_s: clock.now_s(),
        temp_c: snapshot.cpu_temp_c,
        freq_mhz: snapshot.cpu_freq_mhz,
        cpu_util: snapshot.cpu_util,
        jobs_in_flight: snapshot.jobs_in_flight,
    });
}

/// Injects per the workload shape and returns once every job has finished.
/// When the engine has no offload link, the driver also maintains the
/// jobs-in-flight gauge the sampler reads.
fn drive_workload(
    handle: &EngineHandle,
    workload: &WorkloadSpec,
    gauge: &Arc<JobsGauge>,
    driver_owns_gauge: bool,
    clock: &Arc<SystemClock>,
) -> Result<(), BenchError> {
    let total = workload.total_jobs() as usize;
    let mut injected = 0usize;
    let mut observed = 0usize;
    let inject = |injected: &mut usize| -> Result<(), BenchError> {
        handle.inject(Payload::new())?;
        if driver_owns_gauge {
            gauge.increment();
        }
        *injected += 1;
        Ok(())
    };
    while observed < total || injected < total {
        match *workload {
            WorkloadSpec::ClosedLoop { parallelism, .. } => {
                while injected < total && injected - observed < parallelism as usize {
                    inject(&mut injected)?;
                }
            }
            WorkloadSpec::OpenLoop {
                inter_arrival_s, ..
            } => {
                let due = (clock.now_s() / inter_arrival_s) as usize + 1;
                while injected < due.min(total) {
                    inject(&mut injected)?;
                }
            }
        }
        let completed = handle.completed_jobs().len();
        if driver_owns_gauge {
            for _ in observed..completed {
                let _ = gauge.decrement();
            }
        }
        observed = completed;
        if observed < total || injected < total {
            thread::sleep(Duration::from_millis(2));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Location;

    fn quick_options() -> HostOptions {
        HostOptions {
            seconds_per_unit: 0.002,
            sample_period_ms: 10,
            remote_url: None,
            fallback: Fallback::Fail,
            drain_timeout_s: 30.0,
            smoothing_alpha: 0.4,
        }
    }

    #[test]
    fn the_default_flow_rewrites_cleanly() {
        let flow = default_offloadable_flow(25);
        assert!(crate::flow::validate(&flow).is_empty());
        let rewrite = extract_offloadable(&flow, "http://example.invalid", "jobs:2").unwrap();
        assert_eq!(rewrite.flow_id, "heavy");
    }

    #[test]
    fn a_closed_loop_host_run_completes_every_job() {
        let flow = default_offloadable_flow(50);
        let workload = WorkloadSpec::ClosedLoop {
            parallelism: 3,
            total_jobs: 9,
            seed: 1,
        };
        let run = run_host(&flow, "jobs:2", &workload, &quick_options()).unwrap();
        assert_eq!(run.records.len(), 9);
        assert!(run.records.iter().all(|r| r.success));
        assert!(run.series.len() >= 2);
        assert_eq!(gauge_settles(&run), 0);
    }

    #[test]
    fn always_remote_sends_every_host_job_away() {
        let flow = default_offloadable_flow(20);
        let workload = WorkloadSpec::ClosedLoop {
            parallelism: 2,
            total_jobs: 6,
            seed: 1,
        };
        let run = run_host(&flow, "always-remote", &workload, &quick_options()).unwrap();
        assert_eq!(run.records.len(), 6);
        assert!(run
            .records
            .iter()
            .all(|r| r.location == Location::Remote && r.success));
        assert_eq!(gauge_settles(&run), 0);
    }

    fn gauge_settles(run: &HostRun) -> u32 {
        run.series.last().map(|p| p.jobs_in_flight).unwrap_or(99)
    }

    #[test]
    fn an_open_loop_host_run_injects_on_schedule() {
        let flow = default_offloadable_flow(10);
        let workload = WorkloadSpec::OpenLoop {
            inter_arrival_s: 0.01,
            total_jobs: 8,
            seed: 1,
        };
        let run = run_host(&flow, "always-local", &workload, &quick_options()).unwrap();
        assert_eq!(run.records.len(), 8);
        assert!(run.records.iter().all(|r| r.location == Location::Local));
        let mut starts: Vec<f64> = run.records.iter().map(|r| r.started_at).collect();
        starts.sort_by(f64::total_cmp);
        for pair in starts.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
    }

    #[test]
    fn a_plain_flow_only_runs_always_local() {
        let mut flow = default_offloadable_flow(10);
        for tab in &mut flow.tabs {
            tab.offloadable = false;
        }
        let workload = WorkloadSpec::ClosedLoop {
            parallelism: 2,
            total_jobs: 4,
            seed: 1,
        };
        let err = run_host(&flow, "jobs:2", &workload, &quick_options()).unwrap_err();
        assert!(matches!(err, BenchError::Config { .. }), "{err}");
        let run = run_host(&flow, "always-local", &workload, &quick_options()).unwrap();
        assert_eq!(run.records.len(), 4);
    }

    #[test]
    fn zero_jobs_is_a_valid_host_run() {
        let flow = default_offloadable_flow(10);
        let workload = WorkloadSpec::ClosedLoop {
            parallelism: 2,
            total_jobs: 0,
            seed: 1,
        };
        let run = run_host(&flow, "always-remote", &workload, &quick_options()).unwrap();
        assert!(run.records.is_empty());
        assert!(!run.series.is_empty());
    }
}
