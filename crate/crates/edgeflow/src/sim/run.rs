//! Running a whole workload on the virtual gateway.
//!
//! [`simulate`] is a pure function: the same model, workload, policy, and
//! remote model always produce identical records and time series. Offload
//! decisions are made at injection instants from a [`snapshot`] of the
//! gateway, with the same [`decide`] code the live engine uses. Local jobs
//! drain on the shared cores; offloaded jobs complete after the remote
//! model's fixed turnaround.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{JobRecord, Location};
use crate::policy::{decide, PolicySpec, Target};

use super::workload::{InvalidRemoteModel, InvalidWorkload, RemoteModel, WorkloadSpec};
use super::{
    advance_until, governor_tick, snapshot, Advance, GatewayModel, GatewayState, InvalidModel,
    SIM_DT_S,
};

/// Column header of the exported time series.
pub const TIMESERIES_HEADER: &str = "t_s,temp_c,freq_mhz,cpu_util,jobs_in_flight";

/// Virtual-time budget after which a simulation is declared nonterminating.
pub const DEFAULT_MAX_VIRTUAL_TIME_S: f64 = 1200.0;

/// Events due within this of the current instant are processed now.
const TIME_EPS: f64 = 1e-9;

/// One sampled row of the gateway time series, taken every [`SIM_DT_S`].
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub t_s: f64,
    pub temp_c: f64,
    pub freq_mhz: u32,
    pub cpu_util: f64,
    pub jobs_in_flight: u32,
}

/// Everything a simulated run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// One record per job, sorted by job id.
    pub records: Vec<JobRecord>,
    /// Gateway samples every [`SIM_DT_S`] from t = 0 through the end.
    pub series: Vec<SeriesPoint>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid gateway model: {0}")]
    Model(#[from] InvalidModel),
    #[error("invalid workload: {0}")]
    Workload(#[from] InvalidWorkload),
    #[error("invalid remote model: {0}")]
    Remote(#[from] InvalidRemoteModel),
    #[error("workload did not finish within {limit_s} s of virtual time")]
    VirtualTimeExceeded { limit_s: f64 },
}

/// Renders the time series as CSV, header included.
pub fn timeseries_to_csv(series: &[SeriesPoint]) -> String {
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for point in series {
        out.push_str(&format!(
            "{:.1},{:.3},{},{:.2},{}\n",
            point.t_s, point.temp_c, point.freq_mhz, point.cpu_util, point.jobs_in_flight
        ));
    }
    out
}

struct OffloadedJob {
    job_id: u64,
    injected_at: f64,
    due: f64,
}

struct Run<'a> {
    model: &'a GatewayModel,
    policy: &'a PolicySpec,
    remote: &'a RemoteModel,
    works: Vec<f64>,
    state: GatewayState,
    /// Jobs injected so far; the next job gets id injected + 1.
    injected: usize,
    /// Scheduled (not completion-triggered) arrivals consumed so far.
    arrivals_consumed: usize,
    closed_loop: bool,
    /// Injection instants of jobs currently running locally.
    local_started: BTreeMap<u64, f64>,
    /// Offloaded jobs in flight; constant turnaround keeps this FIFO.
    offloaded: VecDeque<OffloadedJob>,
    records: Vec<JobRecord>,
}

impl Run<'_> {
    fn total(&self) -> usize {
        self.works.len()
    }

    /// When the next scheduled arrival is due, if any remain.
    fn next_arrival(&self, workload: &WorkloadSpec) -> Option<f64> {
        match *workload {
            WorkloadSpec::OpenLoop {
                inter_arrival_s, ..
            } => (self.arrivals_consumed < self.total())
                .then(|| self.arrivals_consumed as f64 * inter_arrival_s),
            WorkloadSpec::ClosedLoop { parallelism, .. } => {
                (self.arrivals_consumed < (parallelism as usize).min(self.total()))
                    .then_some(0.0)
            }
        }
    }

    /// Samples the gateway, decides, and either admits the job locally or
    /// puts it in flight to the remote.
    fn inject(&mut self, at_s: f64) {
        let job_id = (self.injected + 1) as u64;
        let work = self.works[self.injected];
        self.injected += 1;
        let decision = decide(self.policy, &snapshot(self.model, &self.state));
        match decision.target {
            Target::Local => {
                self.state.admit(job_id, work);
                self.local_started.insert(job_id, at_s);
            }
            Target::Remote => self.offloaded.push_back(OffloadedJob {
                job_id,
                injected_at: at_s,
                due: at_s + self.remote.turnaround_s(),
            }),
        }
    }

    /// A completion frees capacity; in closed loop it also pulls the next
    /// job in immediately.
    fn on_completion(&mut self, record: JobRecord, at_s: f64) {
        self.records.push(record);
        if self.closed_loop && self.injected < self.total() {
            self.inject(at_s);
        }
    }

    fn complete_local(&mut self, job_id: u64, at_s: f64) {
        let started = self
            .local_started
            .remove(&job_id)
            .expect("every running job was admitted");
        self.on_completion(
            JobRecord {
                job_id,
                location: Location::Local,
                duration_s: at_s - started,
                success: true,
                started_at: started,
                finished_at: at_s,
            },
            at_s,
        );
    }

    /// Processes every due instant event: remote completions first, then
    /// scheduled arrivals.
    fn process_due(&mut self, workload: &WorkloadSpec, now_s: f64) {
        while self
            .offloaded
            .front()
            .is_some_and(|j| j.due <= now_s + TIME_EPS)
        {
            let job = self.offloaded.pop_front().expect("front checked");
            self.on_completion(
                JobRecord {
                    job_id: job.job_id,
                    location: Location::Remote,
                    duration_s: job.due - job.injected_at,
                    success: true,
                    started_at: job.injected_at,
                    finished_at: job.due,
                },
                job.due,
            );
        }
        while self
            .next_arrival(workload)
            .is_some_and(|a| a <= now_s + TIME_EPS)
        {
            self.arrivals_consumed += 1;
            self.inject(now_s);
        }
    }

    fn sample(&self) -> SeriesPoint {
        let n = self.state.running.len();
        SeriesPoint {
            t_s: self.state.clock_s,
            temp_c: self.state.temp_c,
            freq_mhz: self.model.freq_levels_mhz[self.state.freq_index],
            cpu_util: self.model.busy_cores(n) / f64::from(self.model.cores),
            jobs_in_flight: n as u32,
        }
    }
}

/// Runs `workload` against the gateway under `policy`, with offloaded jobs
/// served by `remote`. See [`simulate_with_limit`] for the virtual-time
/// guard.
pub fn simulate(
    model: &GatewayModel,
    workload: &WorkloadSpec,
    policy: &PolicySpec,
    remote: &RemoteModel,
) -> Result<SimResult, SimError> {
    simulate_with_limit(model, workload, policy, remote, DEFAULT_MAX_VIRTUAL_TIME_S)
}

/// [`simulate`] with an explicit virtual-time budget: if jobs are still
/// unfinished at `max_virtual_time_s`, the run fails rather than spinning.
pub fn simulate_with_limit(
    model: &GatewayModel,
    workload: &WorkloadSpec,
    policy: &PolicySpec,
    remote: &RemoteModel,
    max_virtual_time_s: f64,
) -> Result<SimResult, SimError> {
    model.validated()?;
    workload.validated()?;
    remote.validated()?;

    let total = workload.total_jobs() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(workload.seed());
    let jitter = model.duration_jitter_s;
    let works: Vec<f64> = (0..total)
        .map(|_| {
            let noise = if jitter > 0.0 {
                rng.gen_range(-jitter..jitter)
            } else {
                0.0
            };
            model.base_job_work + noise
        })
        .collect();

    let mut run = Run {
        model,
        policy,
        remote,
        works,
        state: GatewayState::initial(model),
        injected: 0,
        arrivals_consumed: 0,
        closed_loop: matches!(workload, WorkloadSpec::ClosedLoop { .. }),
        local_started: BTreeMap::new(),
        offloaded: VecDeque::new(),
        records: Vec::with_capacity(total),
    };
    let mut series = Vec::new();

    let mut boundary: u64 = 0;
    loop {
        let t = boundary as f64 * SIM_DT_S;
        if t > max_virtual_time_s {
            return Err(SimError::VirtualTimeExceeded {
                limit_s: max_virtual_time_s,
            });
        }
        run.process_due(workload, t);
        series.push(run.sample());
        if run.records.len() == total {
            break;
        }

        let cell_end = (boundary + 1) as f64 * SIM_DT_S;
        loop {
            let mut target = cell_end;
            if let Some(arrival) = run.next_arrival(workload) {
                target = target.min(arrival.max(run.state.clock_s));
            }
            if let Some(job) = run.offloaded.front() {
                target = target.min(job.due.max(run.state.clock_s));
            }
            match advance_until(model, &mut run.state, target) {
                Advance::Completed(completion) => {
                    run.complete_local(completion.job_id, completion.at_s);
                }
                Advance::Reached => {
                    if run.state.clock_s >= cell_end - TIME_EPS {
                        break;
                    }
                    let now = run.state.clock_s;
                    run.process_due(workload, now);
                }
            }
        }
        governor_tick(model, &mut run.state);
        boundary += 1;
    }

    let mut records = run.records;
    records.sort_by_key(|r| r.job_id);
    Ok(SimResult { records, series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::stats;
    use crate::policy::parse_policy;

    fn model() -> GatewayModel {
        GatewayModel::default()
    }

    fn closed(parallelism: u32, total_jobs: u32) -> WorkloadSpec {
        WorkloadSpec::ClosedLoop {
            parallelism,
            total_jobs,
            seed: 7,
        }
    }

    fn open(inter_arrival_s: f64, total_jobs: u32) -> WorkloadSpec {
        WorkloadSpec::OpenLoop {
            inter_arrival_s,
            total_jobs,
            seed: 7,
        }
    }

    #[test]
    fn always_remote_leaves_the_gateway_cold() {
        let remote = RemoteModel::default();
        let result = simulate(
            &model(),
            &open(5.0, 20),
            &PolicySpec::AlwaysRemote,
            &remote,
        )
        .unwrap();
        assert_eq!(result.records.len(), 20);
        for record in &result.records {
            assert_eq!(record.location, Location::Remote);
            assert!((record.duration_s - remote.turnaround_s()).abs() < 1e-9);
        }
        for point in &result.series {
            assert_eq!(point.jobs_in_flight, 0);
            assert!((point.temp_c - model().t_ambient_c).abs() < 1.0);
        }
    }

    #[test]
    fn cold_closed_loop_durations_sit_in_the_fitted_band() {
        let result = simulate(
            &model(),
            &closed(4, 16),
            &PolicySpec::AlwaysLocal,
            &RemoteModel::default(),
        )
        .unwrap();
        assert_eq!(result.records.len(), 16);
        for record in &result.records {
            assert_eq!(record.location, Location::Local);
            assert!(
                (23.0..=26.0).contains(&record.duration_s),
                "cold-run duration {} outside [23, 26]",
                record.duration_s
            );
        }
    }

    #[test]
    fn closed_loop_keeps_parallelism_jobs_in_flight() {
        let result = simulate(
            &model(),
            &closed(4, 24),
            &PolicySpec::AlwaysLocal,
            &RemoteModel::default(),
        )
        .unwrap();
        let plateau = &result.series[10..result.series.len() - 300];
        assert!(plateau.iter().all(|p| p.jobs_in_flight == 4));
    }

    #[test]
    fn same_seed_reproduces_bitwise_identical_results() {
        let policy = parse_policy("jobs:4").unwrap();
        let first = simulate(&model(), &open(5.0, 40), &policy, &RemoteModel::default()).unwrap();
        let second = simulate(&model(), &open(5.0, 40), &policy, &RemoteModel::default()).unwrap();
        assert_eq!(first, second);
        assert_eq!(
            timeseries_to_csv(&first.series),
            timeseries_to_csv(&second.series)
        );
    }

    #[test]
    fn jobs_threshold_splits_the_workload() {
        let policy = parse_policy("jobs:4").unwrap();
        let result = simulate(&model(), &open(5.0, 60), &policy, &RemoteModel::default()).unwrap();
        let summary = stats(&result.records);
        assert!(summary.local_fraction > 0.4 && summary.local_fraction < 0.95);
        // The admission bound holds at every sampled instant.
        assert!(result.series.iter().all(|p| p.jobs_in_flight <= 5));
    }

    #[test]
    fn zero_jobs_is_a_single_idle_sample() {
        let result = simulate(
            &model(),
            &open(5.0, 0),
            &PolicySpec::AlwaysLocal,
            &RemoteModel::default(),
        )
        .unwrap();
        assert!(result.records.is_empty());
        assert_eq!(result.series.len(), 1);
        assert_eq!(result.series[0].jobs_in_flight, 0);
    }

    #[test]
    fn nonterminating_workloads_hit_the_virtual_time_guard() {
        let result = simulate(
            &model(),
            &open(50.0, 100),
            &PolicySpec::AlwaysLocal,
            &RemoteModel::default(),
        );
        assert_eq!(
            result,
            Err(SimError::VirtualTimeExceeded { limit_s: 1200.0 })
        );
    }

    #[test]
    fn sustained_load_stays_within_the_overshoot_bound() {
        let m = model();
        let result = simulate(
            &m,
            &closed(4, 60),
            &PolicySpec::AlwaysLocal,
            &RemoteModel::default(),
        )
        .unwrap();
        let bound = m.t_limit_c + m.heat_rate * f64::from(m.cores) * SIM_DT_S;
        for point in &result.series {
            assert!(
                point.temp_c <= bound,
                "temp {} exceeds the one-step overshoot bound {}",
                point.temp_c,
                bound
            );
        }
        // And the run did, in fact, throttle.
        assert!(result.series.iter().any(|p| p.freq_mhz < 1200));
    }

    #[test]
    fn lighter_arrivals_never_reduce_the_local_fraction() {
        for spec in ["jobs:4", "cpu:0.75", "mem:0.75", "temp:75"] {
            let policy = parse_policy(spec).unwrap();
            let mut last = -1.0;
            for inter in [4.0, 5.0, 6.5, 8.0, 10.0] {
                let result = simulate(
                    &model(),
                    &open(inter, 60),
                    &policy,
                    &RemoteModel::default(),
                )
                .unwrap();
                let fraction = stats(&result.records).local_fraction;
                assert!(
                    fraction >= last,
                    "{spec}: local fraction fell from {last} to {fraction} at inter-arrival {inter}"
                );
                last = fraction;
            }
        }
    }

    #[test]
    fn csv_has_the_pinned_header_and_formats() {
        let result = simulate(
            &model(),
            &open(5.0, 2),
            &PolicySpec::AlwaysRemote,
            &RemoteModel::default(),
        )
        .unwrap();
        let csv = timeseries_to_csv(&result.series);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TIMESERIES_HEADER));
        assert_eq!(lines.next(), Some("0.0,65.000,1200,0.00,0"));
    }
}
