//! A deterministic virtual gateway with the thermal behavior of a small
//! passively cooled board: cores heat up under load, the frequency governor
//! throttles at the temperature limit, and jobs slow down when cores are
//! shared or the clock drops. Everything advances on virtual time, so
//! minutes-long thermal experiments run in milliseconds and repeat
//! bit-for-bit from a seed.
//!
//! The model is deliberately small: linear heating plus Newton cooling,
//! stepped frequency levels with hysteresis, and uniform core sharing. The
//! default constants are fitted so a four-core full load reproduces the
//! reference trajectory (job durations 23–26 s cold, throttling near
//! t = 155 s, durations settling around 29 s hot).
//!
//! [`step`] advances a [`GatewayState`] by one controller period;
//! [`simulate`] runs a whole workload against a policy and produces job
//! records plus a per-period time series.

mod run;
mod workload;

pub use run::{
    simulate, simulate_with_limit, timeseries_to_csv, SeriesPoint, SimError, SimResult,
    DEFAULT_MAX_VIRTUAL_TIME_S, TIMESERIES_HEADER,
};
pub use workload::{InvalidRemoteModel, InvalidWorkload, RemoteModel, WorkloadSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{FieldValidity, MetricsSnapshot};

/// Controller and sampling period of the simulation, in seconds. Work and
/// temperature integrate continuously between job events; the frequency
/// governor and the time-series sampler run on this grid.
pub const SIM_DT_S: f64 = 0.1;

/// Remaining work at or below this is complete (guards float residue).
const WORK_EPS: f64 = 1e-9;

/// Physical constants of the simulated gateway.
///
/// `heat_rate` is the temperature slope contributed by one fully busy core
/// at top frequency; cooling follows Newton's law toward `t_ambient_c` with
/// coefficient `cool_rate`. Heat production scales with
/// `(freq/top_freq)^freq_heat_exponent`, which is what makes throttling
/// effective: dropping a level reduces heat faster than it reduces speed.
/// Job cost is measured in core-seconds at top frequency: one job alone on
/// one core at top frequency takes `base_job_work` seconds plus seeded
/// uniform jitter of ±`duration_jitter_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayModel {
    pub cores: u32,
    /// Available frequency levels, strictly descending; index 0 is the top.
    pub freq_levels_mhz: Vec<u32>,
    pub t_ambient_c: f64,
    pub t_limit_c: f64,
    /// The governor recovers one level when temp < t_limit_c - hysteresis_c.
    pub hysteresis_c: f64,
    /// °C/s added per fully busy core at top frequency.
    pub heat_rate: f64,
    /// 1/s Newton cooling coefficient.
    pub cool_rate: f64,
    /// Exponent on relative frequency in the heat term. Dynamic power scales
    /// between f² and f³ depending on how far voltage tracks frequency.
    pub freq_heat_exponent: f64,
    /// Core-seconds at top frequency per job, before jitter.
    pub base_job_work: f64,
    /// Half-width of the uniform per-job work jitter, in seconds.
    pub duration_jitter_s: f64,
    /// Memory occupancy: mem_util = mem_util_base + mem_util_per_job · n,
    /// clamped to [0, 1].
    pub mem_util_base: f64,
    pub mem_util_per_job: f64,
}

impl Default for GatewayModel {
    fn default() -> Self {
        GatewayModel {
            cores: 4,
            freq_levels_mhz: vec![1200, 900, 600],
            t_ambient_c: 65.0,
            t_limit_c: 80.0,
            hysteresis_c: 3.0,
            heat_rate: 0.0461,
            cool_rate: 0.0094,
            freq_heat_exponent: 2.5,
            base_job_work: 24.5,
            duration_jitter_s: 1.5,
            mem_util_base: 0.35,
            mem_util_per_job: 0.05,
        }
    }
}

impl GatewayModel {
    pub fn validated(&self) -> Result<&Self, InvalidModel> {
        if self.cores == 0 {
            return Err(InvalidModel::ZeroCores);
        }
        if self.freq_levels_mhz.is_empty() {
            return Err(InvalidModel::NoFreqLevels);
        }
        if self.freq_levels_mhz.windows(2).any(|w| w[1] >= w[0]) || self.freq_levels_mhz[0] == 0 {
            return Err(InvalidModel::FreqLevelsNotDescending);
        }
        if !(self.t_limit_c > self.t_ambient_c) {
            return Err(InvalidModel::LimitNotAboveAmbient {
                limit: self.t_limit_c,
                ambient: self.t_ambient_c,
            });
        }
        for (name, value) in [
            ("heat_rate", self.heat_rate),
            ("cool_rate", self.cool_rate),
            ("hysteresis_c", self.hysteresis_c),
            ("base_job_work", self.base_job_work),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(InvalidModel::NonPositive { name, value });
            }
        }
        if !(self.freq_heat_exponent >= 0.0) || !self.freq_heat_exponent.is_finite() {
            return Err(InvalidModel::NonPositive {
                name: "freq_heat_exponent",
                value: self.freq_heat_exponent,
            });
        }
        if !(self.duration_jitter_s >= 0.0) || self.duration_jitter_s >= self.base_job_work {
            return Err(InvalidModel::JitterOutOfRange {
                jitter: self.duration_jitter_s,
                work: self.base_job_work,
            });
        }
        if !(0.0..=1.0).contains(&self.mem_util_base) || !(self.mem_util_per_job >= 0.0) {
            return Err(InvalidModel::BadMemFunction {
                base: self.mem_util_base,
                per_job: self.mem_util_per_job,
            });
        }
        Ok(self)
    }

    pub fn top_freq_mhz(&self) -> u32 {
        self.freq_levels_mhz[0]
    }

    /// Relative speed at a frequency level: freq / top_freq, in (0, 1].
    pub fn speed(&self, freq_index: usize) -> f64 {
        f64::from(self.freq_levels_mhz[freq_index]) / f64::from(self.freq_levels_mhz[0])
    }

    /// Cores actually busy with `n` running jobs.
    pub fn busy_cores(&self, n: usize) -> f64 {
        (n as f64).min(f64::from(self.cores))
    }

    /// Work drained per second per job: relative speed times the core share
    /// each job gets once jobs outnumber cores.
    pub fn drain_rate(&self, n: usize, freq_index: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let share = (f64::from(self.cores) / n as f64).min(1.0);
        self.speed(freq_index) * share
    }

    fn temp_slope(&self, state: &GatewayState) -> f64 {
        let heat_load =
            self.busy_cores(state.running.len()) * self.speed(state.freq_index).powf(self.freq_heat_exponent);
        self.heat_rate * heat_load - self.cool_rate * (state.temp_c - self.t_ambient_c)
    }

    fn recover_below_c(&self) -> f64 {
        self.t_limit_c - self.hysteresis_c
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InvalidModel {
    #[error("a gateway needs at least one core")]
    ZeroCores,
    #[error("at least one frequency level is required")]
    NoFreqLevels,
    #[error("frequency levels must be positive and strictly descending")]
    FreqLevelsNotDescending,
    #[error("temperature limit {limit} must exceed ambient {ambient}")]
    LimitNotAboveAmbient { limit: f64, ambient: f64 },
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("duration jitter {jitter} must be nonnegative and below base work {work}")]
    JitterOutOfRange { jitter: f64, work: f64 },
    #[error("memory occupancy (base {base}, per job {per_job}) out of range")]
    BadMemFunction { base: f64, per_job: f64 },
}

/// One job currently executing on the gateway.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningJob {
    pub job_id: u64,
    pub remaining_work: f64,
}

/// Instantaneous state of the simulated gateway.
#[derive(Debug, Clone, PartialEq)]
pub struct GatewayState {
    pub clock_s: f64,
    pub temp_c: f64,
    /// Index into the model's freq_levels_mhz; 0 is the top level.
    pub freq_index: usize,
    /// Admission order, which is also the drain-tie order.
    pub running: Vec<RunningJob>,
    /// Governor latch: a level drop fires once per upward crossing of the
    /// limit, re-arming only after the temperature falls back below it.
    pub throttle_armed: bool,
}

impl GatewayState {
    pub fn initial(model: &GatewayModel) -> Self {
        GatewayState {
            clock_s: 0.0,
            temp_c: model.t_ambient_c,
            freq_index: 0,
            running: Vec::new(),
            throttle_armed: true,
        }
    }

    pub fn admit(&mut self, job_id: u64, work: f64) {
        self.running.push(RunningJob {
            job_id,
            remaining_work: work,
        });
    }

    pub fn jobs_in_flight(&self) -> u32 {
        self.running.len() as u32
    }
}

/// A job that finished during a step, with its exact virtual completion
/// time (which generally falls inside a controller period).
#[derive(Debug, Clone, PartialEq)]
pub struct JobCompletion {
    pub job_id: u64,
    pub at_s: f64,
}

/// What the gateway reports to an offloading policy.
pub fn snapshot(model: &GatewayModel, state: &GatewayState) -> MetricsSnapshot {
    let n = state.running.len();
    MetricsSnapshot {
        mem_util: (model.mem_util_base + model.mem_util_per_job * n as f64).clamp(0.0, 1.0),
        cpu_util: model.busy_cores(n) / f64::from(model.cores),
        cpu_temp_c: state.temp_c,
        jobs_in_flight: n as u32,
        cpu_freq_mhz: model.freq_levels_mhz[state.freq_index],
        taken_at: state.clock_s,
        validity: FieldValidity::all_valid(),
    }
}

enum Advance {
    Reached,
    Completed(JobCompletion),
}

/// Integrates work and temperature up to `target_s`, stopping early at the
/// first job completion. Temperature follows the forward-difference form
/// temp += Δt·(heat_rate·weighted_busy − cool_rate·(temp − ambient)) with
/// the slope recomputed whenever the running set changes.
fn advance_until(model: &GatewayModel, state: &mut GatewayState, target_s: f64) -> Advance {
    let dt = target_s - state.clock_s;
    if dt <= 0.0 {
        return Advance::Reached;
    }
    let n = state.running.len();
    let slope = model.temp_slope(state);
    let rate = model.drain_rate(n, state.freq_index);
    let min_remaining = state
        .running
        .iter()
        .map(|j| j.remaining_work)
        .fold(f64::INFINITY, f64::min);
    let time_to_completion = if rate > 0.0 {
        min_remaining / rate
    } else {
        f64::INFINITY
    };

    let advance = time_to_completion.min(dt);
    state.temp_c += slope * advance;
    state.clock_s += advance;
    for job in &mut state.running {
        job.remaining_work -= rate * advance;
    }
    if time_to_completion <= dt {
        let done = state
            .running
            .iter()
            .position(|j| j.remaining_work <= WORK_EPS)
            .expect("the job that timed out has drained");
        let job = state.running.remove(done);
        return Advance::Completed(JobCompletion {
            job_id: job.job_id,
            at_s: state.clock_s,
        });
    }
    Advance::Reached
}

/// One governor evaluation: drop a level at the limit (once per crossing,
/// via the armed latch), recover a level below the hysteresis band.
fn governor_tick(model: &GatewayModel, state: &mut GatewayState) {
    if state.temp_c >= model.t_limit_c {
        if state.throttle_armed && state.freq_index + 1 < model.freq_levels_mhz.len() {
            state.freq_index += 1;
            state.throttle_armed = false;
        }
    } else {
        state.throttle_armed = true;
        if state.temp_c < model.recover_below_c() && state.freq_index > 0 {
            state.freq_index -= 1;
        }
    }
}

/// Advances the gateway by `dt_s`: drains running jobs (completing them at
/// their exact sub-step instants), integrates temperature, then runs one
/// governor evaluation at the end of the period.
pub fn step(model: &GatewayModel, state: &mut GatewayState, dt_s: f64) -> Vec<JobCompletion> {
    debug_assert!(dt_s > 0.0, "step requires a positive dt");
    let target = state.clock_s + dt_s;
    let mut completions = Vec::new();
    loop {
        match advance_until(model, state, target) {
            Advance::Completed(completion) => completions.push(completion),
            Advance::Reached => break,
        }
    }
    governor_tick(model, state);
    completions
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> GatewayModel {
        GatewayModel::default()
    }

    #[test]
    fn default_model_validates() {
        assert!(model().validated().is_ok());
    }

    #[test]
    fn ascending_freq_levels_are_rejected() {
        let bad = GatewayModel {
            freq_levels_mhz: vec![600, 900],
            ..model()
        };
        assert_eq!(
            bad.validated(),
            Err(InvalidModel::FreqLevelsNotDescending)
        );
    }

    #[test]
    fn idle_gateway_at_ambient_only_advances_the_clock() {
        let model = model();
        let mut state = GatewayState::initial(&model);
        let completions = step(&model, &mut state, 0.1);
        assert!(completions.is_empty());
        assert_eq!(state.temp_c, model.t_ambient_c);
        assert_eq!(state.freq_index, 0);
        assert!((state.clock_s - 0.1).abs() < 1e-12);
    }

    #[test]
    fn lone_job_drains_in_its_work_time() {
        let model = model();
        let mut state = GatewayState::initial(&model);
        state.admit(1, 2.0);
        let mut completions = Vec::new();
        for _ in 0..25 {
            completions.extend(step(&model, &mut state, 0.1));
        }
        assert_eq!(completions.len(), 1);
        assert_eq!(completions[0].job_id, 1);
        assert!((completions[0].at_s - 2.0).abs() < 1e-9);
    }

    #[test]
    fn oversubscribed_cores_share_evenly() {
        let model = model();
        // 8 jobs on 4 cores: each drains at half speed.
        assert!((model.drain_rate(8, 0) - 0.5).abs() < 1e-12);
        // 4 or fewer at top frequency: full speed.
        assert!((model.drain_rate(4, 0) - 1.0).abs() < 1e-12);
        // Lowest level halves the clock.
        assert!((model.drain_rate(1, 2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn completion_splits_a_step_for_the_survivors() {
        let model = model();
        let mut state = GatewayState::initial(&model);
        // Five jobs share four cores (rate 0.8); when the short one ends
        // mid-step the rest speed up to full rate for the remainder.
        state.admit(1, 0.04);
        for id in 2..=5 {
            state.admit(id, 10.0);
        }
        let completions = step(&model, &mut state, 0.1);
        assert_eq!(completions.len(), 1);
        assert!((completions[0].at_s - 0.05).abs() < 1e-9);
        let drained = 10.0 - state.running[0].remaining_work;
        assert!((drained - (0.05 * 0.8 + 0.05 * 1.0)).abs() < 1e-9);
    }

    #[test]
    fn governor_drops_once_per_crossing_and_recovers_with_hysteresis() {
        let model = model();
        let mut state = GatewayState::initial(&model);
        state.temp_c = model.t_limit_c + 0.2;
        governor_tick(&model, &mut state);
        assert_eq!(state.freq_index, 1);
        // Still hot on the next evaluation: the latch prevents a cascade.
        governor_tick(&model, &mut state);
        assert_eq!(state.freq_index, 1);
        // Below the limit but inside the hysteresis band: no recovery yet.
        state.temp_c = model.t_limit_c - 1.0;
        governor_tick(&model, &mut state);
        assert_eq!(state.freq_index, 1);
        // Below limit - hysteresis: recover one level.
        state.temp_c = model.recover_below_c() - 0.1;
        governor_tick(&model, &mut state);
        assert_eq!(state.freq_index, 0);
    }

    #[test]
    fn sustained_full_load_throttles_near_the_fitted_onset() {
        let model = model();
        let mut state = GatewayState::initial(&model);
        for id in 1..=4 {
            state.admit(id, f64::INFINITY);
        }
        let mut onset = None;
        for _ in 0..3000 {
            step(&model, &mut state, SIM_DT_S);
            if onset.is_none() && state.temp_c >= model.t_limit_c {
                onset = Some(state.clock_s);
            }
        }
        let onset = onset.expect("four busy cores must reach the limit");
        assert!(
            (140.0..200.0).contains(&onset),
            "onset {onset} outside the anchor window"
        );
        // After onset the governor duty-cycles between the top two levels.
        assert!(state.temp_c < model.t_limit_c + 0.5);
    }

    #[test]
    fn one_busy_core_never_throttles() {
        let model = model();
        let mut state = GatewayState::initial(&model);
        state.admit(1, f64::INFINITY);
        for _ in 0..4000 {
            step(&model, &mut state, SIM_DT_S);
        }
        assert_eq!(state.freq_index, 0);
        // Equilibrium: ambient + heat/cool ratio for one core.
        let t_eq = model.t_ambient_c + model.heat_rate / model.cool_rate;
        assert!((state.temp_c - t_eq).abs() < 0.5);
    }

    #[test]
    fn snapshot_reflects_gateway_state() {
        let model = model();
        let mut state = GatewayState::initial(&model);
        for id in 1..=6 {
            state.admit(id, 10.0);
        }
        state.temp_c = 71.25;
        let snap = snapshot(&model, &state);
        assert_eq!(snap.jobs_in_flight, 6);
        assert_eq!(snap.cpu_util, 1.0);
        assert!((snap.mem_util - 0.65).abs() < 1e-12);
        assert_eq!(snap.cpu_temp_c, 71.25);
        assert_eq!(snap.cpu_freq_mhz, 1200);
        assert!(snap.validity.temp);
    }

    #[test]
    fn empty_running_set_keeps_mem_at_base() {
        let model = model();
        let state = GatewayState::initial(&model);
        let snap = snapshot(&model, &state);
        assert_eq!(snap.mem_util, model.mem_util_base);
        assert_eq!(snap.cpu_util, 0.0);
        assert_eq!(snap.jobs_in_flight, 0);
    }
}
