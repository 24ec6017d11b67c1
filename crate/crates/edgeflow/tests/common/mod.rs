//! Shared test support: an event-driven reference implementation of the
//! virtual gateway.
//!
//! The simulator in the library integrates temperature with fixed forward
//! steps. The oracle here instead advances from event to event (arrival,
//! completion, governor tick) and moves temperature with the closed-form
//! exponential between events, so the two share no integration code. Tests
//! compare their job timings and thermal trajectories.

// Each integration-test target compiles this module independently, so items
// one target leaves unused would otherwise warn in the other.
#![allow(dead_code)]

use edgeflow::sim::{GatewayModel, WorkloadSpec, SIM_DT_S};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRecord {
    pub job_id: u64,
    pub started_at: f64,
    pub finished_at: f64,
}

/// One span of constant per-job drain rate, covering all jobs running in it.
#[derive(Debug, Clone, Copy)]
pub struct RateSegment {
    pub from_s: f64,
    pub to_s: f64,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    /// Per-job timings, sorted by job id.
    pub records: Vec<OracleRecord>,
    /// Temperature at t = 0, dt, 2·dt, …, through the first tick at or past
    /// the last completion.
    pub grid_temps: Vec<f64>,
    /// Exact instant the temperature first reached the throttle limit.
    pub first_limit_crossing_s: Option<f64>,
    /// Constant-rate spans; every running job drains at `rate` within one.
    pub segments: Vec<RateSegment>,
}

impl OracleRun {
    /// Integral of the drain rate applied to a job over `[from, to]`.
    pub fn applied_work(&self, from_s: f64, to_s: f64) -> f64 {
        self.segments
            .iter()
            .map(|seg| {
                let lo = seg.from_s.max(from_s);
                let hi = seg.to_s.min(to_s);
                if hi > lo {
                    seg.rate * (hi - lo)
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// Draws per-job works exactly as the simulator does.
pub fn drawn_works(model: &GatewayModel, workload: &WorkloadSpec) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(workload.seed());
    let jitter = model.duration_jitter_s;
    (0..workload.total_jobs())
        .map(|_| {
            let noise = if jitter > 0.0 {
                rng.gen_range(-jitter..jitter)
            } else {
                0.0
            };
            model.base_job_work + noise
        })
        .collect()
}

struct RunningJob {
    job_id: u64,
    remaining: f64,
    started_at: f64,
}

struct Oracle<'a> {
    model: &'a GatewayModel,
    t: f64,
    temp: f64,
    freq_index: usize,
    armed: bool,
    running: Vec<RunningJob>,
    works: Vec<f64>,
    injected: usize,
    records: Vec<OracleRecord>,
    segments: Vec<RateSegment>,
    first_limit_crossing_s: Option<f64>,
}

impl Oracle<'_> {
    fn speed(&self) -> f64 {
        f64::from(self.model.freq_levels_mhz[self.freq_index])
            / f64::from(self.model.freq_levels_mhz[0])
    }

    fn rate(&self) -> f64 {
        let n = self.running.len();
        if n == 0 {
            return 0.0;
        }
        self.speed() * (f64::from(self.model.cores) / n as f64).min(1.0)
    }

    fn busy_effective(&self) -> f64 {
        let busy = (self.running.len() as f64).min(f64::from(self.model.cores));
        busy * self.speed().powf(self.model.freq_heat_exponent)
    }

    fn equilibrium(&self) -> f64 {
        self.model.t_ambient_c + self.model.heat_rate * self.busy_effective() / self.model.cool_rate
    }

    /// Closed-form temperature after `dt` with the current running set.
    fn temp_after(&self, dt: f64) -> f64 {
        let t_eq = self.equilibrium();
        t_eq + (self.temp - t_eq) * (-self.model.cool_rate * dt).exp()
    }

    /// Exact instant within the next `dt` seconds at which the temperature
    /// reaches `target`, if it does.
    fn crossing_within(&self, target: f64, dt: f64) -> Option<f64> {
        let t_eq = self.equilibrium();
        let gap_now = target - self.temp;
        let gap_eq = target - t_eq;
        // Rising toward t_eq only if t_eq is past the target and we're below.
        if gap_now <= 0.0 || gap_eq >= 0.0 {
            return None;
        }
        let tau = ((t_eq - self.temp) / (t_eq - target)).ln() / self.model.cool_rate;
        (tau <= dt + TIME_EPS).then_some(self.t + tau)
    }

    /// Moves time forward by `dt` with no events inside: temperature follows
    /// the exponential, every running job drains linearly.
    fn advance(&mut self, dt: f64) {
        if dt <= 0.0 {
            return;
        }
        let rate = self.rate();
        if self.first_limit_crossing_s.is_none() {
            self.first_limit_crossing_s = self.crossing_within(self.model.t_limit_c, dt);
        }
        self.temp = self.temp_after(dt);
        if !self.running.is_empty() {
            self.segments.push(RateSegment {
                from_s: self.t,
                to_s: self.t + dt,
                rate,
            });
            for job in &mut self.running {
                job.remaining -= rate * dt;
            }
        }
        self.t += dt;
    }

    fn inject(&mut self) {
        let job_id = (self.injected + 1) as u64;
        self.running.push(RunningJob {
            job_id,
            remaining: self.works[self.injected],
            started_at: self.t,
        });
        self.injected += 1;
    }

    fn governor_tick(&mut self) {
        if self.temp >= self.model.t_limit_c {
            if self.armed && self.freq_index + 1 < self.model.freq_levels_mhz.len() {
                self.freq_index += 1;
                self.armed = false;
            }
        } else {
            self.armed = true;
            if self.temp < self.model.t_limit_c - self.model.hysteresis_c && self.freq_index > 0 {
                self.freq_index -= 1;
            }
        }
    }

    /// Time until the earliest running job finishes at the current rate.
    fn time_to_completion(&self) -> f64 {
        let rate = self.rate();
        if rate == 0.0 {
            return f64::INFINITY;
        }
        self.running
            .iter()
            .map(|j| j.remaining / rate)
            .fold(f64::INFINITY, f64::min)
    }

    fn complete_due_jobs(&mut self) -> usize {
        let mut completed = 0;
        while let Some(pos) = self
            .running
            .iter()
            .position(|j| j.remaining <= 1e-9)
        {
            let job = self.running.remove(pos);
            self.records.push(OracleRecord {
                job_id: job.job_id,
                started_at: job.started_at,
                finished_at: self.t,
            });
            completed += 1;
        }
        completed
    }
}

/// Runs `workload` always-local on the reference gateway.
pub fn oracle_local_run(model: &GatewayModel, workload: &WorkloadSpec) -> OracleRun {
    let total = workload.total_jobs() as usize;
    let works = drawn_works(model, workload);
    let mut oracle = Oracle {
        model,
        t: 0.0,
        temp: model.t_ambient_c,
        freq_index: 0,
        armed: true,
        running: Vec::new(),
        works,
        injected: 0,
        records: Vec::new(),
        segments: Vec::new(),
        first_limit_crossing_s: None,
    };

    let (closed_parallelism, open_inter) = match *workload {
        WorkloadSpec::ClosedLoop { parallelism, .. } => (Some(parallelism as usize), None),
        WorkloadSpec::OpenLoop {
            inter_arrival_s, ..
        } => (None, Some(inter_arrival_s)),
    };
    let mut arrivals_consumed = 0usize;
    if let Some(p) = closed_parallelism {
        while arrivals_consumed < p.min(total) {
            arrivals_consumed += 1;
            oracle.inject();
        }
    }

    let mut grid_temps = vec![oracle.temp];
    let mut tick = 1u64;
    while oracle.records.len() < total {
        let tick_at = tick as f64 * SIM_DT_S;
        let arrival_at = match open_inter {
            Some(inter) if arrivals_consumed < total => {
                Some(arrivals_consumed as f64 * inter)
            }
            _ => None,
        };
        let completion_at = oracle.t + oracle.time_to_completion();

        let mut next = tick_at.min(completion_at);
        if let Some(a) = arrival_at {
            next = next.min(a.max(oracle.t));
        }
        oracle.advance(next - oracle.t);

        if completion_at <= next + TIME_EPS {
            let done = oracle.complete_due_jobs();
            if closed_parallelism.is_some() {
                for _ in 0..done {
                    if oracle.injected < total {
                        oracle.inject();
                    }
                }
            }
        }
        if arrival_at.is_some_and(|a| a <= oracle.t + TIME_EPS) {
            arrivals_consumed += 1;
            oracle.inject();
        }
        if (tick_at - oracle.t).abs() <= TIME_EPS {
            grid_temps.push(oracle.temp);
            oracle.governor_tick();
            tick += 1;
        }
    }

    // Close the grid on the first tick at or past the last completion, the
    // same boundary on which the simulator emits its final row.
    if (oracle.t - (tick - 1) as f64 * SIM_DT_S).abs() > TIME_EPS {
        let tick_at = tick as f64 * SIM_DT_S;
        oracle.advance(tick_at - oracle.t);
        grid_temps.push(oracle.temp);
    }

    let mut records = oracle.records;
    records.sort_by_key(|r| r.job_id);
    OracleRun {
        records,
        grid_temps,
        first_limit_crossing_s: oracle.first_limit_crossing_s,
        segments: oracle.segments,
    }
}

/// Draws a small random always-local scenario from `rng`.
pub fn random_small_scenario(rng: &mut impl Rng) -> WorkloadSpec {
    let total_jobs = rng.gen_range(1..=10);
    let seed = rng.gen();
    if rng.gen_bool(0.5) {
        WorkloadSpec::ClosedLoop {
            parallelism: rng.gen_range(1..=6),
            total_jobs,
            seed,
        }
    } else {
        WorkloadSpec::OpenLoop {
            inter_arrival_s: rng.gen_range(1.0..15.0),
            total_jobs,
            seed,
        }
    }
}
