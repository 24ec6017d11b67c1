//! Fixed-step simulator vs. the event-driven reference.

mod common;

use common::{drawn_works, oracle_local_run, random_small_scenario};
use edgeflow::policy::PolicySpec;
use edgeflow::sim::{simulate, GatewayModel, RemoteModel, WorkloadSpec, SIM_DT_S};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn simulate_local(model: &GatewayModel, workload: &WorkloadSpec) -> edgeflow::sim::SimResult {
    simulate(
        model,
        workload,
        &PolicySpec::AlwaysLocal,
        &RemoteModel::default(),
    )
    .expect("scenario must terminate")
}

#[test]
fn fifty_random_small_scenarios_match_the_oracle() {
    let model = GatewayModel::default();
    let mut meta = ChaCha8Rng::seed_from_u64(0x0E57_1A7E);
    for case in 0..50 {
        let workload = random_small_scenario(&mut meta);
        let sim = simulate_local(&model, &workload);
        let oracle = oracle_local_run(&model, &workload);

        assert_eq!(
            sim.records.len(),
            oracle.records.len(),
            "case {case}: job counts differ ({workload:?})"
        );
        for (s, o) in sim.records.iter().zip(&oracle.records) {
            assert_eq!(s.job_id, o.job_id, "case {case}: id order differs");
            assert!(
                (s.started_at - o.started_at).abs() <= SIM_DT_S,
                "case {case} job {}: start {} vs oracle {} ({workload:?})",
                s.job_id,
                s.started_at,
                o.started_at
            );
            assert!(
                (s.finished_at - o.finished_at).abs() <= SIM_DT_S,
                "case {case} job {}: finish {} vs oracle {} ({workload:?})",
                s.job_id,
                s.finished_at,
                o.finished_at
            );
        }
    }
}

#[test]
fn applied_work_is_conserved_within_one_step_quantum() {
    let model = GatewayModel::default();
    let mut meta = ChaCha8Rng::seed_from_u64(0x00C5_E2BE);
    for case in 0..20 {
        let workload = random_small_scenario(&mut meta);
        let sim = simulate_local(&model, &workload);
        let oracle = oracle_local_run(&model, &workload);
        let works = drawn_works(&model, &workload);
        for record in &sim.records {
            let applied = oracle.applied_work(record.started_at, record.finished_at);
            let drawn = works[(record.job_id - 1) as usize];
            assert!(
                (applied - drawn).abs() <= SIM_DT_S,
                "case {case} job {}: applied {applied} vs drawn {drawn}",
                record.job_id
            );
        }
    }
}

#[test]
fn throttled_run_matches_the_oracle_within_one_tick() {
    // Ten 80-second jobs keep four cores saturated long enough to cross the
    // throttle limit, exercising governor timing in both implementations.
    let model = GatewayModel {
        base_job_work: 80.0,
        duration_jitter_s: 4.0,
        ..GatewayModel::default()
    };
    let workload = WorkloadSpec::ClosedLoop {
        parallelism: 4,
        total_jobs: 10,
        seed: 9,
    };
    let sim = simulate_local(&model, &workload);
    let oracle = oracle_local_run(&model, &workload);

    let sim_onset = sim
        .series
        .iter()
        .find(|p| p.temp_c >= model.t_limit_c)
        .map(|p| p.t_s)
        .expect("sustained load must reach the limit");
    let oracle_onset = oracle
        .first_limit_crossing_s
        .expect("oracle must reach the limit too");
    assert!(
        (sim_onset - oracle_onset).abs() <= 2.0 * SIM_DT_S,
        "onset {sim_onset} vs oracle {oracle_onset}"
    );

    for (s, o) in sim.records.iter().zip(&oracle.records) {
        assert_eq!(s.job_id, o.job_id);
        assert!(
            (s.finished_at - o.finished_at).abs() <= SIM_DT_S,
            "job {}: finish {} vs oracle {}",
            s.job_id,
            s.finished_at,
            o.finished_at
        );
    }

    assert!(
        sim.series.len().abs_diff(oracle.grid_temps.len()) <= 1,
        "grid lengths {} vs {}",
        sim.series.len(),
        oracle.grid_temps.len()
    );
    let mut worst = 0.0f64;
    for (point, oracle_temp) in sim.series.iter().zip(&oracle.grid_temps) {
        worst = worst.max((point.temp_c - oracle_temp).abs());
    }
    assert!(
        worst <= 0.25,
        "fixed-step temperature drifted {worst} °C from the closed form"
    );
}

#[test]
fn cold_scenarios_agree_to_numerical_precision() {
    // Below the throttle regime the step integrator locates completions
    // exactly, so the two implementations should agree to float residue,
    // far inside the one-tick contract.
    let model = GatewayModel::default();
    let workload = WorkloadSpec::ClosedLoop {
        parallelism: 4,
        total_jobs: 10,
        seed: 1234,
    };
    let sim = simulate_local(&model, &workload);
    let oracle = oracle_local_run(&model, &workload);
    for (s, o) in sim.records.iter().zip(&oracle.records) {
        assert!(
            (s.finished_at - o.finished_at).abs() < 1e-6,
            "job {}: finish {} vs oracle {}",
            s.job_id,
            s.finished_at,
            o.finished_at
        );
    }
}
