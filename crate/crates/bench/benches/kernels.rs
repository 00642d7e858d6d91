use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nalgebra::Vector6;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use satuav::control::build_system;
use satuav::planner::{plan_oracle, OracleGrid, QNetwork};
use satuav::power::solve_root_power_for_ratio;
use satuav::sensing::ClosedLoop;
use satuav::sim::{run_mission, PlannerSource};
use satuav_bench::{minibatch, small_scenario};

fn control(c: &mut Criterion) {
    let s = small_scenario(1, 1.05);
    c.bench_function("build_system_lambda_1.05", |b| {
        b.iter(|| build_system(black_box(&s.control)).unwrap())
    });
    let sm = build_system(&s.control).unwrap();
    c.bench_function("closed_loop_1000_slots_q4", |b| {
        b.iter_batched(
            || ClosedLoop::new(&sm, Vector6::new(1.0, -1.0, 100.0, 0.5, 0.0, 0.0), 0),
            |mut lp| {
                let target = Vector6::new(0.0, 0.0, 100.0, 0.0, 0.0, 0.0);
                for k in 0..1000u64 {
                    lp.step(k % 4 == 0, |_| target, &Vector6::zeros()).unwrap();
                }
                lp
            },
            BatchSize::SmallInput,
        )
    });
}

fn power(c: &mut Criterion) {
    c.bench_function("root_power_c_1", |b| {
        b.iter(|| solve_root_power_for_ratio(black_box(1.0)).unwrap())
    });
}

fn planner(c: &mut Criterion) {
    let s = small_scenario(1, 1.0);
    let mut g = c.benchmark_group("planner");
    g.sample_size(10);
    g.bench_function("value_iteration_100m", |b| {
        b.iter(|| {
            plan_oracle(&s.energy, s.control.slot_length, s.control.v_max, 100.0, OracleGrid::default())
                .unwrap()
        })
    });
    g.finish();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = QNetwork::new(s.dqn.hidden, s.dqn.d_max, s.control.v_max, &mut rng);
    let batch = minibatch(s.dqn.batch_size);
    let targets: Vec<f64> = batch.iter().map(|t| t.reward).collect();
    c.bench_function("qnet_loss_and_gradients_batch", |b| {
        b.iter(|| net.loss_and_gradients(black_box(&batch), black_box(&targets)))
    });
}

fn mission(c: &mut Criterion) {
    let s = small_scenario(3, 1.05);
    let planner = PlannerSource::Oracle(OracleGrid::default());
    let mut g = c.benchmark_group("mission");
    g.sample_size(10);
    g.bench_function("three_devices_oracle", |b| {
        b.iter(|| run_mission(&s, &planner, 7).unwrap())
    });
    g.finish();
}

criterion_group!(benches, control, power, planner, mission);
criterion_main!(benches);
