use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use bumprl::dynamics::{advance, step_rk4};
use bumprl::terrain::{random_track, TrackSpec};
use bumprl::{AgentConfig, BumpEnv, DdpgAgent, EnvConfig, Environment, Observation, Transition, VehicleParams, VehicleState};

fn dynamics(c: &mut Criterion) {
    let p = VehicleParams::default();
    let terrain = random_track(1, &TrackSpec::default()).unwrap();
    let s = VehicleState { x: 3.0, x_dot: 1.0, z: 0.001, ..Default::default() };
    c.bench_function("rk4_step", |b| b.iter(|| step_rk4(black_box(&s), 1.0, &p, &terrain, 1.0 / 1200.0).unwrap()));
    c.bench_function("control_period_10_substeps", |b| {
        b.iter(|| advance(black_box(&s), 1.0, &p, &terrain, 1.0 / 120.0, 10).unwrap())
    });
}

fn environment(c: &mut Criterion) {
    let mut env = BumpEnv::new(EnvConfig::default()).unwrap();
    env.reset(0).unwrap();
    c.bench_function("env_step", |b| {
        b.iter(|| {
            if env.step(black_box(0.9)).unwrap().done {
                env.reset(0).unwrap();
            }
        })
    });
}

fn agent(c: &mut Criterion) {
    let mut agent = DdpgAgent::new(AgentConfig::default(), 2.0, 0).unwrap();
    for k in 0..2000 {
        let v = (k % 200) as f64 / 100.0;
        let obs = Observation { x_dot: v, z_ddot_meas: 9.8 + 0.01 * (k % 7) as f64, p: (k % 13) as f64 / 40.0 };
        agent.remember(Transition { obs, action: 1.0, reward: -(v - 1.0).powi(2), next_obs: obs, done: false });
    }
    let obs = Observation { x_dot: 0.9, z_ddot_meas: 9.9, p: 0.1 };
    c.bench_function("actor_forward", |b| b.iter(|| agent.act(black_box(&obs)).unwrap()));
    c.bench_function("ddpg_update_batch64", |b| {
        b.iter_batched_ref(
            || agent.clone(),
            |a| {
                a.update().unwrap();
                a.soft_update();
            },
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, dynamics, environment, agent);
criterion_main!(benches);
