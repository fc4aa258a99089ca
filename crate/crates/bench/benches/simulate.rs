use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use rfnode_core::harvester::{builtin_model, dataset};
use rfnode_core::node_cycle::make_preset;
use rfnode_core::simulator::{run, run_sweep, LeafMotionModel};
use rfnode_core::{
    BufferSpec, CaseLabel, NodeConfig, PathLossModel, PowerDbm, Scenario, SchedulePolicy, Seconds, TransmitterConfig,
    Volt,
};

fn scenario(n_nodes: usize, eirp: f64, policy: SchedulePolicy, hours: f64) -> Scenario {
    let nodes = (0..n_nodes)
        .map(|i| NodeConfig {
            id: format!("n{i}"),
            buffer: BufferSpec::case_i(),
            harvester: builtin_model(dataset::Capacitor::Uf470),
            cycle: make_preset(CaseLabel::CaseI).unwrap(),
            distance: 1.0 + 0.1 * i as f64,
            path_loss: PathLossModel::default(),
            initial_voltage: Volt::new(0.0),
        })
        .collect();
    Scenario {
        nodes,
        transmitter: TransmitterConfig {
            eirp: PowerDbm::new(eirp),
            policy,
            ..TransmitterConfig::default()
        },
        duration: Seconds::new(hours * 3600.0),
        seed: 1,
        motion: LeafMotionModel::default(),
        p_rx: 0.9,
    }
}

fn simulate(c: &mut Criterion) {
    let golden = scenario(1, 30.0, SchedulePolicy::AlwaysOn, 1.0);
    c.bench_function("golden_1h", |b| b.iter(|| run(black_box(&golden))));

    let ids: Vec<String> = (0..8).map(|i| format!("n{i}")).collect();
    let tdm = scenario(8, 34.0, SchedulePolicy::Tdm { slot: Seconds::new(30.0), assignment: ids }, 24.0);
    let mut g = c.benchmark_group("network");
    g.sample_size(20);
    g.bench_function("tdm_8_nodes_24h", |b| b.iter(|| run(black_box(&tdm))));

    let sweep: Vec<Scenario> = (0..16)
        .map(|k| scenario(4, 26.0 + 0.5 * k as f64, SchedulePolicy::AlwaysOn, 6.0))
        .collect();
    g.bench_function("eirp_sweep_16x4_nodes_6h", |b| b.iter(|| run_sweep(black_box(&sweep))));
    g.finish();
}

criterion_group!(benches, simulate);
criterion_main!(benches);
