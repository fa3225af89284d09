use criterion::{criterion_group, criterion_main, Criterion};
use irsnoma::experiments::default_scenario;
use irsnoma::montecarlo::simulate_ber_on;
use irsnoma::noma::{union_bound_ber, FirstUserObjective};
use irsnoma::optimizer::ga_optimize;
use irsnoma::{ChannelState, GaConfig, McConfig, NomaDesign};
use std::hint::black_box;

fn kernels(c: &mut Criterion) {
    let scenario = default_scenario();
    let state = ChannelState::from_scenario(&scenario).unwrap();
    let design = NomaDesign::fpa(vec![1, 0, 2], 0.3, vec![0.5; scenario.num_elements()]).unwrap();

    c.bench_function("channel_state_n100", |b| {
        b.iter(|| ChannelState::from_scenario(black_box(&scenario)).unwrap())
    });

    let objective = FirstUserObjective::new(&scenario, &state).unwrap();
    c.bench_function("objective_k3_m4", |b| {
        b.iter(|| objective.evaluate(black_box(&design)))
    });
    c.bench_function("union_bound_report_k3_m4", |b| {
        b.iter(|| union_bound_ber(black_box(&design), &state, &scenario).unwrap())
    });

    let ga = GaConfig {
        generations: 1,
        restart_rounds: 1,
        ..GaConfig::default()
    };
    c.bench_function("ga_one_generation_s100", |b| {
        b.iter(|| ga_optimize(&scenario, &state, black_box(&ga)).unwrap())
    });

    let mc = McConfig {
        num_symbols: 10_000,
        ..McConfig::default()
    };
    c.bench_function("monte_carlo_10k_symbols", |b| {
        b.iter(|| simulate_ber_on(&scenario, &state, black_box(&design), &mc).unwrap())
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
