use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use phnlab_bench::{models, spread};
use phnlab_core::em::{simulate_chain, Stepper};
use phnlab_core::queue::{simulate_queue, QueueConfig};
use phnlab_core::seed::{rng_for, SeedRole};
use phnlab_core::stats::w1_1d;
use phnlab_core::EmConfig;

fn em_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("em_step");
    for (name, model) in models() {
        let d = model.dim();
        let mut rng = rng_for(1, SeedRole::Chain, 0);
        let mut st = Stepper::new(&model, 0.01, &vec![0.0; d]);
        g.bench_function(name, |b| b.iter(|| black_box(st.step(&mut rng).unwrap()[0])));
    }
    g.finish();
}

fn chain(c: &mut Criterion) {
    let mut g = c.benchmark_group("chain_1e5_steps");
    g.throughput(Throughput::Elements(100_000));
    for (name, model) in models() {
        let cfg = EmConfig {
            eta: 0.01,
            n_steps: 100_000,
            burn_in: 0,
            thin: 100,
            x0: vec![0.0; model.dim()],
            seed: 3,
            n_chains: 1,
        };
        g.bench_function(name, |b| b.iter(|| simulate_chain(&model, &cfg).unwrap()));
    }
    g.finish();
}

fn w1(c: &mut Criterion) {
    let mut g = c.benchmark_group("w1_1d");
    for n in [10_000usize, 100_000] {
        let a = spread(n, 1);
        let b = spread(n, 2);
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bch, _| bch.iter(|| w1_1d(&a, &b).unwrap()));
    }
    g.finish();
}

fn queue(c: &mut Criterion) {
    let mut g = c.benchmark_group("queue_1000_time_units");
    g.sample_size(10);
    for (name, model) in models() {
        let cfg = QueueConfig::new(100, model.phase_type(), 1.0, 1.0, 1000.0, 4).unwrap();
        g.bench_function(name, |b| b.iter(|| simulate_queue(&cfg).unwrap().counters.events));
    }
    g.finish();
}

criterion_group!(benches, em_step, chain, w1, queue);
criterion_main!(benches);
