use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use torhom::{egorov_residual, flow, time_one_map, PhasePoint};
use torhom_bench::{egorov_observable, hamiltonian, pendulum_potential};

fn dynamics(c: &mut Criterion) {
    let h = hamiltonian(&pendulum_potential());
    let z = PhasePoint::new(vec![0.3], vec![1.2]);
    c.bench_function("flow/pendulum/t=1,h=1e-3", |b| b.iter(|| flow(&h, black_box(&z), 1.0, 1e-3).unwrap()));
    let phi = time_one_map(&h, 1e-3).unwrap();
    c.bench_function("time_one_map/apply", |b| b.iter(|| phi.apply(black_box(&z)).unwrap()));
}

fn egorov(c: &mut Criterion) {
    let mut g = c.benchmark_group("egorov_residual");
    g.sample_size(10);
    let a = egorov_observable();
    let b = hamiltonian(&pendulum_potential());
    g.bench_function("pendulum/hbar=0.1/K=16", |bch| {
        bch.iter(|| egorov_residual(&a, &b, 1.0, black_box(0.1), 16, 1e-3).unwrap())
    });
    g.finish();
}

criterion_group!(benches, dynamics, egorov);
criterion_main!(benches);
