use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use torhom::{spectrum, weyl_matrix, wigner_transform, PlaneWaveBasis};
use torhom::linalg::CVector;
use torhom_bench::{hamiltonian, pendulum_potential, separable_potential};

fn spectra(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectrum");
    let v1 = pendulum_potential();
    for k in [32usize, 64, 128] {
        g.bench_with_input(BenchmarkId::new("1d", k), &k, |b, &k| b.iter(|| spectrum(black_box(&v1), 0.1, k).unwrap()));
    }
    let v2 = separable_potential();
    g.sample_size(10);
    for k in [4usize, 8] {
        g.bench_with_input(BenchmarkId::new("2d", k), &k, |b, &k| b.iter(|| spectrum(black_box(&v2), 0.5, k).unwrap()));
    }
    g.finish();
}

fn quantization(c: &mut Criterion) {
    let h = hamiltonian(&pendulum_potential());
    c.bench_function("weyl_matrix/1d/K=32", |b| b.iter(|| weyl_matrix(black_box(&h), 0.1, 32).unwrap()));
    let basis = PlaneWaveBasis::new(1, 16);
    let mut psi = CVector::zeros(basis.len());
    psi[basis.index_of(&[1]).unwrap()] = 1.0.into();
    c.bench_function("wigner_transform/1d/K=16", |b| {
        b.iter(|| wigner_transform(&basis, black_box(&psi), 0.1, 66).unwrap())
    });
}

criterion_group!(benches, spectra, quantization);
criterion_main!(benches);
