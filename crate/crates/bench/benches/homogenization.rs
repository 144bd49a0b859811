use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use torhom::{cell_problem_solve, effective_grid, CellParams, EffectiveMethod, PGrid};
use torhom_bench::{hamiltonian, pendulum_potential, separable_potential};

fn cell_problem(c: &mut Criterion) {
    let mut g = c.benchmark_group("cell_problem");
    g.sample_size(10);
    let h1 = hamiltonian(&pendulum_potential());
    let params = CellParams::default();
    g.bench_function("1d/P=1.5", |b| b.iter(|| cell_problem_solve(&h1, black_box(&[1.5]), &params).unwrap()));
    let h2 = hamiltonian(&separable_potential());
    let coarse = CellParams { grid: 32, ..CellParams::default() };
    g.bench_function("2d/32x32/P=(1,0.5)", |b| {
        b.iter(|| cell_problem_solve(&h2, black_box(&[1.0, 0.5]), &coarse).unwrap())
    });
    g.finish();
}

fn tables(c: &mut Criterion) {
    let h = hamiltonian(&pendulum_potential());
    let grid = PGrid { pmax: 3.0, dp: 0.25 };
    c.bench_function("effective_grid/1d/closed_form", |b| {
        b.iter(|| effective_grid(black_box(&h), grid, EffectiveMethod::ClosedForm, &CellParams::default()).unwrap())
    });
}

criterion_group!(benches, cell_problem, tables);
criterion_main!(benches);
