use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use pmlab_bench::{constants, geometry, q1_datum, q1_problem, NUMERICAL_T0};
use pmlab_core::assembly::{glue, run_suite, SuiteConfig};
use pmlab_core::nonlinearity::Nonlinearity;
use pmlab_core::solver::{solve, Grid};
use pmlab_core::verification::{catalog, check_candidate};

fn derived_constants(c: &mut Criterion) {
    c.bench_function("compute_constants", |b| b.iter(constants));
    let g = geometry(0.01);
    c.bench_function("lemma_checks_1000", |b| b.iter(|| g.lemma_checks(black_box(1000)).unwrap()));
}

fn comparison(c: &mut Criterion) {
    let k = constants();
    let g = geometry(k.t0_max);
    let cat = catalog(&g, &k, k.t0_max / 4.0, &q1_datum(&g)).unwrap();
    let mut group = c.benchmark_group("check_candidate_200x200");
    for name in ["q_v_eta", "q_w_sub", "t_w_left_super"] {
        let cand = cat.get(name).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(name), cand, |b, cand| {
            b.iter(|| check_candidate(cand, &cat, 200, 200).unwrap())
        });
    }
    group.finish();
}

fn regional_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_q1");
    group.sample_size(10);
    let spec = q1_problem(0.05);
    for n in [100, 200, 400] {
        let grid = Grid::for_t0(n, NUMERICAL_T0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &grid, |b, grid| {
            b.iter(|| solve(&spec, grid).unwrap())
        });
    }
    group.finish();
}

fn full_suite(c: &mut Criterion) {
    let mut group = c.benchmark_group("suite_and_glue");
    group.sample_size(10);
    let nl = Nonlinearity::log_model();
    let cfg = SuiteConfig::new(NUMERICAL_T0, 0.05, 200);
    group.bench_function("n200", |b| {
        b.iter(|| {
            let (g, f) = run_suite(&nl, &cfg).unwrap();
            glue(f, &g).unwrap().seams()
        })
    });
    group.finish();
}

criterion_group!(benches, derived_constants, comparison, regional_solve, full_suite);
criterion_main!(benches);
