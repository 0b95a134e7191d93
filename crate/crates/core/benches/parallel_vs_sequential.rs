use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sgm_core::analysis::{cond_mutual_info, moments, QuadratureRule, Structural};
use sgm_core::estimators::{fit_sgm, preprocess, ModelKind};
use sgm_core::feasibility::{min_eig_grid, RegionSpec};
use sgm_core::par;
use sgm_core::sampling::{sample_benchmark5, sample_sgm};
use sgm_core::{FrequencySet, Sgm};

/// Thread counts compared: 1 is the sequential baseline, 0 the global pool.
const THREADS: [(usize, &str); 2] = [(1, "sequential"), (0, "parallel")];

fn quadrature(c: &mut Criterion) {
    let rule = QuadratureRule::gauss_legendre(48).unwrap();
    let f = FrequencySet::new(3, vec![vec![1, 0, 1], vec![0, 1, 1]]).unwrap();
    let cmi = Structural::new(ModelKind::Sgm, f, vec![0.1, 0.1]).unwrap();
    let e7 = Structural::new(
        ModelKind::Sgm,
        FrequencySet::new(3, vec![vec![1, 2, 0], vec![0, 1, 1], vec![1, 1, 1]]).unwrap(),
        vec![0.1, 0.3, 0.2],
    )
    .unwrap();
    let mut g = c.benchmark_group("quadrature");
    for (threads, label) in THREADS {
        g.bench_with_input(BenchmarkId::new("cond_mutual_info", label), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || cond_mutual_info(&cmi, &rule).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("moments_m3", label), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || moments(&e7, &rule).unwrap()))
        });
    }
    g.finish();
}

fn fitting(c: &mut Criterion) {
    let (_, unit) = preprocess(&sample_benchmark5(40, 1).unwrap()).unwrap();
    let f5 = FrequencySet::standard(5).unwrap();
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    for (threads, label) in THREADS {
        g.bench_with_input(BenchmarkId::new("sgm_lit_m5_n40", label), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || fit_sgm(&unit, &f5, RegionSpec::Lit { tau: 1.0 }).unwrap()))
        });
    }
    g.finish();
}

fn scans(c: &mut Criterion) {
    let f2 = FrequencySet::standard(2).unwrap();
    let theta = vec![0.05, -0.02, 0.1, 0.08, -0.03, 0.02, 0.01];
    let e7 = Sgm::from_pairs(3, &[(vec![1, 2, 0], 0.1), (vec![0, 1, 1], 0.3), (vec![1, 1, 1], 0.2)]).unwrap();
    let mut g = c.benchmark_group("scan");
    for (threads, label) in THREADS {
        g.bench_with_input(BenchmarkId::new("min_eig_grid_201", label), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || min_eig_grid(&f2, &theta, 201).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("sample_example7_1e4", label), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || sample_sgm(&e7, 10_000, 3).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, quadrature, fitting, scans);
criterion_main!(benches);
