use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hylevy::linear_sde::Transition;
use hylevy::process_sim::{sample_compound_poisson, uniform_grid, SeedSpec};
use hylevy::{certify, parametric_certificate, simulate_ti, verify_drift_inequality};
use hylevy_bench::{companion_family, noise, stable_matrix, system};
use nalgebra::{DMatrix, DVector};

fn transitions(c: &mut Criterion) {
    let mut g = c.benchmark_group("transition");
    for n in [1, 2, 4, 6] {
        let sys = system(n);
        g.bench_with_input(BenchmarkId::new("van_loan", n), &n, |b, _| {
            b.iter(|| Transition::new(black_box(&sys.a), Some(&sys.c), 0.1, None).unwrap())
        });
    }
    g.finish();
}

fn certificates(c: &mut Criterion) {
    let mut g = c.benchmark_group("certify");
    for n in [2, 4, 6] {
        let a = stable_matrix(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| certify(black_box(&a)).unwrap()));
    }
    g.finish();
    let fam = companion_family(101);
    c.bench_function("parametric_certificate/101x101", |b| b.iter(|| parametric_certificate(black_box(&fam), 1e-6).unwrap()));
}

fn paths(c: &mut Criterion) {
    let grid = uniform_grid(50.0, 50);
    let mut g = c.benchmark_group("simulate_ti");
    for n in [1, 2, 4] {
        let (sys, nz) = (system(n), noise(n, true));
        let x0 = DVector::from_element(n, 1.0);
        let mut path = 0u64;
        g.bench_with_input(BenchmarkId::new("t50", n), &n, |b, _| {
            b.iter(|| {
                path += 1;
                simulate_ti(&sys, &nz, &x0, &grid, &SeedSpec::new(1, path, "")).unwrap()
            })
        });
    }
    g.finish();

    let nz = noise(1, false);
    let mut path = 0u64;
    c.bench_function("sample_compound_poisson/rate1_t50", |b| {
        b.iter(|| {
            path += 1;
            sample_compound_poisson(&nz.jumps[0], 50.0, &SeedSpec::new(2, path, "jumps:0"))
        })
    });

    let sys = system(3);
    let traj = simulate_ti(&sys, &noise(3, false), &DVector::from_element(3, 1.0), &grid, &SeedSpec::new(3, 0, "")).unwrap();
    let cert = certify(&sys.a).unwrap();
    c.bench_function("verify_drift_inequality/n3_t50", |b| {
        b.iter(|| verify_drift_inequality(black_box(&traj), &sys.a, None::<&DMatrix<f64>>, &cert.p, cert.alpha, 2.0, 1e-8).unwrap())
    });
}

criterion_group!(benches, transitions, certificates, paths);
criterion_main!(benches);
