use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use lpla::adversarial::{planted_instance, NoiseKind};
use lpla::css::{css_exact_with, CssOptions};
use lpla::regression::solve_matrix_in;
use lpla::verification::run_lambda_grid;
use lpla::{Exec, PNorm, RegressionConfig};

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn css(c: &mut Criterion) {
    let p = PNorm::Finite(1.5);
    let inst = planted_instance(8, 10, 2, p, NoiseKind::Gaussian, 0.1, 1).unwrap();
    let reg = RegressionConfig::new(p);
    let mut group = c.benchmark_group("css_exact");
    group
        .sample_size(10)
        .measurement_time(Duration::from_secs(5));
    for (name, exec) in MODES {
        let opts = CssOptions {
            exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::new(name, "8x10 k=2"), |b| {
            b.iter(|| css_exact_with(&inst.a, 2, &reg, opts).unwrap())
        });
    }
    group.finish();
}

fn regression(c: &mut Criterion) {
    let p = PNorm::ONE;
    let inst = planted_instance(40, 200, 3, p, NoiseKind::Laplace, 0.1, 2).unwrap();
    let u = inst.a.select_columns(&[0, 1, 2]);
    let reg = RegressionConfig::new(p);
    let mut group = c.benchmark_group("solve_matrix");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "40x200 onto 3 columns"), |b| {
            b.iter(|| solve_matrix_in(&u, &inst.a, &reg, exec).unwrap())
        });
    }
    group.finish();
}

fn lambda(c: &mut Criterion) {
    let ps = [PNorm::ONE, PNorm::TWO, PNorm::Infinity];
    let mut group = c.benchmark_group("lambda_grid");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "1000 trials"), |b| {
            b.iter(|| run_lambda_grid(&ps, &[1, 2, 3], 7, 1000, 0, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, css, regression, lambda);
criterion_main!(benches);
