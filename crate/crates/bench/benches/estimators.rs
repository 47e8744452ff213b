use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use noisylp::aicm::compile;
use noisylp::estimators::{debiased_estimate, Penalty, Pick};
use noisylp::inference::{run_inference, InferenceConfig};
use noisylp::solve_lp;
use noisylp_bench::{cmiv_spec, dense_lp, example_b_estimator, example_one, moment_table};
use std::hint::black_box;

fn lp(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_lp");
    g.bench_function("example_one", |b| {
        let lp = example_one(0.0);
        b.iter(|| solve_lp(black_box(&lp), true).unwrap())
    });
    for (d, q) in [(4, 8), (8, 16), (16, 32)] {
        let lp = dense_lp(d, q);
        g.bench_with_input(BenchmarkId::new("dense", format!("{d}x{q}")), &lp, |b, lp| {
            b.iter(|| solve_lp(black_box(lp), true).unwrap())
        });
    }
    g.finish();
}

fn estimators(c: &mut Criterion) {
    let lp = example_one(-0.01);
    c.bench_function("debiased_estimate/example_one", |b| {
        b.iter(|| debiased_estimate(black_box(&lp), &Penalty::Scalar(5.0), Pick::Max).unwrap())
    });
    let est = example_b_estimator(5000);
    let cfg = InferenceConfig::default();
    c.bench_function("run_inference/example_b_5000", |b| b.iter(|| run_inference(black_box(&est), &cfg, 7).unwrap()));
}

fn aicm(c: &mut Criterion) {
    let mut g = c.benchmark_group("aicm_compile_solve");
    g.sample_size(10);
    let spec = cmiv_spec();
    for (nt, nz) in [(2, 3), (3, 3), (4, 4)] {
        let table = moment_table(nt, nz);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{nt}x{nz}")), &table, |b, t| {
            b.iter(|| compile(black_box(t), &spec).unwrap().solve().unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, lp, estimators, aicm);
criterion_main!(benches);
