//! Simulation designs: noise calibration, failure accounting and
//! reproducibility under different thread pools.

use noisylp::estimators::plug_in_value;
use noisylp::montecarlo::{
    draw_theta, example_b, run_consistency, run_inference_study, run_uniform_grid, Dgp, EstimatorKind, GridKind,
    SimulationScenario,
};
use noisylp::rng::substream;
use noisylp::Status;

fn scenario(dgp: Dgp, b: f64, sample_sizes: Vec<usize>, replications: usize) -> SimulationScenario {
    SimulationScenario {
        dgp,
        b,
        sample_sizes,
        replications,
        estimators: vec![EstimatorKind::Plugin, EstimatorKind::Debiased, EstimatorKind::Setexp],
        penalty: Default::default(),
        kappa0: 0.1,
        inference: Default::default(),
        seed: 99,
    }
}

#[test]
fn estimated_b_is_centred() {
    let b = 0.3;
    let s = scenario(Dgp::ExampleA, b, vec![100], 1);
    let draws = 100_000;
    let mut rng = substream(5, &[]);
    let mean = (0..draws).map(|_| -draw_theta(&s, 1, &mut rng).unwrap().m.get(0, 0) - 1.0).sum::<f64>() / draws as f64;
    // U[−1, 1] has variance 1/3.
    let se = (1.0 / 3.0 / draws as f64).sqrt();
    assert!((mean - b).abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn example_b_empty_when_nu_positive() {
    let sol = plug_in_value(&example_b(0.0, 0.0, 0.01).unwrap()).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
    assert_eq!(plug_in_value(&example_b(0.0, 0.0, -0.01).unwrap()).unwrap().status, Status::Optimal);
}

#[test]
fn example_b_plug_in_fails_often_at_b0() {
    let mut s = scenario(Dgp::ExampleB, 0.0, vec![5000], 1000);
    s.estimators = vec![EstimatorKind::Plugin];
    let report = run_consistency(&s).unwrap();
    let row = report.row("plugin", 5000).unwrap();
    assert!(row.failures as f64 / 1000.0 > 0.2, "{} failures", row.failures);
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn reports_independent_of_thread_count() {
    let s = scenario(Dgp::ExampleB, -0.05, vec![100, 400], 64);
    let a = in_pool(1, || run_consistency(&s).unwrap());
    let b = in_pool(4, || run_consistency(&s).unwrap());
    assert_eq!(a, b);
    let a = in_pool(1, || run_inference_study(&s).unwrap());
    let b = in_pool(3, || run_inference_study(&s).unwrap());
    assert_eq!(a, b);
    let g = scenario(
        Dgp::UniformGrid { grid: GridKind::Full, estimator: EstimatorKind::Debiased },
        0.0,
        vec![100, 400],
        16,
    );
    let a = in_pool(1, || run_uniform_grid(&g).unwrap());
    let b = in_pool(4, || run_uniform_grid(&g).unwrap());
    assert_eq!(a, b);
}

#[test]
fn failures_plus_successes_equal_replications() {
    let mut s = scenario(Dgp::ExampleB, 0.0, vec![50, 500], 200);
    s.estimators = vec![EstimatorKind::Plugin, EstimatorKind::Penalty, EstimatorKind::Debiased, EstimatorKind::Setexp];
    for row in run_consistency(&s).unwrap().rows {
        assert_eq!(row.replications, 200);
        assert!(row.failures <= row.replications);
        assert_eq!(row.mean.is_some(), row.failures < row.replications, "{row:?}");
    }
}
