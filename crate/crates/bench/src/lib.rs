//! Fixtures shared by the benchmarks.

use noisylp::aicm::{synthetic_table, Assumption, AssumptionSpec, ConditionalMomentTable, Direction, Target};
use noisylp::inference::MeanThetaEstimator;
use noisylp::montecarlo::{draw_observations, example_b, Dgp, EstimatorKind, SimulationScenario};
use noisylp::rng::substream;
use noisylp::{BoxBounds, LpParams, Matrix};

/// `min x₁` s.t. `x₂ >= (1+b)x₁`, `x₂ <= x₁`, `x₁ ∈ [−1, 1]`.
pub fn example_one(b: f64) -> LpParams {
    let m = Matrix::from_rows(&[vec![-(1.0 + b), 1.0], vec![1.0, -1.0], vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
    LpParams::new(vec![1.0, 0.0], m, vec![0.0, 0.0, -1.0, -1.0], BoxBounds::uniform(2, -2.0, 2.0)).unwrap()
}

/// A dense LP with d variables and q rows through a common interior point.
pub fn dense_lp(d: usize, q: usize) -> LpParams {
    let cell = |i: usize| ((i * 7919 % 101) as f64 / 101.0 - 0.5) * 4.0;
    let m = Matrix::new(q, d, (0..q * d).map(cell).collect()).unwrap();
    let c = (0..q).map(|j| -0.5 - m.row(j).iter().map(|a| a.abs()).sum::<f64>() * 0.1).collect();
    let p = (0..d).map(|k| cell(k + 13)).collect();
    LpParams::new(p, m, c, BoxBounds::uniform(d, -2.0, 2.0)).unwrap()
}

/// θ̂ observations from the second simulation design at b = 0.
pub fn example_b_estimator(n: usize) -> MeanThetaEstimator {
    let scenario = SimulationScenario {
        dgp: Dgp::ExampleB,
        b: 0.0,
        sample_sizes: vec![n],
        replications: 1,
        estimators: vec![EstimatorKind::Debiased],
        penalty: Default::default(),
        kappa0: 0.1,
        inference: Default::default(),
        seed: 1,
    };
    let obs = draw_observations(&scenario, n, &mut substream(1, &[])).unwrap();
    MeanThetaEstimator::new(&example_b(0.0, 0.0, 0.0).unwrap(), obs).unwrap()
}

/// A moment table with `n_t` treatments and `n_z` instrument levels.
pub fn moment_table(n_t: usize, n_z: usize) -> ConditionalMomentTable {
    synthetic_table(&mut substream(2, &[]), n_t, n_z, -1.0, 1.0).unwrap()
}

pub fn cmiv_spec() -> AssumptionSpec {
    AssumptionSpec {
        assumptions: vec![Assumption::Bounds { k0: -1.0, k1: 1.0 }, Assumption::CmivP],
        target: Target::MeanPotential { t: "1".into() },
        direction: Direction::Lower,
    }
}
