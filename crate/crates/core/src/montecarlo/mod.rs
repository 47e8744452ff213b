//! Seeded, parallel simulation studies: estimator consistency across
//! sample sizes, coverage of the split-sample confidence bound, and the
//! uniform-rate study on a grid of measures near a flat face.
//!
//! Every replication draws from its own stream keyed by
//! `(seed, purpose, n, replication)` and results are reduced in
//! replication order, so reports are bit-identical across thread counts.

use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::estimators::{
    debiased_estimate, kappa_rule, penalty_value, plug_in_value, set_expansion_value, Penalty, PenaltyConfig, Pick,
};
use crate::geometry::delta_condition;
use crate::inference::{run_inference, InferenceConfig, MeanThetaEstimator};
use crate::linalg::Matrix;
use crate::lp::{solve_lp, BoxBounds, LpDocument, LpParams, Status};
use crate::rng::{purpose, substream, Rng};

/// Half-width of the box used by the built-in designs.
pub const DESIGN_BOX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Plugin,
    Penalty,
    Debiased,
    Setexp,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Plugin => "plugin",
            EstimatorKind::Penalty => "penalty",
            EstimatorKind::Debiased => "debiased",
            EstimatorKind::Setexp => "setexp",
        }
    }
}

/// Which measures enter the uniform-rate study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// `{−0.1, 0, 0.1}` plus three symmetric pairs drifting toward the flat face at 0.
    #[default]
    Full,
    /// `{0}` alone.
    Regular,
    /// `{−0.1, 0, 0.1}` plus pairs drifting toward ±0.05.
    Restricted,
}

/// Uniform noise half-widths for a custom design, per block of θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CustomNoise {
    pub p: f64,
    pub m: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Dgp {
    /// `min x₁` s.t. `x₂ >= (1+b)x₁`, `x₂ <= x₁`, `x₁ ∈ [−1, 1]`; only b is
    /// estimated, with U[−1, 1] noise.
    ExampleA,
    /// As `ExampleA` with `1 + ζ` in the second row and `c = (ν, ζ, −1−ν, −1)`;
    /// b, ζ, ν estimated with U[−0.5, 0.5] noise, true ζ = ν = 0.
    ExampleB,
    /// `min y − (1+a)x` s.t. `y <= (1+b)x + d`, `y >= (1+c)x`, `x ∈ [−1, 1]`
    /// over a grid of a; b, c, d estimated with U[−0.5, 0.5] noise around 0.
    UniformGrid {
        #[serde(default)]
        grid: GridKind,
        /// `debiased` (default) or `penalty`, the biased penalized value.
        #[serde(default = "default_grid_estimator")]
        estimator: EstimatorKind,
    },
    /// θ̂ = θ₀ + mean of i.i.d. uniform noise vectors.
    Custom {
        lp: LpDocument,
        #[serde(default)]
        noise: CustomNoise,
    },
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Plugin, EstimatorKind::Debiased, EstimatorKind::Setexp]
}

fn default_grid_estimator() -> EstimatorKind {
    EstimatorKind::Debiased
}

fn default_kappa0() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationScenario {
    pub dgp: Dgp,
    #[serde(default)]
    pub b: f64,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    /// Set-expansion constant in `√κ_n = κ₀ ln ln n`.
    #[serde(default = "default_kappa0")]
    pub kappa0: f64,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub seed: u64,
}

impl SimulationScenario {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return arg_err("replications must be at least 1");
        }
        if self.sample_sizes.is_empty() {
            return arg_err("sample_sizes is empty");
        }
        if self.sample_sizes[0] < 3 {
            return arg_err("sample sizes must be at least 3");
        }
        if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return arg_err("sample_sizes must be strictly increasing");
        }
        if !self.b.is_finite() || !(self.kappa0 >= 0.0) || !self.kappa0.is_finite() {
            return arg_err("b and kappa0 must be finite, kappa0 nonnegative");
        }
        if let Dgp::Custom { lp, noise } = &self.dgp {
            lp.to_params()?;
            if [noise.p, noise.m, noise.c].iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
                return arg_err("noise half-widths must be finite and nonnegative");
            }
        }
        Ok(())
    }

    /// Number of primitive noise terms per observation.
    fn primitive_dim(&self) -> usize {
        match &self.dgp {
            Dgp::ExampleA => 1,
            Dgp::ExampleB | Dgp::UniformGrid { .. } => 3,
            Dgp::Custom { lp, .. } => {
                let (q, d) = (lp.m.len(), lp.p.len());
                d + q * d + q
            }
        }
    }

    /// Half-width of each primitive's uniform distribution.
    fn primitive_scales(&self) -> Vec<f64> {
        match &self.dgp {
            Dgp::ExampleA => vec![1.0],
            Dgp::ExampleB | Dgp::UniformGrid { .. } => vec![0.5; 3],
            Dgp::Custom { lp, noise } => {
                let (q, d) = (lp.m.len(), lp.p.len());
                let mut s = vec![noise.p; d];
                s.extend(vec![noise.m; q * d]);
                s.extend(vec![noise.c; q]);
                s
            }
        }
    }

    /// θ at primitive values `z`, affine in `z`; `z = 0` gives θ₀.
    pub fn params_at(&self, z: &[f64]) -> Result<LpParams> {
        match &self.dgp {
            Dgp::ExampleA => example_a(self.b + z[0]),
            Dgp::ExampleB => example_b(self.b + z[0], z[1], z[2]),
            Dgp::UniformGrid { .. } => uniform_grid_lp(0.0, z[0], z[1], z[2]),
            Dgp::Custom { lp, .. } => {
                let base = lp.to_params()?;
                let theta: Vec<f64> = base.theta().iter().zip(z).map(|(t, u)| t + u).collect();
                LpParams::from_theta(&theta, base.q(), base.d(), base.bounds)
            }
        }
    }

    pub fn truth_params(&self) -> Result<LpParams> {
        self.params_at(&vec![0.0; self.primitive_dim()])
    }
}

fn box2() -> BoxBounds {
    BoxBounds::uniform(2, -DESIGN_BOX, DESIGN_BOX)
}

pub fn example_a(b: f64) -> Result<LpParams> {
    example_b(b, 0.0, 0.0)
}

pub fn example_b(b: f64, zeta: f64, nu: f64) -> Result<LpParams> {
    let m = Matrix::from_rows(&[vec![-(1.0 + b), 1.0], vec![1.0 + zeta, -1.0], vec![1.0, 0.0], vec![-1.0, 0.0]])?;
    LpParams::new(vec![1.0, 0.0], m, vec![nu, zeta, -1.0 - nu, -1.0], box2())
}

/// Variables `(x, y)`; `a` indexes the measure, `(b, c, d)` are estimated.
pub fn uniform_grid_lp(a: f64, b: f64, c: f64, d: f64) -> Result<LpParams> {
    let m = Matrix::from_rows(&[vec![1.0 + b, -1.0], vec![-(1.0 + c), 1.0], vec![1.0, 0.0], vec![-1.0, 0.0]])?;
    LpParams::new(vec![-(1.0 + a), 1.0], m, vec![-d, 0.0, -1.0, -1.0], box2())
}

fn uniform(rng: &mut Rng, half_width: f64) -> f64 {
    half_width * (2.0 * rng.random::<f64>() - 1.0)
}

fn primitive_means(scales: &[f64], n: usize, rng: &mut Rng) -> Vec<f64> {
    let mut sum = vec![0.0; scales.len()];
    for _ in 0..n {
        for (s, h) in sum.iter_mut().zip(scales) {
            *s += uniform(rng, *h);
        }
    }
    sum.iter().map(|s| s / n as f64).collect()
}

/// θ̂ from a sample of size n: θ evaluated at the mean primitive noise.
pub fn draw_theta(scenario: &SimulationScenario, n: usize, rng: &mut Rng) -> Result<LpParams> {
    if n == 0 {
        return arg_err("n must be positive");
    }
    scenario.params_at(&primitive_means(&scenario.primitive_scales(), n, rng))
}

/// Per-observation θ_i as rows of an n×S matrix; their mean is the θ̂ of
/// [`draw_theta`] on the same stream.
pub fn draw_observations(scenario: &SimulationScenario, n: usize, rng: &mut Rng) -> Result<Matrix> {
    let scales = scenario.primitive_scales();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = scales.iter().map(|h| uniform(rng, *h)).collect();
        rows.push(scenario.params_at(&z)?.theta());
    }
    Matrix::from_rows(&rows)
}

/// Summary for one (estimator, n) cell. Averages use successful draws only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub estimator: String,
    pub n: usize,
    pub replications: usize,
    /// Draws where the estimator was infeasible, unbounded or faulted.
    pub failures: usize,
    pub mean: Option<f64>,
    pub bias: Option<f64>,
    pub std: Option<f64>,
    pub rmse: Option<f64>,
    pub coverage: Option<f64>,
    pub mean_lcb: Option<f64>,
    /// Inference draws whose σ̂ collapsed to zero.
    pub degenerate: usize,
}

impl ReportRow {
    fn from_values(estimator: &str, n: usize, replications: usize, values: &[f64], truth: f64) -> Self {
        let k = values.len();
        let (mean, bias, std, rmse) = if k == 0 {
            (None, None, None, None)
        } else {
            let mean = values.iter().sum::<f64>() / k as f64;
            let std = (k > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt());
            let rmse = (values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / k as f64).sqrt();
            (Some(mean), Some(mean - truth), std, Some(rmse))
        };
        Self {
            estimator: estimator.to_string(),
            n,
            replications,
            failures: replications - k,
            mean,
            bias,
            std,
            rmse,
            coverage: None,
            mean_lcb: None,
            degenerate: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    /// B(θ₀), solved from the true parameters.
    pub truth: f64,
    pub rows: Vec<ReportRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SimulationReport {
    pub fn row(&self, estimator: &str, n: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.estimator == estimator && r.n == n)
    }

    /// Columns `estimator,n,mean,bias,std,rmse,failures,coverage,mean_lcb`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["estimator", "n", "mean", "bias", "std", "rmse", "failures", "coverage", "mean_lcb"])
            .map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.estimator.clone(),
                r.n.to_string(),
                opt(r.mean),
                opt(r.bias),
                opt(r.std),
                opt(r.rmse),
                r.failures.to_string(),
                opt(r.coverage),
                opt(r.mean_lcb),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

fn truth_value(scenario: &SimulationScenario) -> Result<f64> {
    let sol = solve_lp(&scenario.truth_params()?, true)?;
    match sol.status {
        Status::Optimal => Ok(sol.value.expect("optimal")),
        s => Err(Error::LpStatus(format!("true LP is {s}"))),
    }
}

/// One estimator on one θ̂; `None` marks a failed draw.
pub fn estimate_once(
    kind: EstimatorKind,
    theta: &LpParams,
    n: usize,
    penalty: &PenaltyConfig,
    kappa0: f64,
) -> Result<Option<f64>> {
    let lp_value = |s: crate::lp::LpSolution| (s.status == Status::Optimal).then(|| s.value.expect("optimal"));
    Ok(match kind {
        EstimatorKind::Plugin => lp_value(plug_in_value(theta)?),
        EstimatorKind::Penalty => Some(penalty_value(theta, &Penalty::Vector(penalty.weights(theta, n)?))?),
        EstimatorKind::Debiased => {
            Some(debiased_estimate(theta, &Penalty::Vector(penalty.weights(theta, n)?), Pick::Max)?.value)
        }
        EstimatorKind::Setexp => lp_value(set_expansion_value(theta, kappa_rule(n, kappa0)?, n)?),
    })
}

/// Replicated estimation at every sample size. Configuration faults are
/// returned; infeasible or unbounded draws are tabulated as failures.
pub fn run_consistency(scenario: &SimulationScenario) -> Result<SimulationReport> {
    scenario.validate()?;
    if matches!(scenario.dgp, Dgp::UniformGrid { .. }) {
        return Err(Error::Unsupported("use the uniform-grid study for this design".into()));
    }
    if scenario.estimators.is_empty() {
        return arg_err("no estimators selected");
    }
    let truth = truth_value(scenario)?;
    let mut rows = Vec::new();
    for &n in &scenario.sample_sizes {
        // The first draw surfaces configuration faults (bad penalty, ...) before the parallel loop.
        let per_rep: Vec<Vec<Option<f64>>> = (0..scenario.replications)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(scenario.seed, &[purpose::DATA, n as u64, r as u64]);
                let theta = draw_theta(scenario, n, &mut rng)?;
                scenario
                    .estimators
                    .iter()
                    .map(|&k| match estimate_once(k, &theta, n, &scenario.penalty, scenario.kappa0) {
                        Ok(v) => Ok(v),
                        Err(e) if e.is_validation() => Err(e),
                        Err(_) => Ok(None),
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        for (i, k) in scenario.estimators.iter().enumerate() {
            let values: Vec<f64> = per_rep.iter().filter_map(|v| v[i]).collect();
            rows.push(ReportRow::from_values(k.name(), n, scenario.replications, &values, truth));
        }
    }
    Ok(SimulationReport { truth, rows })
}

/// Coverage of the one-sided lower confidence bound for B(θ₀) and its mean.
pub fn run_inference_study(scenario: &SimulationScenario) -> Result<SimulationReport> {
    scenario.validate()?;
    if matches!(scenario.dgp, Dgp::UniformGrid { .. }) {
        return Err(Error::Unsupported("inference study needs ExampleA, ExampleB or Custom".into()));
    }
    let truth = truth_value(scenario)?;
    let template = scenario.truth_params()?;
    let mut rows = Vec::new();
    for &n in &scenario.sample_sizes {
        let per_rep: Vec<Option<(f64, f64, bool)>> = (0..scenario.replications)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(scenario.seed, &[purpose::DATA, n as u64, r as u64]);
                let obs = draw_observations(scenario, n, &mut rng)?;
                let est = MeanThetaEstimator::new(&template, obs)?;
                let seed = rng.random::<u64>();
                match run_inference(&est, &scenario.inference, seed) {
                    Ok(res) => Ok(Some((res.estimate, res.ci_lower_onesided, res.degenerate_variance))),
                    Err(e) if e.is_validation() => Err(e),
                    Err(_) => Ok(None),
                }
            })
            .collect::<Result<_>>()?;
        let ok: Vec<(f64, f64, bool)> = per_rep.into_iter().flatten().collect();
        let values: Vec<f64> = ok.iter().map(|o| o.0).collect();
        let mut row = ReportRow::from_values("debiased_split", n, scenario.replications, &values, truth);
        if !ok.is_empty() {
            // A zero-width interval at the truth covers; allow for rounding in p'x̂.
            let tol = 1e-9 * (1.0 + truth.abs());
            let covered = ok.iter().filter(|o| o.1 <= truth + tol).count();
            row.coverage = Some(covered as f64 / ok.len() as f64);
            row.mean_lcb = Some(ok.iter().map(|o| o.1).sum::<f64>() / ok.len() as f64);
        }
        row.degenerate = ok.iter().filter(|o| o.2).count();
        rows.push(row);
    }
    Ok(SimulationReport { truth, rows })
}

/// Per-n output of the uniform-rate study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub n: usize,
    pub w_n: f64,
    pub grid: Vec<f64>,
    pub mean_sup_dev: f64,
    pub std_sup_dev: f64,
    /// `std · √n`.
    pub scaled_sqrt_n: f64,
    /// `std · √n / w_n`, rescaled to equal `scaled_sqrt_n` at the smallest n.
    pub scaled_sqrt_n_over_wn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    /// Smallest δ-condition value over `a ∈ [−0.1, 0.1]`.
    pub delta: f64,
    pub rows: Vec<GridRow>,
    /// Least-squares slopes of the log series on log n; absent when a series has a zero.
    pub slope_sqrt_n: Option<f64>,
    pub slope_sqrt_n_over_wn: Option<f64>,
}

impl GridReport {
    /// Columns `n,w_n,mean_sup_dev,std_sup_dev,scaled_sqrt_n,scaled_sqrt_n_over_wn`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["n", "w_n", "mean_sup_dev", "std_sup_dev", "scaled_sqrt_n", "scaled_sqrt_n_over_wn"])
            .map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.w_n.to_string(),
                r.mean_sup_dev.to_string(),
                r.std_sup_dev.to_string(),
                r.scaled_sqrt_n.to_string(),
                r.scaled_sqrt_n_over_wn.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Smallest δ-condition value of the grid design over 21 points of `a ∈ [−0.1, 0.1]`.
pub fn grid_delta() -> Result<f64> {
    let mut delta = f64::INFINITY;
    for i in 0..=20 {
        let a = -0.1 + 0.01 * i as f64;
        delta = delta.min(delta_condition(&uniform_grid_lp(a, 0.0, 0.0, 0.0)?)?.delta);
    }
    Ok(delta)
}

/// `w_n = (ln n / ln 100) · 1.5 / δ`.
pub fn grid_wn(n: usize, delta: f64) -> f64 {
    (n as f64).ln() / 100f64.ln() * 1.5 / delta
}

/// Grid of measures at sample size n. Moving points are scaled so that each
/// equals ∓0.1 at n = 100.
pub fn grid_points(kind: GridKind, n: usize, delta: f64) -> Vec<f64> {
    let (wn, w100) = (grid_wn(n, delta), grid_wn(100, delta));
    let rn = 10.0 / (n as f64).sqrt();
    let shrink = [rn, wn / w100 * rn, w100 / wn];
    let mut g = match kind {
        GridKind::Regular => return vec![0.0],
        GridKind::Full => shrink.iter().flat_map(|s| [-0.1 * s, 0.1 * s]).collect::<Vec<_>>(),
        GridKind::Restricted => shrink.iter().flat_map(|s| [-0.05 * (1.0 + s), 0.05 * (1.0 + s)]).collect(),
    };
    g.extend([-0.1, 0.0, 0.1]);
    g
}

fn log_slope(n: &[usize], y: &[f64]) -> Option<f64> {
    if y.len() < 2 || y.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = n.iter().map(|v| (*v as f64).ln()).collect();
    let ys: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Standard deviation across replications of `sup_a |B̂(a, θ̂; w_n) − B(a)|`
/// for the debiased (or biased) penalty estimator with scalar penalty `w_n`.
pub fn run_uniform_grid(scenario: &SimulationScenario) -> Result<GridReport> {
    scenario.validate()?;
    let Dgp::UniformGrid { grid, estimator } = scenario.dgp else {
        return Err(Error::Unsupported("uniform-grid study needs the UniformGrid design".into()));
    };
    if !matches!(estimator, EstimatorKind::Debiased | EstimatorKind::Penalty) {
        return arg_err("uniform-grid study supports the debiased and penalty estimators");
    }
    if scenario.replications < 2 {
        return arg_err("uniform-grid study needs at least two replications");
    }
    let delta = grid_delta()?;
    let scales = scenario.primitive_scales();
    let mut rows = Vec::new();
    for &n in &scenario.sample_sizes {
        let w_n = grid_wn(n, delta);
        let points = grid_points(grid, n, delta);
        let truth: Vec<f64> = points
            .iter()
            .map(|&a| {
                let s = solve_lp(&uniform_grid_lp(a, 0.0, 0.0, 0.0)?, true)?;
                s.value.ok_or_else(|| Error::LpStatus(format!("grid LP at a = {a} is {}", s.status)))
            })
            .collect::<Result<_>>()?;
        let sup: Vec<f64> = (0..scenario.replications)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(scenario.seed, &[purpose::DATA, n as u64, r as u64]);
                let z = primitive_means(&scales, n, &mut rng);
                let mut worst: f64 = 0.0;
                for (a, t) in points.iter().zip(&truth) {
                    let th = uniform_grid_lp(*a, z[0], z[1], z[2])?;
                    let v = match estimator {
                        EstimatorKind::Penalty => penalty_value(&th, &Penalty::Scalar(w_n))?,
                        _ => debiased_estimate(&th, &Penalty::Scalar(w_n), Pick::Max)?.value,
                    };
                    worst = worst.max((v - t).abs());
                }
                Ok(worst)
            })
            .collect::<Result<_>>()?;
        let k = sup.len() as f64;
        let mean = sup.iter().sum::<f64>() / k;
        let std = (sup.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        let root = (n as f64).sqrt();
        rows.push(GridRow {
            n,
            w_n,
            grid: points,
            mean_sup_dev: mean,
            std_sup_dev: std,
            scaled_sqrt_n: std * root,
            scaled_sqrt_n_over_wn: std * root / w_n,
        });
    }
    // Equate the two series at the smallest n.
    let (a0, b0) = (rows[0].scaled_sqrt_n, rows[0].scaled_sqrt_n_over_wn);
    if b0 > 0.0 {
        rows.iter_mut().for_each(|r| r.scaled_sqrt_n_over_wn *= a0 / b0);
    }
    let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let s1: Vec<f64> = rows.iter().map(|r| r.scaled_sqrt_n).collect();
    let s2: Vec<f64> = rows.iter().map(|r| r.scaled_sqrt_n_over_wn).collect();
    Ok(GridReport { delta, slope_sqrt_n: log_slope(&ns, &s1), slope_sqrt_n_over_wn: log_slope(&ns, &s2), rows })
}
