//! Sample-splitting inference on the LP value.
//!
//! Fold 1 picks an optimal vertex x̂, its binding set Â and dual weights v̌;
//! fold 2 evaluates the linear statistic
//!
//! ```text
//! B̆ = v̌'(ĉ⁽²⁾_Â − M̂⁽²⁾_Â x̂) + p'x̂
//! ```
//!
//! which is asymptotically normal with the variance of [`asymptotic_variance`].
//! Intervals are `B̆ ∓ z σ̂/√n₂`.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::estimators::{debiased_estimate, select_v_bar, Penalty, PenaltyConfig, Pick};
use crate::linalg::{dot, kron_vec, norm, rank, sym_eigen, Matrix};
use crate::lp::{LpParams, TAU_RANK};
use crate::rng::{purpose, substream, Rng};

/// Maps a subset of observation indices to θ̂, and optionally to the
/// covariance Σ̂ of √n(θ̂ − θ) in the order (p, vec M, c).
///
/// Index slices may contain repeats (bootstrap resamples).
pub trait ThetaEstimator: Sync {
    fn n_obs(&self) -> usize;
    fn estimate(&self, idx: &[usize]) -> Result<LpParams>;
    fn covariance(&self, idx: &[usize]) -> Result<Option<Matrix>>;
}

/// θ̂ as the sample mean of per-observation θ vectors; Σ̂ is their sample
/// covariance. Covers any parameter that is an average of i.i.d. terms.
#[derive(Debug, Clone)]
pub struct MeanThetaEstimator {
    q: usize,
    d: usize,
    bounds: crate::lp::BoxBounds,
    obs: Matrix,
}

impl MeanThetaEstimator {
    /// `obs` is n×S with rows θ_i in the order (p, vec M, c).
    pub fn new(template: &LpParams, obs: Matrix) -> Result<Self> {
        let (q, d) = (template.q(), template.d());
        if obs.cols() != d + q * d + q {
            return dim_err(format!("observations have {} columns, expected {}", obs.cols(), d + q * d + q));
        }
        if obs.rows() < 2 {
            return arg_err("need at least two observations");
        }
        Ok(Self { q, d, bounds: template.bounds.clone(), obs })
    }

    pub fn observations(&self) -> &Matrix {
        &self.obs
    }
}

impl ThetaEstimator for MeanThetaEstimator {
    fn n_obs(&self) -> usize {
        self.obs.rows()
    }

    fn estimate(&self, idx: &[usize]) -> Result<LpParams> {
        if idx.is_empty() {
            return arg_err("empty index set");
        }
        let s = self.obs.cols();
        let mut mean = vec![0.0; s];
        for &i in idx {
            for (m, v) in mean.iter_mut().zip(self.obs.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= idx.len() as f64);
        LpParams::from_theta(&mean, self.q, self.d, self.bounds.clone())
    }

    fn covariance(&self, idx: &[usize]) -> Result<Option<Matrix>> {
        Ok(Some(sample_covariance(&self.obs, idx)?))
    }
}

/// Sample covariance (divisor n−1) of the selected rows.
pub fn sample_covariance(obs: &Matrix, idx: &[usize]) -> Result<Matrix> {
    if idx.len() < 2 {
        return arg_err("covariance needs at least two rows");
    }
    let s = obs.cols();
    let n = idx.len() as f64;
    let mut mean = vec![0.0; s];
    for &i in idx {
        for (m, v) in mean.iter_mut().zip(obs.row(i)) {
            *m += v / n;
        }
    }
    let mut cov = Matrix::zeros(s, s);
    let mut dev = vec![0.0; s];
    for &i in idx {
        for (k, v) in obs.row(i).iter().enumerate() {
            dev[k] = v - mean[k];
        }
        for a in 0..s {
            if dev[a] == 0.0 {
                continue;
            }
            for b in a..s {
                cov.set(a, b, cov.get(a, b) + dev[a] * dev[b]);
            }
        }
    }
    for a in 0..s {
        for b in a..s {
            let v = cov.get(a, b) / (n - 1.0);
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
    }
    Ok(cov)
}

/// Random split into folds of sizes ⌊γn⌋ and n − ⌊γn⌋, each sorted.
pub fn split_sample(n: usize, gamma: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return arg_err(format!("gamma = {gamma} outside (0,1)"));
    }
    let n1 = (gamma * n as f64).floor() as usize;
    if n1 == 0 || n1 == n {
        return arg_err(format!("split of n = {n} with gamma = {gamma} leaves an empty fold"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut substream(seed, &[purpose::SPLIT, n as u64]));
    let mut f1 = perm[..n1].to_vec();
    let mut f2 = perm[n1..].to_vec();
    f1.sort_unstable();
    f2.sort_unstable();
    Ok((f1, f2))
}

/// Binding set, optimizer and dual weights estimated on fold 1.
///
/// Indices in `a` and positions in `v` refer to the constraint rows followed
/// by the box rows (`x_i >= l_i`, then `-x_i >= -u_i`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalTriplet {
    pub a: Vec<usize>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub v_bar: f64,
}

/// `argmin ‖p − K'v‖²` subject to `‖v‖ <= v̄`.
///
/// Minimum-norm solution if it fits in the ball, otherwise the boundary
/// solution `(KK' + μI)v = Kp` with μ found by bisection.
pub fn ball_constrained_ls(k: &Matrix, p: &[f64], v_bar: f64) -> Result<Vec<f64>> {
    if !(v_bar > 0.0) {
        return arg_err("v_bar must be positive");
    }
    if p.len() != k.cols() {
        return dim_err("ball_constrained_ls: p length");
    }
    let g = k.matmul(&k.transpose())?;
    let r = k.matvec(p)?;
    let (vals, vecs) = sym_eigen(&g)?;
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let coefs: Vec<f64> = (0..vals.len()).map(|i| dot(&vecs.col(i), &r)).collect();
    let solve = |mu: f64| -> Vec<f64> {
        let mut v = vec![0.0; k.rows()];
        for (i, lam) in vals.iter().enumerate() {
            let denom = lam.max(0.0) + mu;
            if mu == 0.0 && *lam <= 1e-12 * top {
                continue;
            }
            let f = coefs[i] / denom;
            for (vj, qj) in v.iter_mut().zip(vecs.col(i)) {
                *vj += f * qj;
            }
        }
        v
    };
    let v0 = solve(0.0);
    if norm(&v0) <= v_bar {
        return Ok(v0);
    }
    let (mut lo, mut hi) = (0.0, norm(&r) / v_bar);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm(&solve(mid)) > v_bar {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1e-300) {
            break;
        }
    }
    Ok(solve(hi))
}

/// Algorithm step on fold 1: debiased vertex (largest p'x among optimal
/// vertices of the penalized problem), binding set, and dual weights.
pub fn find_triplet(theta1: &LpParams, w: &[f64], v_bar: f64) -> Result<OptimalTriplet> {
    let r = debiased_estimate(theta1, &Penalty::Vector(w.to_vec()), Pick::Max)?;
    let (em, _) = theta1.extended();
    let ma = em.select_rows(&r.binding);
    if r.binding.len() < theta1.d() || rank(&ma, TAU_RANK) < theta1.d() {
        return Err(Error::NoVertexSolution(format!("binding set {:?} has rank below d = {}", r.binding, theta1.d())));
    }
    let va = ball_constrained_ls(&ma, &theta1.p, v_bar)?;
    let mut v = vec![0.0; em.rows()];
    for (pos, &j) in r.binding.iter().enumerate() {
        v[j] = va[pos];
    }
    Ok(OptimalTriplet { a: r.binding, x: r.vertex, v, v_bar })
}

/// A 0/1 selector with exactly one unit entry per row, kept sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct Selector {
    cols: usize,
    picks: Vec<usize>,
}

impl Selector {
    pub fn new(picks: Vec<usize>, cols: usize) -> Self {
        Self { cols, picks }
    }

    /// `C x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.picks.iter().map(|&j| x[j]).collect()
    }

    /// `C' y`
    pub fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &j) in self.picks.iter().enumerate() {
            out[j] += y[r];
        }
        out
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.picks.len(), self.cols);
        for (r, &j) in self.picks.iter().enumerate() {
            m.set(r, j, 1.0);
        }
        m
    }
}

/// `C_c`: selects c out of θ = (p, vec M, c).
pub fn selector_c(q: usize, d: usize) -> Selector {
    Selector::new((0..q).map(|i| d + q * d + i).collect(), d + q * d + q)
}

/// `C_M`: selects vec M out of θ.
pub fn selector_m(q: usize, d: usize) -> Selector {
    Selector::new((0..q * d).map(|k| d + k).collect(), d + q * d + q)
}

/// `C(A)`: selects rows A out of a q-vector.
pub fn selector_rows(a: &[usize], q: usize) -> Selector {
    Selector::new(a.to_vec(), q)
}

/// σ²(A, x, v, Σ) of the fold-2 statistic `v_A'(ĉ_A − M̂_A x)`:
///
/// ```text
/// J₁ΣJ₁' − 2 J₂(I_d ⊗ C_M Σ J₁')x + J₂(xx' ⊗ C_M Σ C_M')J₂'
/// J₁ = v_A'C(A)C_c,   J₂ = v_A'C(A)(vec(I_d)' ⊗ I_q)
/// ```
///
/// `v` has length q and is read on A only. The Kronecker products are applied
/// blockwise rather than materialized.
pub fn asymptotic_variance(a: &[usize], x: &[f64], v: &[f64], sigma: &Matrix, q: usize, d: usize) -> Result<f64> {
    let s = d + q * d + q;
    if sigma.rows() != s || sigma.cols() != s {
        return dim_err(format!("Sigma must be {s}x{s}"));
    }
    if x.len() != d || v.len() != q {
        return dim_err("asymptotic_variance: x or v length");
    }
    if let Some(j) = a.iter().find(|&&j| j >= q) {
        return dim_err(format!("row {j} outside 0..{q}"));
    }
    let scale = sigma.max_abs();
    for i in 0..s {
        for j in i + 1..s {
            if (sigma.get(i, j) - sigma.get(j, i)).abs() > 1e-10 * scale.max(1.0) {
                return Err(Error::NotPsd(format!("Sigma not symmetric at ({i}, {j})")));
            }
        }
    }
    let ca = selector_rows(a, q);
    let (cc, cm) = (selector_c(q, d), selector_m(q, d));
    let va = ca.apply(v);
    let u = ca.apply_t(&va);
    let j1 = cc.apply_t(&u);
    let sj1 = sigma.matvec(&j1)?;
    let term1 = dot(&j1, &sj1);
    // J₂ = vec(I_d)' ⊗ u'; block i (length qd) is nonzero only on column i.
    let vec_id = Matrix::identity(d).vectorize();
    let j2 = kron_vec(&vec_id, &u);
    let mut wv = vec![0.0; q * d];
    for (i, xi) in x.iter().enumerate() {
        for (k, wk) in wv.iter_mut().enumerate() {
            *wk += xi * j2[i * q * d + k];
        }
    }
    // J₂(I_d ⊗ y)x = J₂(x ⊗ y) = w'y with y = C_M Σ J₁'.
    let y = cm.apply(&sj1);
    let term2 = dot(&wv, &y);
    // J₂(xx' ⊗ K)J₂' = w'Kw with K = C_M Σ C_M'.
    let cmw = cm.apply_t(&wv);
    let term3 = dot(&cmw, &sigma.matvec(&cmw)?);
    let var = term1 - 2.0 * term2 + term3;
    let tol = 1e-10 * (1.0 + term1.abs() + term3.abs());
    if var < -tol {
        return Err(Error::NotPsd(format!("quadratic form is {var:e}")));
    }
    Ok(var.max(0.0))
}

/// Draws θ̂* for the bootstrap.
pub trait Resampler: Sync {
    /// Sample size behind each draw (n₂).
    fn n(&self) -> usize;
    /// The point estimate the draws are centred at.
    fn center(&self) -> Result<LpParams>;
    fn draw(&self, rng: &mut Rng) -> Result<LpParams>;
}

/// Nonparametric resampling of a fixed index set.
pub struct IndexResampler<'a> {
    pub estimator: &'a dyn ThetaEstimator,
    pub idx: &'a [usize],
}

impl Resampler for IndexResampler<'_> {
    fn n(&self) -> usize {
        self.idx.len()
    }

    fn center(&self) -> Result<LpParams> {
        self.estimator.estimate(self.idx)
    }

    fn draw(&self, rng: &mut Rng) -> Result<LpParams> {
        let k = self.idx.len();
        let pick: Vec<usize> = (0..k).map(|_| self.idx[rng.random_range(0..k)]).collect();
        self.estimator.estimate(&pick)
    }
}

fn linear_stat(theta: &LpParams, a: &[usize], x: &[f64], v: &[f64]) -> f64 {
    let (em, ec) = theta.extended();
    a.iter().map(|&j| v[j] * (ec[j] - dot(em.row(j), x))).sum()
}

/// Bootstrap standard deviation of `√n₂ v̂'(ĉ* − M̂*x̂)` around the fold-2
/// estimate, holding (Â, x̂, v̂) fixed. Same scale as √σ².
pub fn bootstrap_se(
    resampler: &dyn Resampler,
    a: &[usize],
    x: &[f64],
    v: &[f64],
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if reps < 100 {
        return arg_err(format!("bootstrap needs at least 100 replications, got {reps}"));
    }
    let center = linear_stat(&resampler.center()?, a, x, v);
    let root_n = (resampler.n() as f64).sqrt();
    let draws: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, &[purpose::BOOTSTRAP, r as u64]);
            let th = resampler.draw(&mut rng)?;
            Ok(root_n * (linear_stat(&th, a, x, v) - center))
        })
        .collect::<Result<_>>()?;
    let mean = draws.iter().sum::<f64>() / reps as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    Ok(var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SigmaSource {
    Analytic,
    Bootstrap { reps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VBarRule {
    Auto { alpha: f64 },
    Fixed { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub penalty: PenaltyConfig,
    pub v_bar: VBarRule,
    pub sigma_source: SigmaSource,
    /// Floor on σ̂; zero keeps exact coverage.
    pub sigma_min: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            alpha: 0.05,
            penalty: PenaltyConfig::default(),
            v_bar: VBarRule::Auto { alpha: 0.1 },
            sigma_source: SigmaSource::Analytic,
            sigma_min: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceResult {
    pub estimate: f64,
    pub se: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// Lower confidence bound `B̆ − z_{1−α} se`.
    pub ci_lower_onesided: f64,
    /// Upper confidence bound `B̆ + z_{1−α} se`.
    pub ci_upper_onesided: f64,
    pub ci_twosided: (f64, f64),
    pub triplet: OptimalTriplet,
    pub n1: usize,
    pub n2: usize,
    /// σ̂ was numerically zero; the interval collapses to a point.
    pub degenerate_variance: bool,
}

impl InferenceResult {
    /// Result for `max p'x` given a run on `min (−p)'x`.
    pub fn negated(&self) -> Self {
        Self {
            estimate: -self.estimate,
            ci_lower_onesided: -self.ci_upper_onesided,
            ci_upper_onesided: -self.ci_lower_onesided,
            ci_twosided: (-self.ci_twosided.1, -self.ci_twosided.0),
            ..self.clone()
        }
    }
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Sample split, triplet on fold 1, estimate and standard error on fold 2.
pub fn run_inference(est: &dyn ThetaEstimator, cfg: &InferenceConfig, seed: u64) -> Result<InferenceResult> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return arg_err(format!("alpha = {} outside (0,1)", cfg.alpha));
    }
    if !(cfg.sigma_min >= 0.0) {
        return arg_err("sigma_min must be nonnegative");
    }
    let n = est.n_obs();
    let (f1, f2) = split_sample(n, cfg.gamma, seed)?;
    let th1 = est.estimate(&f1)?;
    let w = cfg.penalty.weights(&th1, f1.len())?;
    let v_bar = match cfg.v_bar {
        VBarRule::Auto { alpha } => select_v_bar(&th1.m, &th1.p, alpha)?,
        VBarRule::Fixed { value } => value,
    };
    let triplet = find_triplet(&th1, &w, v_bar)?;
    let th2 = est.estimate(&f2)?;
    let (q, d) = (th2.q(), th2.d());
    let estimate = linear_stat(&th2, &triplet.a, &triplet.x, &triplet.v) + dot(&th2.p, &triplet.x);
    let sigma = match cfg.sigma_source {
        SigmaSource::Analytic => {
            let all: Vec<usize> = (0..n).collect();
            let cov = est
                .covariance(&all)?
                .ok_or_else(|| Error::Unsupported("estimator has no analytic covariance; use the bootstrap".into()))?;
            let aq: Vec<usize> = triplet.a.iter().copied().filter(|&j| j < q).collect();
            asymptotic_variance(&aq, &triplet.x, &triplet.v[..q], &cov, q, d)?.sqrt()
        }
        SigmaSource::Bootstrap { reps } => {
            let rs = IndexResampler { estimator: est, idx: &f2 };
            bootstrap_se(&rs, &triplet.a, &triplet.x, &triplet.v, reps, seed)?
        }
    };
    let sigma = sigma.max(cfg.sigma_min);
    let se = sigma / (f2.len() as f64).sqrt();
    let (z1, z2) = (normal_quantile(1.0 - cfg.alpha), normal_quantile(1.0 - cfg.alpha / 2.0));
    Ok(InferenceResult {
        estimate,
        se,
        sigma,
        alpha: cfg.alpha,
        ci_lower_onesided: estimate - z1 * se,
        ci_upper_onesided: estimate + z1 * se,
        ci_twosided: (estimate - z2 * se, estimate + z2 * se),
        triplet,
        n1: f1.len(),
        n2: f2.len(),
        degenerate_variance: sigma <= 1e-12,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSidedInterval {
    pub lower: f64,
    pub upper: f64,
    /// The lower end exceeds the upper end; left unswapped.
    pub crossed: bool,
}

/// Union-bound interval for a partially identified quantity from the
/// lower-bound and upper-bound problems, α/2 on each side.
pub fn combine_two_sided(lower: &InferenceResult, upper: &InferenceResult, alpha: f64) -> Result<TwoSidedInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return arg_err(format!("alpha = {alpha} outside (0,1)"));
    }
    let z = normal_quantile(1.0 - alpha / 2.0);
    let lo = lower.estimate - z * lower.se;
    let hi = upper.estimate + z * upper.se;
    Ok(TwoSidedInterval { lower: lo, upper: hi, crossed: lo > hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_and_determinism() {
        let (a, b) = split_sample(10, 0.5, 1).unwrap();
        assert_eq!((a.len(), b.len()), (5, 5));
        let (a, b) = split_sample(7, 0.5, 1).unwrap();
        assert_eq!((a.len(), b.len()), (3, 4));
        let mut all = [a.clone(), b].concat();
        all.sort();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
        assert_eq!(split_sample(7, 0.5, 1).unwrap().0, a);
        assert!(split_sample(1, 0.5, 1).is_err());
    }

    #[test]
    fn ball_ls_examples() {
        let i2 = Matrix::identity(2);
        let v = ball_constrained_ls(&i2, &[1.0, 0.0], 10.0).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14 && v[1].abs() < 1e-14);
        let v = ball_constrained_ls(&i2, &[2.0, 0.0], 1.0).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-10 && v[1].abs() < 1e-14);
    }

    #[test]
    fn zero_inputs_give_zero_variance() {
        let (q, d) = (3, 2);
        let s = d + q * d + q;
        let z = Matrix::zeros(s, s);
        assert_eq!(asymptotic_variance(&[0, 1], &[1.0, 2.0], &[1.0, -1.0, 0.0], &z, q, d).unwrap(), 0.0);
        let i = Matrix::identity(s);
        assert_eq!(asymptotic_variance(&[0, 1], &[1.0, 2.0], &[0.0; 3], &i, q, d).unwrap(), 0.0);
    }

    #[test]
    fn selectors_match_theta_layout() {
        let (q, d) = (3, 2);
        let theta: Vec<f64> = (0..d + q * d + q).map(|v| v as f64).collect();
        assert_eq!(selector_c(q, d).apply(&theta), vec![8.0, 9.0, 10.0]);
        assert_eq!(selector_m(q, d).apply(&theta), (2..8).map(|v| v as f64).collect::<Vec<_>>());
        let sel = selector_rows(&[2, 0], q);
        assert_eq!(sel.to_dense().matvec(&[5.0, 6.0, 7.0]).unwrap(), vec![7.0, 5.0]);
    }

    #[test]
    fn negation_flips_intervals() {
        let r = InferenceResult {
            estimate: 1.0,
            se: 0.1,
            sigma: 1.0,
            alpha: 0.05,
            ci_lower_onesided: 0.8,
            ci_upper_onesided: 1.2,
            ci_twosided: (0.7, 1.3),
            triplet: OptimalTriplet { a: vec![], x: vec![], v: vec![], v_bar: 1.0 },
            n1: 1,
            n2: 1,
            degenerate_variance: false,
        };
        let n = r.negated();
        assert_eq!((n.estimate, n.ci_lower_onesided, n.ci_twosided), (-1.0, -1.2, (-1.3, -0.7)));
    }
}
