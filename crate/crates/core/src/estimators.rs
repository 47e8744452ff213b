//! Plug-in, penalty, debiased-penalty and set-expansion estimators of the LP
//! value, and the data-driven choices of the penalty level and of v̄.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::lp::{binding_set, solve_lp, solve_system, LpParams, LpSolution, Status, TAU_BIND};

/// Penalty weights: one per constraint row, or a scalar broadcast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Penalty {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Penalty {
    /// Expand to a q-vector, checking finiteness and nonnegativity.
    pub fn resolve(&self, q: usize) -> Result<Vec<f64>> {
        let w = match self {
            Penalty::Scalar(s) => vec![*s; q],
            Penalty::Vector(v) if v.len() == q => v.clone(),
            Penalty::Vector(v) => return dim_err(format!("penalty has length {}, expected {q}", v.len())),
        };
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return arg_err("penalty weights must be finite and nonnegative");
        }
        Ok(w)
    }
}

/// Growth rule for the penalty multiplier `w_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WnRule {
    /// `ln ln n / ln ln 100`
    #[default]
    LogLog,
    /// `ln n / ln 100`
    Log,
}

impl WnRule {
    /// `w_n`, floored at 1.
    pub fn value(self, n: usize) -> Result<f64> {
        if n < 3 {
            return arg_err("w_n needs n >= 3");
        }
        let n = n as f64;
        let raw = match self {
            WnRule::LogLog => n.ln().ln() / 100f64.ln().ln(),
            WnRule::Log => n.ln() / 100f64.ln(),
        };
        Ok(raw.max(1.0))
    }
}

/// Which penalty formula [`select_penalty`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyFormula {
    /// Row-scale aware: `w_j = w_n d ‖p‖ / (δ_α ‖M_j‖)`.
    #[default]
    RowScaled,
    /// Common scalar: `w = √d ‖p‖ w_n / δ_α`.
    Scalar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyConfig {
    /// Fixed weights; when absent they are selected from the data.
    pub w: Option<Penalty>,
    pub alpha: f64,
    pub wn_rule: WnRule,
    pub formula: PenaltyFormula,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self { w: None, alpha: 0.2, wn_rule: WnRule::LogLog, formula: PenaltyFormula::RowScaled }
    }
}

impl PenaltyConfig {
    /// Fixed weights if configured, otherwise [`select_penalty`].
    pub fn weights(&self, params: &LpParams, n: usize) -> Result<Vec<f64>> {
        match &self.w {
            Some(w) => w.resolve(params.q()),
            None => select_penalty(&params.m, &params.p, n, self, false),
        }
    }
}

/// Direction used to pick among optimal vertices of the penalized problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pick {
    #[default]
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebiasedResult {
    /// `p'x̂`.
    pub value: f64,
    pub vertex: Vec<f64>,
    /// Binding rows at `x̂` over the constraints followed by the box rows.
    pub binding: Vec<usize>,
    /// `ι'(c − Mx̂)⁺`.
    pub penalty_residual: f64,
    /// Attained value of the penalized problem.
    pub penalized_value: f64,
}

/// B(θ̂): the LP at the estimated parameters, box included.
pub fn plug_in_value(params: &LpParams) -> Result<LpSolution> {
    solve_lp(params, true)
}

/// The relaxed LP in (x, a): rows `Mx + a >= c`, `a >= 0`, and the box on x.
fn relaxed_system(params: &LpParams) -> (Matrix, Vec<f64>) {
    let (q, d) = (params.q(), params.d());
    let n = d + q;
    let mut m = Matrix::zeros(2 * q + 2 * d, n);
    let mut c = vec![0.0; 2 * q + 2 * d];
    for j in 0..q {
        for k in 0..d {
            m.set(j, k, params.m.get(j, k));
        }
        m.set(j, d + j, 1.0);
        c[j] = params.c[j];
        m.set(q + j, d + j, 1.0);
    }
    for i in 0..d {
        m.set(2 * q + i, i, 1.0);
        c[2 * q + i] = params.bounds.lower[i];
        m.set(2 * q + d + i, i, -1.0);
        c[2 * q + d + i] = -params.bounds.upper[i];
    }
    (m, c)
}

fn solve_relaxed(params: &LpParams, w: &[f64], secondary: Option<Vec<f64>>) -> Result<(Vec<f64>, f64)> {
    let (q, d) = (params.q(), params.d());
    if w.len() != q {
        return dim_err(format!("penalty has length {}, expected {q}", w.len()));
    }
    let (m, c) = relaxed_system(params);
    let mut obj = params.p.clone();
    obj.extend_from_slice(w);
    let mut objectives = vec![obj];
    if let Some(mut s) = secondary {
        s.resize(d + q, 0.0);
        objectives.push(s);
    }
    let sol = solve_system(&m, &c, &objectives)?;
    if sol.status != Status::Optimal {
        return Err(Error::Numerical(format!("relaxed penalty LP reported {}", sol.status)));
    }
    let z = sol.vertex.expect("optimal solution has a vertex");
    let x = z[..d].to_vec();
    let penalized = dot(&params.p, &x) + residual_weighted(params, &x, w);
    Ok((x, penalized))
}

fn residual_weighted(params: &LpParams, x: &[f64], w: &[f64]) -> f64 {
    (0..params.q()).map(|j| w[j] * (params.c[j] - dot(params.m.row(j), x)).max(0.0)).sum()
}

/// B̃(θ; w) = min over x ∈ X of `p'x + w'(c − Mx)⁺`, via the relaxed LP.
pub fn penalty_value(params: &LpParams, w: &Penalty) -> Result<f64> {
    let w = w.resolve(params.q())?;
    Ok(solve_relaxed(params, &w, None)?.1)
}

/// Debiased penalty estimate: an optimal vertex of the penalized problem that
/// is extreme for `p'x` in direction `pick`, reported as `p'x̂`.
pub fn debiased_estimate(params: &LpParams, w: &Penalty, pick: Pick) -> Result<DebiasedResult> {
    let w = w.resolve(params.q())?;
    let secondary = match pick {
        Pick::Max => params.p.iter().map(|v| -v).collect(),
        Pick::Min => params.p.clone(),
    };
    let (x, penalized_value) = solve_relaxed(params, &w, Some(secondary))?;
    let (em, ec) = params.extended();
    let binding = binding_set(&em, &ec, &x, TAU_BIND);
    let penalty_residual = residual_weighted(params, &x, &vec![1.0; params.q()]);
    Ok(DebiasedResult { value: dot(&params.p, &x), vertex: x, binding, penalty_residual, penalized_value })
}

/// `κ_n` from `√κ_n = κ₀ ln ln n`.
pub fn kappa_rule(n: usize, kappa0: f64) -> Result<f64> {
    if n < 3 {
        return arg_err("kappa rule needs n >= 3");
    }
    Ok((kappa0 * (n as f64).ln().ln()).powi(2))
}

/// LP with the right-hand side relaxed to `c − √(κ_n/n) ι`, box included.
pub fn set_expansion_value(params: &LpParams, kappa_n: f64, n: usize) -> Result<LpSolution> {
    if !(kappa_n >= 0.0) || !kappa_n.is_finite() {
        return arg_err("kappa_n must be finite and nonnegative");
    }
    if n == 0 {
        return arg_err("n must be positive");
    }
    let s = (kappa_n / n as f64).sqrt();
    let c = params.c.iter().map(|cj| cj - s).collect();
    solve_lp(&params.with_c(c)?, true)
}

/// cdf of the limit law of √d·σ_d: `1 − exp(−t/2 − √t)`.
pub fn tao_vu_cdf(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    -(-(t / 2.0 + t.sqrt())).exp_m1()
}

/// Quantile δ_α of [`tao_vu_cdf`].
pub fn tao_vu_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return arg_err(format!("alpha = {alpha} outside (0,1)"));
    }
    // √δ solves s²/2 + s = L with L = −ln(1−α); rationalized to avoid cancellation.
    let l = -(-alpha).ln_1p();
    let s = 2.0 * l / ((1.0 + 2.0 * l).sqrt() + 1.0);
    Ok(s * s)
}

fn positive_row_norms(m: &Matrix) -> Result<Vec<f64>> {
    let norms = m.row_norms();
    if let Some(j) = norms.iter().position(|v| *v <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "row {j} of M has zero norm; drop or renormalize it before selecting a penalty"
        )));
    }
    Ok(norms)
}

/// Data-driven penalty weights. With `augmented`, a leading weight of 1 is
/// prepended for the epigraph row of an estimated objective.
pub fn select_penalty(m_hat: &Matrix, p: &[f64], n: usize, cfg: &PenaltyConfig, augmented: bool) -> Result<Vec<f64>> {
    let d = m_hat.cols();
    if p.len() != d {
        return dim_err("select_penalty: p length");
    }
    let norms = positive_row_norms(m_hat)?;
    let wn = cfg.wn_rule.value(n)?;
    let delta = tao_vu_quantile(cfg.alpha)?;
    let pn = norm(p);
    let mut w: Vec<f64> = match cfg.formula {
        PenaltyFormula::RowScaled => norms.iter().map(|r| wn * d as f64 * pn / (delta * r)).collect(),
        PenaltyFormula::Scalar => vec![(d as f64).sqrt() * pn * wn / delta; m_hat.rows()],
    };
    if augmented {
        w.insert(0, 1.0);
    }
    Ok(w)
}

/// Radius v̄ = d‖p‖ / (min_i ‖M_i‖ δ_α) of the dual-weight ball.
pub fn select_v_bar(m_hat: &Matrix, p: &[f64], alpha: f64) -> Result<f64> {
    let d = m_hat.cols();
    if p.len() != d {
        return dim_err("select_v_bar: p length");
    }
    let norms = positive_row_norms(m_hat)?;
    let min_norm = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(d as f64 * norm(p) / (min_norm * tao_vu_quantile(alpha)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::BoxBounds;

    fn example1(b: f64) -> LpParams {
        let m = Matrix::from_rows(&[vec![-(1.0 + b), 1.0], vec![1.0, -1.0], vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        LpParams::new(vec![1.0, 0.0], m, vec![0.0, 0.0, -1.0, -1.0], BoxBounds::uniform(2, -1.0, 1.0)).unwrap()
    }

    #[test]
    fn plug_in_indicator() {
        for (b, v) in [(-0.2, 0.0), (-1e-4, 0.0), (0.0, -1.0), (0.1, -1.0)] {
            assert!((plug_in_value(&example1(b)).unwrap().value.unwrap() - v).abs() < 1e-12, "b = {b}");
        }
    }

    #[test]
    fn penalty_examples() {
        let v = penalty_value(&example1(0.0), &Penalty::Scalar(0.7)).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
        let v0 = penalty_value(&example1(0.0), &Penalty::Scalar(0.0)).unwrap();
        assert!((v0 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn debiased_examples() {
        let r = debiased_estimate(&example1(-0.01), &Penalty::Scalar(200.0), Pick::Max).unwrap();
        assert!(r.value.abs() < 1e-12);
        assert!(r.vertex.iter().all(|v| v.abs() < 1e-12));
        let r = debiased_estimate(&example1(0.0), &Penalty::Scalar(0.7), Pick::Max).unwrap();
        assert!((r.value + 1.0).abs() < 1e-12);
        assert!((r.vertex[0] + 1.0).abs() < 1e-12 && (r.vertex[1] + 1.0).abs() < 1e-12);
        assert!(r.penalty_residual < 1e-12);
    }

    #[test]
    fn debiased_box_lp() {
        let m = Matrix::identity(2);
        let lp = LpParams::new(vec![1.0, 0.0], m, vec![-1.0, -1.0], BoxBounds::uniform(2, -1.0, 1.0)).unwrap();
        let r = debiased_estimate(&lp, &Penalty::Scalar(1.0), Pick::Max).unwrap();
        assert_eq!(r.vertex[0], -1.0);
        assert_eq!(r.value, plug_in_value(&lp).unwrap().value.unwrap());
    }

    #[test]
    fn set_expansion_without_second_row() {
        let m = Matrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let lp = LpParams::new(vec![1.0, 0.0], m, vec![0.0, -1.0, -1.0], BoxBounds::uniform(2, -2.0, 2.0)).unwrap();
        let (kappa, n) = (0.04, 100);
        let s = set_expansion_value(&lp, kappa, n).unwrap();
        assert!((s.value.unwrap() - (-1.0 - (kappa / n as f64).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn set_expansion_zero_kappa_is_plug_in() {
        let lp = example1(0.02);
        assert_eq!(set_expansion_value(&lp, 0.0, 50).unwrap(), plug_in_value(&lp).unwrap());
    }

    #[test]
    fn tao_vu_values() {
        let d = tao_vu_quantile(0.2).unwrap();
        // 30-digit reference value of the closed form
        assert!((d - 0.041_053_556_688_716_373).abs() < 1e-15, "{d}");
        assert!((d - 0.041055).abs() < 2e-6);
        assert!((tao_vu_cdf(tao_vu_quantile(0.5).unwrap()) - 0.5).abs() < 1e-12);
        assert!(tao_vu_quantile(1e-12).unwrap() < 1e-20);
        assert!(tao_vu_quantile(0.0).is_err() && tao_vu_quantile(1.0).is_err());
    }

    #[test]
    fn penalty_selection_examples() {
        let cfg = PenaltyConfig::default();
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let delta = tao_vu_quantile(0.2).unwrap();
        let w = select_penalty(&m, &[1.0, 0.0], 100, &cfg, false).unwrap();
        for wj in &w {
            assert!((wj - 2f64.sqrt() / delta).abs() < 1e-12);
        }
        let wa = select_penalty(&m, &[1.0, 0.0], 100, &cfg, true).unwrap();
        assert_eq!(wa[0], 1.0);
        assert_eq!(wa.len(), 3);
        let z = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(select_penalty(&z, &[1.0, 0.0], 100, &cfg, false).is_err());
        assert_eq!(WnRule::LogLog.value(50).unwrap(), 1.0);
    }

    #[test]
    fn v_bar_examples() {
        let m = Matrix::identity(2);
        let v = select_v_bar(&m, &[1.0, 0.0], 0.1).unwrap();
        assert!((v - 2.0 / tao_vu_quantile(0.1).unwrap()).abs() < 1e-12);
        let v10 = select_v_bar(&m, &[10.0, 0.0], 0.1).unwrap();
        assert!((v10 - 10.0 * v).abs() < 1e-9);
    }
}
