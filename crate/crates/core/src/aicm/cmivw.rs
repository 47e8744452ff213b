use serde::Serialize;

use super::table::ConditionalMomentTable;
use crate::error::{arg_err, Result};

/// Closed-form bounds on `E[Y(t) | Z = z_j]` (and on the pooled
/// counterfactual moment `E[Y(t) | T ≠ t, Z = z_j]`) by z level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursiveBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower_cf: Vec<f64>,
    pub upper_cf: Vec<f64>,
    /// `(Σ P[Z = z_j] l_j, Σ P[Z = z_j] u_j)`
    pub aggregate: (f64, f64),
}

fn observed_index(table: &ConditionalMomentTable, t: &str) -> Result<usize> {
    let ti = table.treatment_index(t)?;
    if !table.observed[ti] {
        return arg_err(format!("treatment {t} is not observed"));
    }
    Ok(ti)
}

fn check_bounds(k0: f64, k1: f64) -> Result<()> {
    if !(k0.is_finite() && k1.is_finite() && k0 <= k1) {
        return arg_err(format!("bounds need finite k0 <= k1, got [{k0}, {k1}]"));
    }
    Ok(())
}

fn aggregate(table: &ConditionalMomentTable, v: &[f64]) -> f64 {
    v.iter().enumerate().map(|(j, x)| table.p_z(j) * x).sum()
}

/// Bounds under the weak conditional monotonicity assumption (equivalently,
/// any conditional variant when the treatment is binary):
///
/// ```text
/// l⁻ᵗ_1 = K₀,  l⁻ᵗ_j = max(l⁻ᵗ_{j−1}, (l_{j−1} − P[T=t|z_j] m_j) / P[T≠t|z_j])
/// l_j   = P[T=t|z_j] m_j + P[T≠t|z_j] l⁻ᵗ_j
/// ```
///
/// and symmetrically for upper bounds starting from `u⁻ᵗ_N = K₁`.
pub fn cmivw_bounds(table: &ConditionalMomentTable, t: &str, k0: f64, k1: f64) -> Result<RecursiveBounds> {
    check_bounds(k0, k1)?;
    let ti = observed_index(table, t)?;
    let nz = table.n_z();
    let pt: Vec<f64> = (0..nz).map(|j| table.p_t_given_z(ti, j)).collect();
    let obs: Vec<f64> = (0..nz).map(|j| pt[j] * table.mean(ti, j)).collect();
    let mut lower = vec![0.0; nz];
    let mut lower_cf = vec![0.0; nz];
    for j in 0..nz {
        let pn = 1.0 - pt[j];
        lower_cf[j] = if j == 0 { k0 } else { lower_cf[j - 1].max((lower[j - 1] - obs[j]) / pn) };
        lower[j] = obs[j] + pn * lower_cf[j];
    }
    let mut upper = vec![0.0; nz];
    let mut upper_cf = vec![0.0; nz];
    for j in (0..nz).rev() {
        let pn = 1.0 - pt[j];
        upper_cf[j] = if j == nz - 1 { k1 } else { upper_cf[j + 1].min((upper[j + 1] - obs[j]) / pn) };
        upper[j] = obs[j] + pn * upper_cf[j];
    }
    let aggregate = (aggregate(table, &lower), aggregate(table, &upper));
    Ok(RecursiveBounds { lower, upper, lower_cf, upper_cf, aggregate })
}

/// Monotone-instrument bounds by ironing the worst-case bounds:
/// `l_j = max_{i <= j} (P[T=t|z_i] m_i + P[T≠t|z_i] K₀)`, and
/// `u_j = min_{i >= j} (…K₁)`.
pub fn miv_bounds(table: &ConditionalMomentTable, t: &str, k0: f64, k1: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_bounds(k0, k1)?;
    let ti = observed_index(table, t)?;
    let nz = table.n_z();
    let worst = |j: usize, k: f64| {
        let p = table.p_t_given_z(ti, j);
        p * table.mean(ti, j) + (1.0 - p) * k
    };
    let mut lo = Vec::with_capacity(nz);
    for j in 0..nz {
        let prev = if j == 0 { f64::NEG_INFINITY } else { lo[j - 1] };
        lo.push(worst(j, k0).max(prev));
    }
    let mut hi = vec![0.0; nz];
    for j in (0..nz).rev() {
        let next = if j == nz - 1 { f64::INFINITY } else { hi[j + 1] };
        hi[j] = worst(j, k1).min(next);
    }
    Ok((lo, hi))
}

/// `E[Y | T = t] − E[Y | T = d]`, the effect under exogenous selection.
pub fn ets_estimate(table: &ConditionalMomentTable, t: &str, d: &str) -> Result<f64> {
    let mean = |label: &str| -> Result<f64> {
        let ti = observed_index(table, label)?;
        let pt: f64 = table.cell_prob[ti].iter().sum();
        Ok((0..table.n_z()).map(|j| table.cell_prob[ti][j] * table.mean(ti, j)).sum::<f64>() / pt)
    };
    Ok(mean(t)? - mean(d)?)
}

/// Per-treatment level `α_t = 1 − (1 − α)^{1/N_T}`.
pub fn alpha_allocation(alpha: f64, n_t: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return arg_err(format!("alpha = {alpha} outside (0,1)"));
    }
    if n_t == 0 {
        return arg_err("need at least one treatment");
    }
    Ok(-((-alpha).ln_1p() / n_t as f64).exp_m1())
}
