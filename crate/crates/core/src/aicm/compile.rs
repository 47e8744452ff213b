use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::table::ConditionalMomentTable;
use crate::error::{arg_err, dim_err, Error, Result};
use crate::linalg::Matrix;
use crate::lp::{solve_lp, BoxBounds, LpParams, Status};

/// Sensitivity relaxation added to the conditional-moment restrictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Relaxation {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Assumption {
    /// `Y(t) ∈ [k0, k1]` almost surely.
    Bounds { k0: f64, k1: f64 },
    /// `Y(t') >= Y(t)` almost surely for `t' > t`.
    Mtr,
    /// `E[Y(t) | Z = z]` non-decreasing in z.
    Miv,
    /// Monotone within every treatment subgroup `A ≠ {t}`.
    CmivS,
    /// Monotone within each counterfactual treatment `T = d`, `d ≠ t`.
    CmivP,
    /// Monotone within the pooled counterfactual group `T ≠ t`.
    CmivW,
    /// `b* + ℓ`: one entry per conditional restriction row, or a scalar.
    Relax { ell: Relaxation },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Target {
    /// `E[Y(t)]`
    MeanPotential { t: String },
    /// `E[Y(t) − Y(d)]`
    Ate { t: String, d: String },
    /// `E[Y(t) | Z = z]`
    ConditionalMean { t: String, z: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionSpec {
    pub assumptions: Vec<Assumption>,
    pub target: Target,
    #[serde(default)]
    pub direction: Direction,
}

/// The unobserved moment `E[Y(t) | T = d, Z = z]` behind one LP variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MomentLabel {
    pub t: String,
    pub d: String,
    pub z: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledProgram {
    /// `min p'x` (lower) or `max p'x` (upper) over `Mx >= c`, box `[k0, k1]`.
    pub lp: LpParams,
    /// `p̄'x̄`, the identified part of the target.
    pub offset: f64,
    pub labels: Vec<MomentLabel>,
    pub direction: Direction,
    /// Range the target can take given the outcome bounds.
    pub target_range: (f64, f64),
    /// The bound is sharp (only bounds/MTR almost-sure restrictions).
    pub sharp: bool,
    /// The bound is valid but not known to be sharp.
    pub valid_only: bool,
    /// Number of conditional-moment restriction rows (length of a vector ℓ).
    pub n_restrictions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub status: Status,
    pub bound: Option<f64>,
    pub vertex: Option<Vec<f64>>,
}

impl CompiledProgram {
    /// The program as a minimization: `p` negated for upper bounds.
    pub fn oriented_lp(&self) -> LpParams {
        match self.direction {
            Direction::Lower => self.lp.clone(),
            Direction::Upper => LpParams { p: self.lp.p.iter().map(|v| -v).collect(), ..self.lp.clone() },
        }
    }

    pub fn solve(&self) -> Result<BoundResult> {
        let sol = solve_lp(&self.oriented_lp(), true)?;
        let bound = sol.value.map(|v| match self.direction {
            Direction::Lower => self.offset + v,
            Direction::Upper => self.offset - v,
        });
        Ok(BoundResult { status: sol.status, bound, vertex: sol.vertex })
    }

    /// Epigraph form with deterministic objective `e₁`: variables `(τ, x)`,
    /// extra row `τ − p'x >= offset` (lower) or `−τ + p'x >= −offset`
    /// (upper). Its minimum is the lower bound, or minus the upper bound.
    pub fn epigraph_lp(&self) -> Result<LpParams> {
        let (q, d) = (self.lp.q(), self.lp.d());
        let sign = match self.direction {
            Direction::Lower => 1.0,
            Direction::Upper => -1.0,
        };
        let mut m = Matrix::zeros(q + 1, d + 1);
        m.set(0, 0, sign);
        for k in 0..d {
            m.set(0, k + 1, -sign * self.lp.p[k]);
        }
        for j in 0..q {
            for k in 0..d {
                m.set(j + 1, k + 1, self.lp.m.get(j, k));
            }
        }
        let mut c = vec![sign * self.offset];
        c.extend_from_slice(&self.lp.c);
        let mut p = vec![0.0; d + 1];
        p[0] = sign;
        let (lo, hi) = self.target_range;
        let span = (hi - lo).max(1.0);
        let mut lower = vec![lo - span];
        lower.extend_from_slice(&self.lp.bounds.lower);
        let mut upper = vec![hi + span];
        upper.extend_from_slice(&self.lp.bounds.upper);
        LpParams::new(p, m, c, BoxBounds { lower, upper })
    }
}

/// `M̃_MTR`: rows `e_{i+1} − e_i` over treatments in ascending order.
pub fn mtr_matrix(n_t: usize) -> Result<Matrix> {
    if n_t < 2 {
        return arg_err("MTR needs at least two treatments");
    }
    let mut m = Matrix::zeros(n_t - 1, n_t);
    for i in 0..n_t - 1 {
        m.set(i, i, -1.0);
        m.set(i, i + 1, 1.0);
    }
    Ok(m)
}

struct Row {
    coef: Vec<(usize, f64)>,
    constant: f64,
}

struct Builder<'a> {
    table: &'a ConditionalMomentTable,
    index: Vec<Option<usize>>,
}

impl Builder<'_> {
    fn var(&self, t: usize, d: usize, z: usize) -> Option<usize> {
        let (nt, nz) = (self.table.n_t(), self.table.n_z());
        self.index[(t * nt + d) * nz + z]
    }

    /// Adds `a · E[Y(t) | T = d, Z = z]` to a row.
    fn add(&self, row: &mut Row, t: usize, d: usize, z: usize, a: f64) {
        match self.var(t, d, z) {
            Some(k) => row.coef.push((k, a)),
            None => row.constant += a * self.table.mean(t, z),
        }
    }

    /// `E[Y(t) | T ∈ A, Z = z]` with weight `a`.
    fn add_group(&self, row: &mut Row, t: usize, mask: u64, z: usize, a: f64) {
        let members: Vec<usize> = (0..self.table.n_t()).filter(|d| mask >> d & 1 == 1).collect();
        let pa: f64 = members.iter().map(|&d| self.table.p_t_given_z(d, z)).sum();
        for d in members {
            self.add(row, t, d, z, a * self.table.p_t_given_z(d, z) / pa);
        }
    }
}

fn new_row() -> Row {
    Row { coef: Vec::new(), constant: 0.0 }
}

/// Variable layout: potential outcome t ascending, then z descending, then
/// conditioning treatment d ascending. A moment is a variable unless t = d
/// and t is observed.
pub fn variable_labels(table: &ConditionalMomentTable) -> Vec<MomentLabel> {
    let (nt, nz) = (table.n_t(), table.n_z());
    let mut out = Vec::new();
    for t in 0..nt {
        for z in (0..nz).rev() {
            for d in 0..nt {
                if t != d || !table.observed[t] {
                    out.push(MomentLabel {
                        t: table.treatments[t].clone(),
                        d: table.treatments[d].clone(),
                        z: table.instruments[z].clone(),
                    });
                }
            }
        }
    }
    out
}

/// Compiles the table and assumptions into `(p, M, c)`, an identified
/// offset, and variable labels.
pub fn compile(table: &ConditionalMomentTable, spec: &AssumptionSpec) -> Result<CompiledProgram> {
    let (nt, nz) = (table.n_t(), table.n_z());
    let mut bounds = None;
    let mut relax = None;
    let (mut mtr, mut miv, mut cs, mut cp, mut cw) = (false, false, false, false, false);
    for a in &spec.assumptions {
        match a {
            Assumption::Bounds { k0, k1 } => {
                if bounds.replace((*k0, *k1)).is_some() {
                    return arg_err("bounds given twice");
                }
            }
            Assumption::Mtr => mtr = true,
            Assumption::Miv => miv = true,
            Assumption::CmivS => cs = true,
            Assumption::CmivP => cp = true,
            Assumption::CmivW => cw = true,
            Assumption::Relax { ell } => {
                if relax.replace(ell.clone()).is_some() {
                    return arg_err("relaxation given twice");
                }
            }
        }
    }
    let Some((k0, k1)) = bounds else {
        return Err(Error::Unsupported("outcome bounds are required to keep the program bounded".into()));
    };
    if !(k0.is_finite() && k1.is_finite() && k0 <= k1) {
        return arg_err(format!("bounds need finite k0 <= k1, got [{k0}, {k1}]"));
    }
    let cmiv = cs || cp || cw;
    if cmiv && table.observed.iter().any(|o| !o) {
        return Err(Error::Unsupported("conditional monotonicity with missing outcomes".into()));
    }
    if cs && nt > 16 {
        return Err(Error::TooLarge(format!("strong conditional monotonicity over {nt} treatments")));
    }
    let tol = 1e-9 * (1.0 + k0.abs().max(k1.abs()));
    for t in 0..nt {
        for z in 0..nz {
            if let Some(m) = table.cell_mean[t][z] {
                if m < k0 - tol || m > k1 + tol {
                    return arg_err(format!(
                        "observed mean {m} in cell ({}, {}) outside [{k0}, {k1}]",
                        table.treatments[t], table.instruments[z]
                    ));
                }
            }
        }
    }

    let mut index = vec![None; nt * nt * nz];
    let mut nvar = 0;
    for t in 0..nt {
        for z in (0..nz).rev() {
            for d in 0..nt {
                if t != d || !table.observed[t] {
                    index[(t * nt + d) * nz + z] = Some(nvar);
                    nvar += 1;
                }
            }
        }
    }
    if nvar == 0 {
        return arg_err("every moment is identified; nothing to bound");
    }
    let b = Builder { table, index };

    // Almost-sure restrictions, applied within every (d, z) cell.
    let mut as_rows = Vec::new();
    for t in 0..nt {
        for z in (0..nz).rev() {
            for d in 0..nt {
                if let Some(k) = b.var(t, d, z) {
                    as_rows.push(Row { coef: vec![(k, 1.0)], constant: -k0 });
                    as_rows.push(Row { coef: vec![(k, -1.0)], constant: k1 });
                }
            }
        }
    }
    if mtr {
        for d in 0..nt {
            for z in (0..nz).rev() {
                for i in 0..nt.saturating_sub(1) {
                    let mut r = new_row();
                    b.add(&mut r, i + 1, d, z, 1.0);
                    b.add(&mut r, i, d, z, -1.0);
                    as_rows.push(r);
                }
            }
        }
    }

    // Conditional-moment restrictions: monotonicity of E[Y(t) | T ∈ A, Z].
    let full: u64 = if nt >= 64 { u64::MAX } else { (1u64 << nt) - 1 };
    let mut cm_rows = Vec::new();
    for t in 0..nt {
        let mut groups = BTreeSet::new();
        if miv || cmiv {
            groups.insert(full);
        }
        if cw && nt > 1 {
            groups.insert(full & !(1 << t));
        }
        if cp {
            groups.extend((0..nt).filter(|&d| d != t).map(|d| 1u64 << d));
        }
        if cs {
            groups.extend((1..=full).filter(|&a| a != 1 << t));
        }
        for &a in &groups {
            for j in 1..nz {
                let mut r = new_row();
                b.add_group(&mut r, t, a, j, 1.0);
                b.add_group(&mut r, t, a, j - 1, -1.0);
                cm_rows.push(r);
            }
        }
    }
    let n_restrictions = cm_rows.len();
    if let Some(ell) = relax {
        let ell = match ell {
            Relaxation::Scalar(s) => vec![s; n_restrictions],
            Relaxation::Vector(v) if v.len() == n_restrictions => v,
            Relaxation::Vector(v) => {
                return dim_err(format!("relaxation has length {}, expected {n_restrictions}", v.len()))
            }
        };
        if ell.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return arg_err("relaxation entries must be finite and nonnegative");
        }
        for (r, l) in cm_rows.iter_mut().zip(ell) {
            r.constant += l;
        }
    }

    let mut m_rows = Vec::new();
    let mut c = Vec::new();
    for r in as_rows.into_iter().chain(cm_rows) {
        let mut dense = vec![0.0; nvar];
        for (k, a) in r.coef {
            dense[k] += a;
        }
        if dense.iter().all(|v| *v == 0.0) {
            if r.constant < -tol {
                return Err(Error::LpStatus("infeasible: an identified restriction is violated".into()));
            }
            continue;
        }
        m_rows.push(dense);
        c.push(-r.constant);
    }
    let m = Matrix::from_rows(&m_rows)?;

    let mut obj = new_row();
    let target_range = match &spec.target {
        Target::MeanPotential { t } => {
            let t = table.treatment_index(t)?;
            for z in 0..nz {
                for d in 0..nt {
                    b.add(&mut obj, t, d, z, table.cell_prob[d][z]);
                }
            }
            (k0, k1)
        }
        Target::Ate { t, d: s } => {
            let (t, s) = (table.treatment_index(t)?, table.treatment_index(s)?);
            for z in 0..nz {
                for d in 0..nt {
                    b.add(&mut obj, t, d, z, table.cell_prob[d][z]);
                    b.add(&mut obj, s, d, z, -table.cell_prob[d][z]);
                }
            }
            (k0 - k1, k1 - k0)
        }
        Target::ConditionalMean { t, z } => {
            let t = table.treatment_index(t)?;
            let z = table
                .instruments
                .iter()
                .position(|l| l == z)
                .ok_or_else(|| Error::InvalidArgument(format!("instrument {z} not in support")))?;
            for d in 0..nt {
                b.add(&mut obj, t, d, z, table.p_t_given_z(d, z));
            }
            (k0, k1)
        }
    };
    let mut p = vec![0.0; nvar];
    for (k, a) in obj.coef {
        p[k] += a;
    }
    let lp = LpParams::new(p, m, c, BoxBounds::uniform(nvar, k0, k1))?;
    Ok(CompiledProgram {
        lp,
        offset: obj.constant,
        labels: variable_labels(table),
        direction: spec.direction,
        target_range,
        sharp: true,
        valid_only: false,
        n_restrictions,
    })
}

/// Lower and upper sharp bounds for one assumption set.
pub fn identified_set(
    table: &ConditionalMomentTable,
    assumptions: &[Assumption],
    target: &Target,
) -> Result<(BoundResult, BoundResult)> {
    let mut spec =
        AssumptionSpec { assumptions: assumptions.to_vec(), target: target.clone(), direction: Direction::Lower };
    let lo = compile(table, &spec)?.solve()?;
    spec.direction = Direction::Upper;
    let hi = compile(table, &spec)?.solve()?;
    Ok((lo, hi))
}

/// Restriction families with a single-t block structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Miv,
    CmivS,
    CmivP,
}

/// `(G_j, c_j)` for one instrument level: rows of G act on the
/// counterfactual moments `x^j = (E[Y(t) | T = d, Z = z_j])_{d ≠ t}`.
pub fn block(table: &ConditionalMomentTable, t: usize, zi: usize, kind: BlockKind) -> (Matrix, Vec<f64>) {
    let nt = table.n_t();
    let others: Vec<usize> = (0..nt).filter(|&d| d != t).collect();
    let pt = table.p_t_given_z(t, zi);
    let obs = pt * table.mean(t, zi);
    let pj: Vec<f64> = others.iter().map(|&d| table.p_t_given_z(d, zi)).collect();
    match kind {
        BlockKind::Miv => (Matrix::new(1, others.len(), pj).expect("finite"), vec![obs]),
        BlockKind::CmivP => {
            let mut g = Matrix::zeros(nt, others.len());
            for (k, v) in pj.iter().enumerate() {
                g.set(0, k, *v);
                g.set(k + 1, k, 1.0);
            }
            let mut c = vec![0.0; nt];
            c[0] = obs;
            (g, c)
        }
        BlockKind::CmivS => {
            let full = (1u64 << nt) - 1;
            let subsets: Vec<u64> = (1..=full).filter(|&a| a != 1 << t).collect();
            let mut g = Matrix::zeros(subsets.len(), others.len());
            let mut c = vec![0.0; subsets.len()];
            for (r, &a) in subsets.iter().enumerate() {
                let pa: f64 = (0..nt).filter(|d| a >> d & 1 == 1).map(|d| table.p_t_given_z(d, zi)).sum();
                for (k, &d) in others.iter().enumerate() {
                    if a >> d & 1 == 1 {
                        g.set(r, k, pj[k] / pa);
                    }
                }
                if a >> t & 1 == 1 {
                    c[r] = pt / pa * table.mean(t, zi);
                }
            }
            (g, c)
        }
    }
}

/// Single-t program in block form: `x = (x^N, …, x^1)`, rows
/// `−x^N >= −K₁ι`, `G_j x^j − G_{j−1} x^{j−1} >= −Δc_j` for j = N…2, and
/// `x^1 >= K₀ι`. Returns the LP for the lower bound on `E[Y(t)]` and the
/// identified offset. Endpoint bounds propagate to every level only under
/// the conditional variants.
pub fn block_program(
    table: &ConditionalMomentTable,
    t: &str,
    kind: BlockKind,
    k0: f64,
    k1: f64,
) -> Result<(LpParams, f64)> {
    let ti = table.treatment_index(t)?;
    if !table.observed.iter().all(|&o| o) {
        return Err(Error::Unsupported("block form assumes no missing outcomes".into()));
    }
    let (nt, nz) = (table.n_t(), table.n_z());
    if nt < 2 {
        return arg_err("block form needs at least two treatments");
    }
    let w = nt - 1;
    let d = w * nz;
    // Column offset of block x^j (0-based j), blocks stored from j = N−1 down to 0.
    let col = |j: usize| (nz - 1 - j) * w;
    let blocks: Vec<(Matrix, Vec<f64>)> = (0..nz).map(|j| block(table, ti, j, kind)).collect();
    let mut rows = Vec::new();
    let mut c = Vec::new();
    for k in 0..w {
        let mut r = vec![0.0; d];
        r[col(nz - 1) + k] = -1.0;
        rows.push(r);
        c.push(-k1);
    }
    for j in (1..nz).rev() {
        let (gj, cj) = &blocks[j];
        let (gp, cp) = &blocks[j - 1];
        for r in 0..gj.rows() {
            let mut row = vec![0.0; d];
            for k in 0..w {
                row[col(j) + k] += gj.get(r, k);
                row[col(j - 1) + k] -= gp.get(r, k);
            }
            rows.push(row);
            c.push(-(cj[r] - cp[r]));
        }
    }
    for k in 0..w {
        let mut r = vec![0.0; d];
        r[col(0) + k] = 1.0;
        rows.push(r);
        c.push(k0);
    }
    let mut p = vec![0.0; d];
    let mut offset = 0.0;
    for j in 0..nz {
        let pz = table.p_z(j);
        for (k, dd) in (0..nt).filter(|&x| x != ti).enumerate() {
            p[col(j) + k] = pz * table.p_t_given_z(dd, j);
        }
        offset += table.cell_prob[ti][j] * table.mean(ti, j);
    }
    let lp = LpParams::new(p, Matrix::from_rows(&rows)?, c, BoxBounds::uniform(d, k0, k1))?;
    Ok((lp, offset))
}
