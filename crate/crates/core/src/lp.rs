//! Linear programs `min p'x s.t. Mx >= c` over a known box, solved to an
//! optimal vertex with its binding set.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::linalg::{dot, lu_solve, null_space, Matrix};
use crate::simplex::{solve_inequality_form, Outcome};

/// Feasibility tolerance.
pub const TAU_FEAS: f64 = 1e-8;
/// Binding-constraint classification tolerance.
pub const TAU_BIND: f64 = 1e-7;
/// Relative invertibility tolerance (scaled by the largest entry).
pub const TAU_RANK: f64 = 1e-9;
/// Vertex deduplication tolerance.
pub const TAU_DEDUP: f64 = 1e-7;
/// Objective-value agreement tolerance.
pub const TAU_VAL: f64 = 1e-8;
/// Default cap on the number of d-subsets visited by enumeration.
pub const ENUMERATION_CAP: u64 = 1_000_000;

/// The known compact set X as per-coordinate bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn uniform(d: usize, lo: f64, hi: f64) -> Self {
        Self { lower: vec![lo; d], upper: vec![hi; d] }
    }
}

/// The parameter triplet θ = (p, M, c) plus the box X.
#[derive(Debug, Clone, PartialEq)]
pub struct LpParams {
    pub p: Vec<f64>,
    pub m: Matrix,
    pub c: Vec<f64>,
    pub bounds: BoxBounds,
}

impl LpParams {
    pub fn new(p: Vec<f64>, m: Matrix, c: Vec<f64>, bounds: BoxBounds) -> Result<Self> {
        let (q, d) = (m.rows(), m.cols());
        if q == 0 || d == 0 {
            return dim_err("need at least one constraint and one variable");
        }
        if p.len() != d {
            return dim_err(format!("p has length {}, M has {d} columns", p.len()));
        }
        if c.len() != q {
            return dim_err(format!("c has length {}, M has {q} rows", c.len()));
        }
        if bounds.lower.len() != d || bounds.upper.len() != d {
            return dim_err(format!("box bounds must have length {d}"));
        }
        if p.iter().chain(&c).chain(&bounds.lower).chain(&bounds.upper).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("p, c and box must be finite".into()));
        }
        if bounds.lower.iter().zip(&bounds.upper).any(|(l, u)| l > u) {
            return arg_err("box lower bound exceeds upper bound");
        }
        Ok(Self { p, m, c, bounds })
    }

    pub fn d(&self) -> usize {
        self.m.cols()
    }

    pub fn q(&self) -> usize {
        self.m.rows()
    }

    /// Box rows in the order `x_i >= l_i` (i = 0..d), then `-x_i >= -u_i`.
    pub fn box_rows(&self) -> (Matrix, Vec<f64>) {
        let d = self.d();
        let mut m = Matrix::zeros(2 * d, d);
        let mut c = vec![0.0; 2 * d];
        for i in 0..d {
            m.set(i, i, 1.0);
            c[i] = self.bounds.lower[i];
            m.set(d + i, i, -1.0);
            c[d + i] = -self.bounds.upper[i];
        }
        (m, c)
    }

    /// `M` with the box rows appended; indices `q..q+2d` are box rows.
    pub fn extended(&self) -> (Matrix, Vec<f64>) {
        let (bm, bc) = self.box_rows();
        let m = self.m.vstack(&bm).expect("box rows share the column count");
        let mut c = self.c.clone();
        c.extend(bc);
        (m, c)
    }

    /// Copy with a different right-hand side.
    pub fn with_c(&self, c: Vec<f64>) -> Result<Self> {
        Self::new(self.p.clone(), self.m.clone(), c, self.bounds.clone())
    }

    /// Copy with a different objective.
    pub fn with_p(&self, p: Vec<f64>) -> Result<Self> {
        Self::new(p, self.m.clone(), self.c.clone(), self.bounds.clone())
    }

    /// θ in the order (p, vec M column-major, c).
    pub fn theta(&self) -> Vec<f64> {
        let mut t = self.p.clone();
        t.extend(self.m.vectorize());
        t.extend_from_slice(&self.c);
        t
    }

    /// Rebuild from a θ vector in the order of [`LpParams::theta`].
    pub fn from_theta(theta: &[f64], q: usize, d: usize, bounds: BoxBounds) -> Result<Self> {
        if theta.len() != d + q * d + q {
            return dim_err(format!("theta has length {}, expected {}", theta.len(), d + q * d + q));
        }
        let p = theta[..d].to_vec();
        let m = crate::linalg::inverse_vectorize(&theta[d..d + q * d], q, d)?;
        let c = theta[d + q * d..].to_vec();
        Self::new(p, m, c, bounds)
    }
}

/// JSON form of [`LpParams`]: `p`, `M` as an array of rows, `c`, `box`
/// and optional variable labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpDocument {
    pub p: Vec<f64>,
    #[serde(rename = "M")]
    pub m: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    #[serde(rename = "box")]
    pub bounds: BoxBounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl LpDocument {
    pub fn from_params(params: &LpParams) -> Self {
        Self {
            p: params.p.clone(),
            m: params.m.to_rows(),
            c: params.c.clone(),
            bounds: params.bounds.clone(),
            labels: None,
        }
    }

    /// Validates every dimension, including the label count.
    pub fn to_params(&self) -> Result<LpParams> {
        let d = self.p.len();
        if let Some(j) = self.m.iter().position(|r| r.len() != d) {
            return dim_err(format!("row {j} of M has length {}, p has length {d}", self.m[j].len()));
        }
        if let Some(l) = &self.labels {
            if l.len() != d {
                return dim_err(format!("{} labels for {d} variables", l.len()));
            }
        }
        if self.m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("M must be finite".into()));
        }
        LpParams::new(self.p.clone(), Matrix::from_rows(&self.m)?, self.c.clone(), self.bounds.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: Status,
    pub value: Option<f64>,
    pub vertex: Option<Vec<f64>>,
    /// Rows binding at the vertex, indexing the solved system (box rows
    /// follow the `q` constraint rows when the box was included).
    pub binding: Vec<usize>,
}

impl LpSolution {
    fn non_optimal(status: Status) -> Self {
        Self { status, value: None, vertex: None, binding: Vec::new() }
    }

    /// Value with the extended-real convention: +∞ if infeasible, −∞ if unbounded.
    pub fn extended_value(&self) -> f64 {
        match self.status {
            Status::Optimal => self.value.unwrap_or(f64::NAN),
            Status::Infeasible => f64::INFINITY,
            Status::Unbounded => f64::NEG_INFINITY,
        }
    }
}

/// Rows with `|M_j x − c_j| <= tol`.
pub fn binding_set(m: &Matrix, c: &[f64], x: &[f64], tol: f64) -> Vec<usize> {
    (0..m.rows()).filter(|&j| (dot(m.row(j), x) - c[j]).abs() <= tol).collect()
}

/// Move an optimal point along null directions of its binding rows until it
/// is a vertex. Directions are chosen so no objective gets worse.
fn purify(m: &Matrix, c: &[f64], mut x: Vec<f64>, objectives: &[Vec<f64>]) -> Vec<f64> {
    for _ in 0..=m.cols() {
        let j = binding_set(m, c, &x, TAU_BIND);
        let Ok(ns) = null_space(&m.select_rows(&j), 1e-14) else { return x };
        let Some(dir) = ns.first() else { return x };
        let mut sign = 1.0;
        for g in objectives {
            let gd = dot(g, dir);
            if gd.abs() > 1e-12 * (1.0 + crate::linalg::norm(g)) {
                sign = -gd.signum();
                break;
            }
        }
        let step = |s: f64| -> f64 {
            (0..m.rows())
                .filter(|r| !j.contains(r))
                .filter_map(|r| {
                    let md = s * dot(m.row(r), dir);
                    (md < -1e-12).then(|| (dot(m.row(r), &x) - c[r]).max(0.0) / -md)
                })
                .fold(f64::INFINITY, f64::min)
        };
        let (s, t) = match step(sign) {
            t if t.is_finite() => (sign, t),
            _ => match step(-sign) {
                t if t.is_finite() => (-sign, t),
                _ => return x,
            },
        };
        for (xi, di) in x.iter_mut().zip(dir) {
            *xi += s * t * di;
        }
    }
    x
}

/// Lexicographic solve of `Mx >= c` returning a vertex.
pub(crate) fn solve_system(m: &Matrix, c: &[f64], objectives: &[Vec<f64>]) -> Result<LpSolution> {
    match solve_inequality_form(m, c, objectives)? {
        Outcome::Infeasible => Ok(LpSolution::non_optimal(Status::Infeasible)),
        Outcome::Unbounded => Ok(LpSolution::non_optimal(Status::Unbounded)),
        Outcome::Optimal(x) => {
            let x = purify(m, c, x, objectives);
            let binding = binding_set(m, c, &x, TAU_BIND);
            let value = objectives.first().map_or(0.0, |p| dot(p, &x));
            Ok(LpSolution { status: Status::Optimal, value: Some(value), vertex: Some(x), binding })
        }
    }
}

/// Solve `min p'x s.t. Mx >= c`, optionally also `x ∈ X`.
pub fn solve_lp(params: &LpParams, include_box: bool) -> Result<LpSolution> {
    let (m, c) = if include_box { params.extended() } else { (params.m.clone(), params.c.clone()) };
    solve_system(&m, &c, &[params.p.clone()])
}

/// A vertex with the rows binding at it.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub point: Vec<f64>,
    pub binding: Vec<usize>,
}

pub(crate) fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Calls `f` on every k-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else { return };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub(crate) fn check_cap(n: usize, k: usize, cap: u64) -> Result<()> {
    let count = binomial(n, k);
    if count > cap {
        return Err(Error::TooLarge(format!("{n} choose {k} = {count} subsets exceeds cap {cap}")));
    }
    Ok(())
}

/// All vertices of `{x : Mx >= c}` by brute force over d-subsets of rows.
pub fn enumerate_system_vertices(m: &Matrix, c: &[f64], cap: u64) -> Result<Vec<Vertex>> {
    let (q, d) = (m.rows(), m.cols());
    if c.len() != q {
        return dim_err("enumerate: c length");
    }
    check_cap(q, d, cap)?;
    let mut out: Vec<Vertex> = Vec::new();
    for_each_subset(q, d, |rows| {
        let sub = m.select_rows(rows);
        let rhs: Vec<f64> = rows.iter().map(|&r| c[r]).collect();
        let Some(x) = lu_solve(&sub, &rhs, TAU_RANK) else { return };
        let feasible = (0..q).all(|j| dot(m.row(j), &x) >= c[j] - TAU_FEAS);
        if !feasible {
            return;
        }
        let dup = out.iter().any(|v| v.point.iter().zip(&x).all(|(a, b)| (a - b).abs() <= TAU_DEDUP));
        if !dup {
            let binding = binding_set(m, c, &x, TAU_BIND);
            out.push(Vertex { point: x, binding });
        }
    });
    Ok(out)
}

/// Vertices of the feasible polyhedron with the box rows included.
pub fn enumerate_vertices(params: &LpParams) -> Result<Vec<Vertex>> {
    let (m, c) = params.extended();
    enumerate_system_vertices(&m, &c, ENUMERATION_CAP)
}
