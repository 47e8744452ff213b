//! Two-phase revised simplex on the standard form `min c'y, A y = b, y >= 0`,
//! with an explicit dense basis inverse. Pricing is Dantzig's rule; after a
//! run of degenerate pivots it falls back to Bland's rule, which cannot cycle.
//!
//! Inequality-form programs `min p'x s.t. Mx >= c` (x free) are mapped to
//! standard form by splitting `x = x⁺ − x⁻` and adding surplus variables.

use crate::error::{Error, Result};
use crate::linalg::{inverse, Matrix};

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const MAX_ITERS: usize = 200_000;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Outcome {
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Revised {
    m: usize,
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    beta: Vec<f64>,
    iters: usize,
}

impl Revised {
    fn new(a: Vec<f64>, b: Vec<f64>, m: usize, n: usize) -> Self {
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let mut is_basic = vec![false; n + m];
        is_basic[n..].iter_mut().for_each(|v| *v = true);
        Self { m, n, a, beta: b.clone(), b, basis: (n..n + m).collect(), is_basic, binv, iters: 0 }
    }

    fn col(&self, j: usize) -> Vec<f64> {
        if j < self.n {
            (0..self.m).map(|i| self.a[i * self.n + j]).collect()
        } else {
            let mut e = vec![0.0; self.m];
            e[j - self.n] = 1.0;
            e
        }
    }

    fn col_dot(&self, pi: &[f64], j: usize) -> f64 {
        if j < self.n {
            (0..self.m).map(|i| pi[i] * self.a[i * self.n + j]).sum()
        } else {
            pi[j - self.n]
        }
    }

    fn ftran(&self, col: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m).map(|i| (0..m).map(|k| self.binv[i * m + k] * col[k]).sum()).collect()
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb == 0.0 {
                continue;
            }
            for k in 0..m {
                pi[k] += cb * self.binv[i * m + k];
            }
        }
        pi
    }

    fn pivot(&mut self, r: usize, j: usize, u: &[f64]) {
        let m = self.m;
        let piv = u[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        self.beta[r] /= piv;
        for i in 0..m {
            if i == r || u[i] == 0.0 {
                continue;
            }
            let f = u[i];
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[r * m + k];
            }
            self.beta[i] -= f * self.beta[r];
        }
        self.is_basic[self.basis[r]] = false;
        self.basis[r] = j;
        self.is_basic[j] = true;
    }

    fn refactor(&mut self) {
        let m = self.m;
        let mut bmat = Matrix::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            for (i, v) in self.col(j).into_iter().enumerate() {
                bmat.set(i, k, v);
            }
        }
        if let Some(inv) = inverse(&bmat, 1e-14) {
            self.binv = inv.data().to_vec();
            self.beta = self.ftran(&self.b.clone());
        }
    }

    fn reduced_cost(&self, cost: &[f64], pi: &[f64], j: usize) -> f64 {
        cost[j] - self.col_dot(pi, j)
    }

    /// `cost − A'π` over all columns, accumulated row by row.
    fn reduced_costs(&self, cost: &[f64], pi: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut r = cost.to_vec();
        for (i, &p) in pi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (rj, aij) in r[..n].iter_mut().zip(&self.a[i * n..(i + 1) * n]) {
                *rj -= p * aij;
            }
            r[n + i] -= p;
        }
        r
    }

    fn run(&mut self, cost: &[f64], eligible: &[bool]) -> Result<PhaseEnd> {
        let tol_d = 1e-9 * (1.0 + cost.iter().fold(0.0f64, |a, c| a.max(c.abs())));
        let mut degenerate = 0;
        loop {
            if self.iters > 0 && self.iters % REFACTOR_EVERY == 0 {
                self.refactor();
            }
            let pi = self.duals(cost);
            let rc = self.reduced_costs(cost, &pi);
            let mut candidates = (0..self.n + self.m).filter(|&j| eligible[j] && !self.is_basic[j] && rc[j] < -tol_d);
            let enter = if degenerate < DEGENERATE_RUN {
                // Dantzig: most negative reduced cost, lowest index on ties.
                candidates.fold(None::<usize>, |best, j| match best {
                    Some(b) if rc[b] <= rc[j] => Some(b),
                    _ => Some(j),
                })
            } else {
                // Bland: lowest-index improving column.
                candidates.next()
            };
            let Some(j) = enter else { return Ok(PhaseEnd::Optimal) };
            let u = self.ftran(&self.col(j));
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if u[i] <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.beta[i].max(0.0) / u[i];
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12 * (1.0 + br) {
                            Some((i, ratio))
                        } else if ratio <= br + 1e-12 * (1.0 + br) && self.basis[i] < self.basis[bi] {
                            // Bland: lowest-index basic variable among ties leaves.
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, step)) = best else { return Ok(PhaseEnd::Unbounded) };
            degenerate = if step <= 1e-12 { degenerate + 1 } else { 0 };
            self.pivot(r, j, &u);
            self.iters += 1;
            if self.iters > MAX_ITERS {
                return Err(Error::Numerical("simplex iteration limit reached".into()));
            }
        }
    }

    fn structural_values(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                y[j] = self.beta[i].max(0.0);
            }
        }
        y
    }
}

/// Lexicographic minimization of `objectives[0]'x`, then `objectives[1]'x`
/// over the optimal face, etc., subject to `M x >= c` with `x` free.
pub(crate) fn solve_inequality_form(m: &Matrix, c: &[f64], objectives: &[Vec<f64>]) -> Result<Outcome> {
    let (rows, d) = (m.rows(), m.cols());
    let n = 2 * d + rows;
    // Row i: M_i x⁺ − M_i x⁻ − s_i = c_i, sign-flipped so the rhs is nonnegative.
    let mut a = vec![0.0; rows * n];
    let mut b = vec![0.0; rows];
    for i in 0..rows {
        let sgn = if c[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            a[i * n + j] = sgn * m.get(i, j);
            a[i * n + d + j] = -sgn * m.get(i, j);
        }
        a[i * n + 2 * d + i] = -sgn;
        b[i] = sgn * c[i];
    }
    let mut s = Revised::new(a, b, rows, n);

    let mut cost1 = vec![0.0; n + rows];
    cost1[n..].iter_mut().for_each(|v| *v = 1.0);
    s.run(&cost1, &vec![true; n + rows])?;
    let infeas: f64 = s.basis.iter().zip(&s.beta).filter(|(j, _)| **j >= n).map(|(_, v)| v.max(0.0)).sum();
    let bscale = 1.0 + s.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if infeas > 1e-9 * bscale {
        return Ok(Outcome::Infeasible);
    }
    // Drive zero-level artificials out of the basis where possible.
    for r in 0..rows {
        if s.basis[r] < n {
            continue;
        }
        let row: Vec<f64> = s.binv[r * rows..(r + 1) * rows].to_vec();
        let cand = (0..n).filter(|&j| !s.is_basic[j]).map(|j| (j, s.col_dot(&row, j))).fold(
            None::<(usize, f64)>,
            |acc, (j, v)| match acc {
                Some((_, bv)) if bv.abs() >= v.abs() => acc,
                _ => Some((j, v)),
            },
        );
        if let Some((j, v)) = cand {
            if v.abs() > PIVOT_TOL {
                s.beta[r] = 0.0;
                let u = s.ftran(&s.col(j));
                s.pivot(r, j, &u);
            }
        }
    }

    let mut eligible: Vec<bool> = (0..n + rows).map(|j| j < n).collect();
    for (k, obj) in objectives.iter().enumerate() {
        let mut cost = vec![0.0; n + rows];
        for j in 0..d {
            cost[j] = obj[j];
            cost[d + j] = -obj[j];
        }
        match s.run(&cost, &eligible)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded if k == 0 => return Ok(Outcome::Unbounded),
            PhaseEnd::Unbounded => break,
        }
        // Restrict later objectives to columns with zero reduced cost, which
        // keeps earlier objectives at their optimum.
        let pi = s.duals(&cost);
        let tol_d = 1e-9 * (1.0 + obj.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        for j in 0..n {
            if !s.is_basic[j] && s.reduced_cost(&cost, &pi, j) > tol_d {
                eligible[j] = false;
            }
        }
    }
    let y = s.structural_values();
    Ok(Outcome::Optimal((0..d).map(|j| y[j] - y[d + j]).collect()))
}
