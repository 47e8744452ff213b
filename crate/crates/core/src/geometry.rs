//! Polytope diagnostics: δ-condition sets, condition numbers, L1 violation,
//! exact projection, and a check of the penalty-dominance condition `w > λ*`.

use serde::Serialize;

use crate::error::{dim_err, Error, Result};
use crate::linalg::{dot, lu_solve, norm, pinv_solve, rank, smallest_singular_value, Matrix};
use crate::lp::{
    binomial, check_cap, enumerate_system_vertices, for_each_subset, solve_lp, solve_system, LpParams, Status,
    ENUMERATION_CAP, TAU_FEAS, TAU_RANK, TAU_VAL,
};

/// `{x : Mx >= c}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub m: Matrix,
    pub c: Vec<f64>,
}

impl Polytope {
    pub fn new(m: Matrix, c: Vec<f64>) -> Result<Self> {
        if c.len() != m.rows() {
            return dim_err(format!("c has length {}, M has {} rows", c.len(), m.rows()));
        }
        Ok(Self { m, c })
    }

    /// The feasible set of an LP, optionally with the box rows.
    pub fn from_params(params: &LpParams, include_box: bool) -> Self {
        let (m, c) = if include_box { params.extended() } else { (params.m.clone(), params.c.clone()) };
        Self { m, c }
    }

    pub fn d(&self) -> usize {
        self.m.cols()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.m.rows()).all(|j| dot(self.m.row(j), x) >= self.c[j] - TAU_FEAS)
    }
}

/// Rows rescaled to norm √d: `M̃_j = √d M_j/‖M_j‖`, `c̃_j = √d c_j/‖M_j‖`.
pub fn normalize_rows(poly: &Polytope) -> Result<Polytope> {
    let sd = (poly.d() as f64).sqrt();
    let norms = poly.m.row_norms();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::InvalidArgument(format!("row {j} is zero; drop it before normalizing")));
    }
    let mut m = poly.m.clone();
    let mut c = poly.c.clone();
    for (j, n) in norms.iter().enumerate() {
        for k in 0..poly.d() {
            m.set(j, k, sd * poly.m.get(j, k) / n);
        }
        c[j] = sd * poly.c[j] / n;
    }
    Polytope::new(m, c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaReport {
    /// LP value over `Mx >= c` (box rows excluded).
    pub value: f64,
    pub j_star_sets: Vec<Vec<usize>>,
    pub sigma_values: Vec<f64>,
    /// `λ*_J = M_J^{-1'} p`, one per set.
    pub kkt_vectors: Vec<Vec<f64>>,
    pub delta: f64,
}

/// All d-subsets J with `x* = M_J⁻¹c_J` feasible and optimal and
/// `M_J^{-1'}p >= 0`, and the largest `σ_d(M_J)` among them.
///
/// Uses the constraint rows only; the LP must be finite without the box.
pub fn delta_condition(params: &LpParams) -> Result<DeltaReport> {
    let sol = solve_lp(params, false)?;
    let value = match sol.status {
        Status::Optimal => sol.value.expect("optimal"),
        s => return Err(Error::LpStatus(format!("delta condition needs a finite LP, got {s}"))),
    };
    let (q, d) = (params.q(), params.d());
    check_cap(q, d, ENUMERATION_CAP)?;
    let (m, c, p) = (&params.m, &params.c, &params.p);
    let mut rep = DeltaReport { value, j_star_sets: vec![], sigma_values: vec![], kkt_vectors: vec![], delta: 0.0 };
    let mut fault = None;
    for_each_subset(q, d, |rows| {
        if fault.is_some() {
            return;
        }
        let mj = m.select_rows(rows);
        let cj: Vec<f64> = rows.iter().map(|&r| c[r]).collect();
        let Some(x) = lu_solve(&mj, &cj, TAU_RANK) else { return };
        if !(0..q).all(|r| dot(m.row(r), &x) >= c[r] - TAU_FEAS) {
            return;
        }
        if (dot(p, &x) - value).abs() > TAU_VAL * (1.0 + value.abs()) {
            return;
        }
        let Some(lam) = lu_solve(&mj.transpose(), p, TAU_RANK) else { return };
        if lam.iter().any(|&l| l < -TAU_FEAS) {
            return;
        }
        match smallest_singular_value(&mj) {
            Ok(s) => {
                rep.j_star_sets.push(rows.to_vec());
                rep.sigma_values.push(s);
                rep.kkt_vectors.push(lam);
            }
            Err(e) => fault = Some(e),
        }
    });
    if let Some(e) = fault {
        return Err(e);
    }
    if rep.j_star_sets.is_empty() {
        return Err(Error::Numerical("no index set passes the optimality checks".into()));
    }
    rep.delta = rep.sigma_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(rep)
}

fn check_bounded(poly: &Polytope) -> Result<()> {
    for i in 0..poly.d() {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; poly.d()];
            e[i] = s;
            match solve_system(&poly.m, &poly.c, &[e])?.status {
                Status::Optimal => {}
                Status::Infeasible => return Err(Error::LpStatus("polytope is empty".into())),
                Status::Unbounded => return Err(Error::LpStatus("polytope is unbounded".into())),
            }
        }
    }
    Ok(())
}

/// κ(Θ): the smallest `σ_d(M_B)` over vertices and full-rank d-subsets B of
/// the rows binding there. Computed on the rows as given; apply
/// [`normalize_rows`] first for the row-normalized variant.
pub fn polytope_condition_number(poly: &Polytope) -> Result<f64> {
    check_bounded(poly)?;
    let d = poly.d();
    let verts = enumerate_system_vertices(&poly.m, &poly.c, ENUMERATION_CAP)?;
    if verts.is_empty() {
        return Err(Error::LpStatus("polytope has no vertices".into()));
    }
    let mut kappa = f64::INFINITY;
    for v in &verts {
        check_cap(v.binding.len(), d, ENUMERATION_CAP)?;
        let mut sub_err = None;
        for_each_subset(v.binding.len(), d, |pos| {
            let rows: Vec<usize> = pos.iter().map(|&k| v.binding[k]).collect();
            let mb = poly.m.select_rows(&rows);
            if rank(&mb, TAU_RANK) < d {
                return;
            }
            match smallest_singular_value(&mb) {
                Ok(s) => kappa = kappa.min(s),
                Err(e) => sub_err = Some(e),
            }
        });
        if let Some(e) = sub_err {
            return Err(e);
        }
    }
    Ok(kappa)
}

/// `ι'(c − Mx)⁺`.
pub fn l1_violation(poly: &Polytope, x: &[f64]) -> f64 {
    (0..poly.m.rows()).map(|j| (poly.c[j] - dot(poly.m.row(j), x)).max(0.0)).sum()
}

/// Euclidean distance from x to the polytope and the nearest point, by
/// projecting onto the affine hull of every row subset of size at most d.
pub fn distance_to_polytope(poly: &Polytope, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (q, d) = (poly.m.rows(), poly.d());
    if x.len() != d {
        return dim_err("distance_to_polytope: point length");
    }
    let total: u64 = (1..=d.min(q)).map(|k| binomial(q, k)).fold(0u64, u64::saturating_add);
    if total > ENUMERATION_CAP {
        return Err(Error::TooLarge(format!("{total} row subsets exceed cap {ENUMERATION_CAP}")));
    }
    if poly.contains(x) {
        return Ok((0.0, x.to_vec()));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut fault = None;
    for k in 1..=d.min(q) {
        for_each_subset(q, k, |rows| {
            let ma = poly.m.select_rows(rows);
            let resid: Vec<f64> = rows.iter().map(|&r| poly.c[r] - dot(poly.m.row(r), x)).collect();
            let step = match pinv_solve(&ma, &resid, 1e-12) {
                Ok(s) => s,
                Err(e) => {
                    fault = Some(e);
                    return;
                }
            };
            let y: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            // Inconsistent systems give least-squares points off the affine set.
            if rows.iter().any(|&r| (dot(poly.m.row(r), &y) - poly.c[r]).abs() > 1e-9 * (1.0 + poly.c[r].abs())) {
                return;
            }
            if !poly.contains(&y) {
                return;
            }
            let dist = norm(&step);
            if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
                best = Some((dist, y));
            }
        });
    }
    if let Some(e) = fault {
        return Err(e);
    }
    best.ok_or_else(|| Error::LpStatus("polytope is empty".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum A1Verdict {
    Holds,
    Fails,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A1Report {
    pub verdict: A1Verdict,
    /// `max min_j (w_j − λ_j)` over optimal dual vectors, capped at 1.
    pub margin: Option<f64>,
    /// The maximizing dual vector over constraint rows then box rows.
    pub lambda: Option<Vec<f64>>,
}

/// Whether some KKT vector λ* of the boxed LP satisfies `w > λ*` on the
/// constraint rows. Box multipliers are unrestricted by w. Entries of w may
/// be `+∞`.
///
/// Solved as `max t` over dual optimal λ subject to `λ_j + t <= w_j`.
pub fn check_a1(params: &LpParams, w: &[f64]) -> Result<A1Report> {
    let q = params.q();
    if w.len() != q {
        return dim_err(format!("penalty has length {}, expected {q}", w.len()));
    }
    if w.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(Error::InvalidArgument("penalty entries must be nonnegative".into()));
    }
    let sol = solve_lp(params, true)?;
    let b = match sol.status {
        Status::Optimal => sol.value.expect("optimal"),
        s => return Err(Error::LpStatus(format!("A1 check needs a finite LP, got {s}"))),
    };
    let finite: Vec<usize> = (0..q).filter(|&j| w[j].is_finite()).collect();
    if finite.is_empty() {
        return Ok(A1Report { verdict: A1Verdict::Holds, margin: None, lambda: None });
    }
    let (em, ec) = params.extended();
    let (k, d) = (em.rows(), params.d());
    let nv = k + 1;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..k {
        let mut r = vec![0.0; nv];
        r[i] = 1.0;
        rows.push(r);
        rhs.push(0.0);
    }
    for &j in &finite {
        let mut r = vec![0.0; nv];
        r[j] = -1.0;
        r[k] = -1.0;
        rows.push(r);
        rhs.push(-w[j]);
    }
    for i in 0..d {
        let col = em.col(i);
        let mut r = col.clone();
        r.push(0.0);
        rows.push(r.clone());
        rhs.push(params.p[i]);
        rows.push(r.iter().map(|v| -v).collect());
        rhs.push(-params.p[i]);
    }
    let mut r = ec.clone();
    r.push(0.0);
    rows.push(r);
    rhs.push(b - TAU_VAL * (1.0 + b.abs()));
    let mut r = vec![0.0; nv];
    r[k] = -1.0;
    rows.push(r);
    rhs.push(-1.0);
    let sys = Matrix::from_rows(&rows)?;
    let mut obj = vec![0.0; nv];
    obj[k] = -1.0;
    let dual = solve_system(&sys, &rhs, &[obj])?;
    let Some(z) = dual.vertex.filter(|_| dual.status == Status::Optimal) else {
        return Ok(A1Report { verdict: A1Verdict::Undetermined, margin: None, lambda: None });
    };
    let t = z[k];
    let scale = finite.iter().map(|&j| w[j].abs()).fold(1.0, f64::max);
    let tau = 1e-7 * scale;
    let verdict = if t > tau {
        A1Verdict::Holds
    } else if t < -tau {
        A1Verdict::Fails
    } else {
        A1Verdict::Undetermined
    };
    Ok(A1Report { verdict, margin: Some(t), lambda: Some(z[..k].to_vec()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::BoxBounds;

    fn example1(b: f64) -> LpParams {
        let m = Matrix::from_rows(&[vec![-(1.0 + b), 1.0], vec![1.0, -1.0], vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        LpParams::new(vec![1.0, 0.0], m, vec![0.0, 0.0, -1.0, -1.0], BoxBounds::uniform(2, -1.0, 1.0)).unwrap()
    }

    fn unit_box() -> Polytope {
        let m = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        Polytope::new(m, vec![-1.0; 4]).unwrap()
    }

    const GOLDEN: f64 = 0.618_033_988_749_894_8;

    #[test]
    fn delta_of_example1() {
        let r = delta_condition(&example1(0.0)).unwrap();
        assert!((r.delta - GOLDEN).abs() < 1e-9);
        assert!(r.j_star_sets.contains(&vec![0, 2]));
        assert!(r.kkt_vectors.iter().all(|l| l.iter().all(|&v| v >= -1e-9)));
    }

    #[test]
    fn delta_of_flat_face() {
        let m = Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0], vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let lp =
            LpParams::new(vec![-1.0, 1.0], m, vec![0.0, 0.0, -1.0, -1.0], BoxBounds::uniform(2, -1.0, 1.0)).unwrap();
        assert!((delta_condition(&lp).unwrap().delta - GOLDEN).abs() < 1e-9);
    }

    #[test]
    fn delta_of_box_lp() {
        let b = unit_box();
        let lp = LpParams::new(vec![1.0, 0.0], b.m, b.c, BoxBounds::uniform(2, -1.0, 1.0)).unwrap();
        assert!((delta_condition(&lp).unwrap().delta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_rejects_unbounded() {
        let lp = LpParams::new(
            vec![1.0],
            Matrix::from_rows(&[vec![-1.0]]).unwrap(),
            vec![0.0],
            BoxBounds::uniform(1, -1.0, 1.0),
        )
        .unwrap();
        assert!(matches!(delta_condition(&lp), Err(Error::LpStatus(_))));
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(polytope_condition_number(&unit_box()).unwrap(), 1.0);
        let seg = Polytope::from_params(&example1(0.0), false);
        assert!((polytope_condition_number(&seg).unwrap() - GOLDEN).abs() < 1e-9);
        let pt = Polytope::new(Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap(), vec![0.0, 0.0]).unwrap();
        assert_eq!(polytope_condition_number(&pt).unwrap(), 1.0);
        let half = Polytope::new(Matrix::from_rows(&[vec![1.0]]).unwrap(), vec![0.0]).unwrap();
        assert!(polytope_condition_number(&half).is_err());
    }

    #[test]
    fn normalized_rows_have_norm_sqrt_d() {
        let n = normalize_rows(&Polytope::from_params(&example1(0.0), false)).unwrap();
        for r in n.m.row_norms() {
            assert!((r - 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn violation_and_distance() {
        let b = unit_box();
        assert_eq!(l1_violation(&b, &[0.5, 0.5]), 0.0);
        assert_eq!(l1_violation(&b, &[2.0, 0.0]), 1.0);
        assert_eq!(distance_to_polytope(&b, &[0.2, 0.3]).unwrap(), (0.0, vec![0.2, 0.3]));
        let (dist, proj) = distance_to_polytope(&b, &[2.0, 0.0]).unwrap();
        assert!((dist - 1.0).abs() < 1e-12 && (proj[0] - 1.0).abs() < 1e-12 && proj[1].abs() < 1e-12);
        let seg = Polytope::from_params(&example1(0.0), false);
        let (dist, proj) = distance_to_polytope(&seg, &[0.0, 1.0]).unwrap();
        assert!((dist - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((proj[0] - 0.5).abs() < 1e-12 && (proj[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn a1_verdicts() {
        assert_eq!(check_a1(&example1(0.0), &[0.7; 4]).unwrap().verdict, A1Verdict::Holds);
        let r = check_a1(&example1(-0.05), &[0.7; 4]).unwrap();
        assert_eq!(r.verdict, A1Verdict::Fails);
        assert!((r.margin.unwrap() - (0.7 - 20.0)).abs() < 1e-6);
        assert_eq!(check_a1(&example1(-0.05), &[f64::INFINITY; 4]).unwrap().verdict, A1Verdict::Holds);
        assert_eq!(check_a1(&example1(-0.05), &[25.0; 4]).unwrap().verdict, A1Verdict::Holds);
    }
}
