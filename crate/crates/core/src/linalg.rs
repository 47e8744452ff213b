//! Dense linear algebra on small matrices.
//!
//! Everything here is sized for desk-scale problems (tens to a few hundred
//! rows). Singular values come from one-sided Jacobi rotations, which is the
//! Jacobi eigen-iteration on the Gram matrix carried out implicitly on the
//! columns; it keeps full absolute accuracy for tiny singular values, which
//! squaring into an explicit Gram matrix would not.

use crate::error::{dim_err, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Row-major constructor. Rejects length mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return dim_err(format!("{rows}x{cols} matrix needs {} entries, got {}", rows * cols, data.len()));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry ({}, {})", k / cols.max(1), k % cols.max(1))));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if let Some(i) = rows.iter().position(|x| x.len() != c) {
            return dim_err(format!("row {i} has {} entries, expected {c}", rows[i].len()));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn diag(v: &[f64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n, n);
        for (i, x) in v.iter().enumerate() {
            m.data[i * n + i] = *x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return dim_err(format!("cannot multiply {}x{} by {}x{}", self.rows, self.cols, other.rows, other.cols));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return dim_err(format!("matvec: {} columns vs vector of {}", self.cols, x.len()));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `self' * y`.
    pub fn tr_matvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return dim_err(format!("tr_matvec: {} rows vs vector of {}", self.rows, y.len()));
        }
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            if *yi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += yi * a;
            }
        }
        Ok(out)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    /// Stack `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return dim_err(format!("vstack: {} vs {} columns", self.cols, other.cols));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix { rows: self.rows + other.rows, cols: self.cols, data })
    }

    pub fn scale(&self, a: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| a * x).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Column-major vectorization, vec(M).
    pub fn vectorize(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                v.push(self.get(i, j));
            }
        }
        v
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows).map(|i| norm(self.row(i))).collect()
    }
}

/// Inverse of column-major vectorization: the q×d matrix whose vec is `x`.
///
/// Equivalent to `(vec(I_d)' ⊗ I_q)(I_d ⊗ x)`; see the tests for the literal
/// Kronecker evaluation.
pub fn inverse_vectorize(x: &[f64], q: usize, d: usize) -> Result<Matrix> {
    if x.len() != q * d {
        return dim_err(format!("inverse_vectorize: length {} != {q}*{d}", x.len()));
    }
    let mut m = Matrix::zeros(q, d);
    for j in 0..d {
        for i in 0..q {
            m.set(i, j, x[j * q + i]);
        }
    }
    Ok(m)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac, br, bc) = (a.rows, a.cols, b.rows, b.cols);
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a.get(i, j);
            if s == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out.set(i * br + k, j * bc + l, s * b.get(k, l));
                }
            }
        }
    }
    out
}

/// Kronecker product of two vectors.
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve a square system by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `rel_tol` times the largest entry.
pub fn lu_solve(a: &Matrix, b: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
    let n = a.rows;
    if a.cols != n || b.len() != n {
        return None;
    }
    let scale = a.max_abs();
    if scale == 0.0 {
        return None;
    }
    let mut m = a.data.clone();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let (p, pv) =
            (k..n).map(|i| (i, m[i * n + k].abs())).fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pv <= rel_tol * scale {
            return None;
        }
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            rhs.swap(k, p);
        }
        let piv = m[k * n + k];
        for i in k + 1..n {
            let f = m[i * n + k] / piv;
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                m[i * n + j] -= f * m[k * n + j];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i * n + j] * x[j]).sum();
        x[i] = (rhs[i] - s) / m[i * n + i];
    }
    Some(x)
}

/// Matrix inverse by Gauss-Jordan elimination with partial pivoting.
/// Returns `None` when a pivot falls below `rel_tol` times the largest entry.
pub fn inverse(a: &Matrix, rel_tol: f64) -> Option<Matrix> {
    let n = a.rows;
    if a.cols != n {
        return None;
    }
    let scale = a.max_abs();
    if scale == 0.0 {
        return None;
    }
    let mut m = a.data.clone();
    let mut inv = Matrix::identity(n).data;
    for k in 0..n {
        let (p, pv) =
            (k..n).map(|i| (i, m[i * n + k].abs())).fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pv <= rel_tol * scale {
            return None;
        }
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
                inv.swap(k * n + j, p * n + j);
            }
        }
        let piv = m[k * n + k];
        for j in 0..n {
            m[k * n + j] /= piv;
            inv[k * n + j] /= piv;
        }
        let (mk, ik) = (m[k * n..(k + 1) * n].to_vec(), inv[k * n..(k + 1) * n].to_vec());
        for i in 0..n {
            let f = m[i * n + k];
            if i == k || f == 0.0 {
                continue;
            }
            for j in 0..n {
                m[i * n + j] -= f * mk[j];
                inv[i * n + j] -= f * ik[j];
            }
        }
    }
    Some(Matrix { rows: n, cols: n, data: inv })
}

/// Singular values (descending) by one-sided Jacobi rotations.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    // Work on the orientation with at least as many rows as columns.
    let a = if m.rows >= m.cols { m.clone() } else { m.transpose() };
    let (r, c) = (a.rows, a.cols);
    let mut cols: Vec<Vec<f64>> = (0..c).map(|j| a.col(j)).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..c {
            for j in i + 1..c {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for k in 0..r {
                    let (x, y) = (cols[i][k], cols[j][k]);
                    cols[i][k] = cs * x - sn * y;
                    cols[j][k] = sn * x + cs * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|v| norm(v)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Smallest of the min(rows, cols) singular values.
pub fn smallest_singular_value(m: &Matrix) -> Result<f64> {
    if m.rows == 0 || m.cols == 0 {
        return dim_err("smallest_singular_value of an empty matrix");
    }
    Ok(singular_values(m).last().copied().unwrap_or(0.0))
}

/// Numerical rank: singular values above `rel_tol` times the largest.
pub fn rank(m: &Matrix, rel_tol: f64) -> usize {
    if m.rows == 0 || m.cols == 0 {
        return 0;
    }
    let sv = singular_values(m);
    let top = sv[0];
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * top).count()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (ascending) and the matrix whose columns are the
/// matching eigenvectors.
pub fn sym_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows;
    if a.cols != n {
        return dim_err("sym_eigen needs a square matrix");
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j).powi(2))
            .sum();
        if off <= 1e-30 * m.data.iter().map(|x| x * x).sum::<f64>().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m.get(k, p), m.get(k, q));
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let (mpk, mqk) = (m.get(p, k), m.get(q, k));
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).total_cmp(&m.get(j, j)));
    let vals = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vecs = Matrix::zeros(n, n);
    for (newj, &oldj) in order.iter().enumerate() {
        for k in 0..n {
            vecs.set(k, newj, v.get(k, oldj));
        }
    }
    Ok((vals, vecs))
}

/// Minimum-norm least-squares solution of `a x = b` (pseudoinverse).
pub fn pinv_solve(a: &Matrix, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    if b.len() != a.rows {
        return dim_err("pinv_solve: rhs length");
    }
    // x = V diag(1/λ) V' a'b over the non-negligible spectrum of a'a.
    let ata = a.transpose().matmul(a)?;
    let atb = a.tr_matvec(b)?;
    let (vals, vecs) = sym_eigen(&ata)?;
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = vec![0.0; a.cols];
    for (k, lam) in vals.iter().enumerate() {
        if *lam <= rel_tol * top || *lam <= 0.0 {
            continue;
        }
        let vk = vecs.col(k);
        let coef = dot(&vk, &atb) / lam;
        for (xi, vi) in x.iter_mut().zip(&vk) {
            *xi += coef * vi;
        }
    }
    Ok(x)
}

/// Symmetric square root factor `L` with `L L' = a` for a PSD matrix; small
/// negative eigenvalues (above `-tol·max|λ|`) are clipped to zero.
pub fn psd_factor(a: &Matrix, tol: f64) -> Result<Matrix> {
    let (vals, vecs) = sym_eigen(a)?;
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for (k, lam) in vals.iter().enumerate() {
        if *lam < -tol * top.max(1.0) {
            return Err(Error::NotPsd(format!("eigenvalue {lam:e}")));
        }
        let s = lam.max(0.0).sqrt();
        for i in 0..n {
            l.set(i, k, vecs.get(i, k) * s);
        }
    }
    Ok(l)
}

/// Orthonormal basis of the null space of `m`, as columns.
pub fn null_space(m: &Matrix, rel_tol: f64) -> Result<Vec<Vec<f64>>> {
    let d = m.cols;
    if m.rows == 0 {
        return Ok((0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                e
            })
            .collect());
    }
    let g = m.transpose().matmul(m)?;
    let (vals, vecs) = sym_eigen(&g)?;
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    Ok(vals.iter().enumerate().filter(|(_, v)| v.abs() <= rel_tol * top).map(|(k, _)| vecs.col(k)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_sigma_min() {
        assert_eq!(smallest_singular_value(&Matrix::identity(2)).unwrap(), 1.0);
    }

    #[test]
    fn golden_ratio_sigma_min() {
        let m = Matrix::from_rows(&[vec![-1.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let s = smallest_singular_value(&m).unwrap();
        assert!((s - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn rank_deficient_sigma_min_is_zero() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(smallest_singular_value(&m).unwrap() < 1e-14);
    }

    #[test]
    fn wide_matrix_uses_row_space() {
        let m = Matrix::from_rows(&[vec![3.0, 0.0, 0.0]]).unwrap();
        assert_eq!(smallest_singular_value(&m).unwrap(), 3.0);
    }

    #[test]
    fn inverse_vectorize_matches_kronecker_formula() {
        let (q, d) = (3, 2);
        let m = Matrix::from_rows(&[vec![1.5, -2.0], vec![0.25, 7.0], vec![-3.0, 0.5]]).unwrap();
        let x = m.vectorize();
        let vec_id = Matrix::new(1, d * d, Matrix::identity(d).vectorize()).unwrap();
        let left = kron(&vec_id, &Matrix::identity(q));
        let xcol = Matrix::new(q * d, 1, x.clone()).unwrap();
        let right = kron(&Matrix::identity(d), &xcol);
        assert_eq!(left.matmul(&right).unwrap(), m);
        assert_eq!(inverse_vectorize(&x, q, d).unwrap(), m);
    }

    #[test]
    fn inverse_vectorize_small_cases() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.vectorize(), vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(inverse_vectorize(&[1.0, 3.0, 2.0, 4.0], 2, 2).unwrap(), m);
        assert_eq!(inverse_vectorize(&[0.0; 6], 3, 2).unwrap(), Matrix::zeros(3, 2));
        assert!(inverse_vectorize(&[0.0; 5], 3, 2).is_err());
    }

    #[test]
    fn constructor_validates() {
        assert!(matches!(Matrix::new(2, 2, vec![0.0; 3]), Err(Error::DimensionMismatch(_))));
        assert!(matches!(Matrix::new(1, 1, vec![f64::NAN]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn lu_and_inverse() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = lu_solve(&a, &[3.0, 5.0], 1e-12).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        let inv = inverse(&a, 1e-12).unwrap();
        let prod = a.matmul(&inv).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((prod.get(i, j) - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        let s = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(lu_solve(&s, &[1.0, 1.0], 1e-12).is_none());
    }

    #[test]
    fn eigen_of_diagonal_and_rotation() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (vals, vecs) = sym_eigen(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let v0 = vecs.col(0);
        assert!((v0[0] + v0[1]).abs() < 1e-14);
    }

    #[test]
    fn pinv_gives_minimum_norm() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let x = pinv_solve(&a, &[2.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn null_space_of_line() {
        let a = Matrix::from_rows(&[vec![1.0, -1.0]]).unwrap();
        let ns = null_space(&a, 1e-10).unwrap();
        assert_eq!(ns.len(), 1);
        assert!((ns[0][0] - ns[0][1]).abs() < 1e-14);
    }
}
