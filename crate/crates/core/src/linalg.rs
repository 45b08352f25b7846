//! Small dense linear algebra: rank, orthonormal nullspaces, minimum-norm
//! least squares and a cyclic Jacobi eigensolver for symmetric matrices.
//!
//! Everything here targets matrices of at most a few dozen rows and
//! columns; no blocking or sparsity.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Default tolerance for rank and nullspace decisions.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let c = rows.first().map_or(0, Vec::len);
        Self::from_rows_with_cols(rows, c)
    }

    /// Like [`Mat::from_rows`] but keeps the column count when `rows` is
    /// empty.
    pub fn from_rows_with_cols(rows: &[Vec<f64>], cols: usize) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_cols(cols: &[Vec<f64>], rows: usize) -> Self {
        let mut m = Mat::zeros(rows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), rows, "ragged columns");
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row_vecs(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `x^T A x` for square `A`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Mat, s: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// `(A + A^T) / 2`.
    pub fn symmetrized(&self) -> Mat {
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Complete-pivoting Gaussian elimination. Returns the reduced row echelon
/// form (with columns in their original order), the pivot columns and the
/// rank.
fn rref(a: &Mat, tol: f64) -> (Mat, Vec<usize>) {
    let mut m = a.clone();
    let (rows, cols) = (m.rows, m.cols);
    let mut pivots = Vec::new();
    let mut free: Vec<bool> = vec![true; cols];
    let mut scale = 0.0f64;
    let mut r = 0;
    while r < rows {
        // Largest remaining entry over unused rows and unused columns.
        let mut best = (0.0, 0, 0);
        for i in r..rows {
            for j in 0..cols {
                if free[j] && m[(i, j)].abs() > best.0 {
                    best = (m[(i, j)].abs(), i, j);
                }
            }
        }
        if r == 0 {
            scale = best.0;
        }
        if best.0 <= tol * scale.max(1.0) {
            break;
        }
        let (_, pi, pj) = best;
        if pi != r {
            for j in 0..cols {
                m.data.swap(pi * cols + j, r * cols + j);
            }
        }
        let p = m[(r, pj)];
        for j in 0..cols {
            m[(r, j)] /= p;
        }
        for i in 0..rows {
            if i != r {
                let f = m[(i, pj)];
                if f != 0.0 {
                    for j in 0..cols {
                        m[(i, j)] -= f * m[(r, j)];
                    }
                }
            }
        }
        free[pj] = false;
        pivots.push(pj);
        r += 1;
    }
    (m, pivots)
}

/// Indices of a maximal linearly independent subset of the rows of `a`.
pub fn independent_rows(a: &Mat, tol: f64) -> Vec<usize> {
    let mut rows = rref(&a.transpose(), tol).1;
    rows.sort_unstable();
    rows
}

/// Numerical rank: pivots above `tol * max(1, largest pivot)` under
/// complete pivoting.
pub fn rank(a: &Mat, tol: f64) -> usize {
    rref(a, tol).1.len()
}

/// Orthonormal basis (as columns, `cols(a) × k`) of `{w : a w = 0}`.
pub fn nullspace(a: &Mat, tol: f64) -> Mat {
    let n = a.cols;
    if a.rows == 0 {
        return Mat::identity(n);
    }
    let (r, pivots) = rref(a, tol);
    let mut basis = Vec::new();
    for f in (0..n).filter(|j| !pivots.contains(j)) {
        let mut v = vec![0.0; n];
        v[f] = 1.0;
        for (row, &p) in pivots.iter().enumerate() {
            v[p] = -r[(row, f)];
        }
        basis.push(v);
    }
    let basis = orthonormalize(basis);
    Mat::from_cols(&basis, n)
}

/// Modified Gram-Schmidt, applied twice for stability. Vectors that become
/// negligible are dropped.
pub fn orthonormalize(vectors: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for mut v in vectors {
        let start = norm2(&v);
        if start == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let nv = norm2(&v);
        if nv > 1e-10 * start {
            out.push(v.iter().map(|x| x / nv).collect());
        }
    }
    out
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// (column `k` of `vectors` belongs to `values[k]`).
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl SymEigen {
    pub fn min(&self) -> Option<f64> {
        self.values.first().copied()
    }
}

/// Cyclic Jacobi eigendecomposition of `(h + h^T)/2`.
pub fn sym_eigs(h: &Mat) -> Result<SymEigen, LinalgError> {
    if h.rows != h.cols {
        return Err(LinalgError::NotSquare {
            rows: h.rows,
            cols: h.cols,
        });
    }
    let n = h.rows;
    let mut a = h.symmetrized();
    let mut v = Mat::identity(n);
    let target = 1e-12 * a.frobenius();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= target * 1e-3 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, k)] = v[(r, i)];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Minimum-norm least-squares solution of `a x = b` and its residual
/// `b - a x`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub rank: usize,
}

impl LeastSquares {
    pub fn residual_norm(&self) -> f64 {
        norm2(&self.residual)
    }
}

/// Minimum-norm least squares. The solution is sought in the row space of
/// `a` (orthonormal basis `R`), where `a R` has full column rank and is
/// solved by a Gram-Schmidt QR.
pub fn solve(a: &Mat, b: &[f64], tol: f64) -> LeastSquares {
    assert_eq!(a.rows, b.len(), "solve dimension mismatch");
    let n = a.cols;
    // Orthonormal basis of the row space, selected with the rank tolerance.
    let (_, pivots) = rref(&a.transpose(), tol);
    let rank = pivots.len();
    let rows: Vec<Vec<f64>> = pivots.iter().map(|&i| a.row(i).to_vec()).collect();
    let basis = orthonormalize(rows);
    let k = basis.len();
    if k == 0 {
        return LeastSquares {
            x: vec![0.0; n],
            residual: b.to_vec(),
            rank: 0,
        };
    }
    let r_mat = Mat::from_cols(&basis, n);
    let ar = a.matmul(&r_mat);
    // QR of ar (m x k) by modified Gram-Schmidt.
    let mut q_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut t = Mat::zeros(k, k);
    for j in 0..k {
        let mut v = ar.col(j);
        for (i, q) in q_cols.iter().enumerate() {
            let c = dot(q, &v);
            t[(i, j)] = c;
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
        let nv = norm2(&v);
        t[(j, j)] = nv;
        let q = if nv > 0.0 {
            v.iter().map(|x| x / nv).collect()
        } else {
            vec![0.0; v.len()]
        };
        q_cols.push(q);
    }
    let qtb: Vec<f64> = q_cols.iter().map(|q| dot(q, b)).collect();
    let mut c = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = qtb[i];
        for j in i + 1..k {
            s -= t[(i, j)] * c[j];
        }
        c[i] = if t[(i, i)].abs() > 0.0 { s / t[(i, i)] } else { 0.0 };
    }
    let x = r_mat.matvec(&c);
    let ax = a.matvec(&x);
    let residual = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    LeastSquares { x, residual, rank }
}

/// `Z^T H Z`, symmetrized.
pub fn reduced_hessian(h: &Mat, z: &Mat) -> Result<Mat, LinalgError> {
    if h.rows != h.cols || z.rows != h.rows {
        return Err(LinalgError::DimensionMismatch(format!(
            "H is {}x{}, Z is {}x{}",
            h.rows, h.cols, z.rows, z.cols
        )));
    }
    Ok(z.transpose().matmul(h).matmul(z).symmetrized())
}

/// Smallest eigenvalue of `Z^T H Z` together with the corresponding unit
/// vector mapped back through `Z`. `None` when `Z` has no columns.
pub fn min_reduced_eig(h: &Mat, z: &Mat) -> Option<(f64, Vec<f64>)> {
    if z.cols == 0 {
        return None;
    }
    let red = reduced_hessian(h, z).ok()?;
    let eig = sym_eigs(&red).ok()?;
    let y = eig.vectors.col(0);
    Some((eig.values[0], z.matvec(&y)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Mat {
        Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&m(&[&[1.0, -1.0], &[-1.0, 1.0]]), RANK_TOL), 1);
        assert_eq!(rank(&Mat::identity(3), RANK_TOL), 3);
        assert_eq!(rank(&Mat::zeros(2, 3), RANK_TOL), 0);
    }

    #[test]
    fn nullspace_of_dependent_rows() {
        let z = nullspace(&m(&[&[1.0, -1.0], &[-1.0, 1.0]]), RANK_TOL);
        assert_eq!(z.cols(), 1);
        let c = z.col(0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c[0].abs() - s).abs() < 1e-12 && (c[0] - c[1]).abs() < 1e-12);
    }

    #[test]
    fn nullspace_of_single_row() {
        let z = nullspace(&m(&[&[1.0, 0.0]]), RANK_TOL);
        assert_eq!(z.cols(), 1);
        assert!(z[(0, 0)].abs() < 1e-15 && (z[(1, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nullspace_of_empty_rows_is_identity() {
        let z = nullspace(&Mat::zeros(0, 3), RANK_TOL);
        assert_eq!(z, Mat::identity(3));
    }

    #[test]
    fn eigen_examples() {
        let e = sym_eigs(&m(&[&[0.0, 1.0], &[1.0, 2.0]])).unwrap();
        let r2 = 2f64.sqrt();
        assert!((e.values[0] - (1.0 - r2)).abs() < 1e-12);
        assert!((e.values[1] - (1.0 + r2)).abs() < 1e-12);

        let e = sym_eigs(&Mat::identity(2).scaled(2.0)).unwrap();
        assert_eq!(e.values, vec![2.0, 2.0]);

        let e = sym_eigs(&Mat::diag(&[3.0, -1.0])).unwrap();
        assert_eq!(e.values, vec![-1.0, 3.0]);

        assert!(matches!(
            sym_eigs(&Mat::zeros(2, 3)),
            Err(LinalgError::NotSquare { .. })
        ));
    }

    #[test]
    fn least_squares_examples() {
        let ls = solve(&Mat::identity(3), &[1.0, 2.0, 3.0], RANK_TOL);
        assert!(ls.x.iter().zip([1.0, 2.0, 3.0]).all(|(a, b)| (a - b).abs() < 1e-14));

        let a = m(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        let ls = solve(&a, &[1.0, -1.0], RANK_TOL);
        assert!((ls.x[0] - 0.5).abs() < 1e-12 && (ls.x[1] + 0.5).abs() < 1e-12);
        assert!(ls.residual_norm() < 1e-12);

        let ls = solve(&a, &[1.0, 1.0], RANK_TOL);
        assert!((ls.residual_norm() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn reduced_hessian_examples() {
        let h = m(&[&[0.0, 1.0], &[1.0, 2.0]]);
        let z = Mat::from_cols(&[vec![0.0, 1.0]], 2);
        assert_eq!(reduced_hessian(&h, &z).unwrap(), m(&[&[2.0]]));

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = Mat::from_cols(&[vec![s, s]], 2);
        let r = reduced_hessian(&Mat::identity(2).scaled(2.0), &z).unwrap();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-15);

        let r = reduced_hessian(&h, &Mat::zeros(2, 0)).unwrap();
        assert_eq!((r.rows(), r.cols()), (0, 0));
        assert!(min_reduced_eig(&h, &Mat::zeros(2, 0)).is_none());

        assert!(reduced_hessian(&h, &Mat::zeros(3, 1)).is_err());
    }
}
