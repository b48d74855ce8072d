//! Dense matrices and the small amount of numerical linear algebra the solver needs:
//! matrix-vector products, a power-iteration spectral norm, a cyclic Jacobi
//! eigensolver for symmetric matrices, and Gaussian elimination.
//!
//! Everything here is written for desk-scale problems (dimensions in the tens);
//! clarity wins over blocking and cache tricks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

/// Dense row-major matrix, also used as the linear operator between the two spaces
/// of a split problem (`apply` maps R^cols -> R^rows, `apply_adjoint` the reverse).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Validating constructor from row vectors: rectangular, nonempty, finite.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::DimensionMismatch("matrix must be at least 1x1".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("matrix rows have unequal lengths".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries".into()));
        }
        Ok(Self { rows: data.len() / cols, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        debug_assert!(rows >= 1 && cols >= 1);
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        debug_assert!(m.data.iter().all(|v| v.is_finite()));
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// A x, mapping R^cols into R^rows.
    pub fn apply(&self, x: &Point) -> Point {
        debug_assert_eq!(x.dim(), self.cols, "apply: dimension mismatch");
        Point::raw((0..self.rows).map(|i| dot(self.row(i), x.coords())).collect())
    }

    /// A^T u, mapping R^rows into R^cols. Adjoint of `apply` under the dot product.
    pub fn apply_adjoint(&self, u: &Point) -> Point {
        debug_assert_eq!(u.dim(), self.rows, "apply_adjoint: dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let ui = u[i];
            for (j, aij) in self.row(i).iter().enumerate() {
                out[j] += aij * ui;
            }
        }
        Point::raw(out)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// (M + M^T) / 2; square matrices only.
    pub fn symmetric_part(&self) -> Matrix {
        debug_assert_eq!(self.rows, self.cols);
        Matrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    /// A^T A, the Gram matrix (symmetric PSD).
    pub fn gram(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.cols, |i, j| {
            (0..self.rows).map(|k| self.get(k, i) * self.get(k, j)).sum()
        })
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        debug_assert!(self.rows == other.rows && self.cols == other.cols);
        Matrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        debug_assert!(self.rows == other.rows && self.cols == other.cols);
        Matrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| s * self.get(i, j))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Spectral-norm estimate from power iteration.
#[derive(Clone, Copy, Debug)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    /// False when `max_iter` ran out before the relative residual dropped below tol;
    /// `value` is still the best estimate seen.
    pub converged: bool,
}

/// Largest singular value of `a` by power iteration on A^T A.
///
/// Starts from the normalized all-ones vector so repeated calls are bit-identical;
/// if that start lies in the null space it restarts from coordinate vectors. The
/// returned estimate satisfies |value - ||A||_2| <= tol * ||A||_2 on convergence and
/// never exceeds the true norm beyond roundoff.
pub fn operator_norm(a: &Matrix, tol: f64, max_iter: usize) -> NormEstimate {
    assert!(tol > 0.0, "operator_norm: tol must be positive");
    let d = a.cols();
    if a.frobenius_norm() == 0.0 {
        return NormEstimate { value: 0.0, iterations: 0, converged: true };
    }

    let apply_gram = |v: &Point| a.apply_adjoint(&a.apply(v));

    // Deterministic start; fall back to basis vectors when ones is (numerically)
    // in the null space of A. Some basis vector always escapes since A != 0.
    let mut v = Point::raw(vec![1.0 / (d as f64).sqrt(); d]);
    let mut restart = 0;
    let mut bv = apply_gram(&v);
    while bv.norm() <= f64::MIN_POSITIVE && restart < d {
        let mut e = vec![0.0; d];
        e[restart] = 1.0;
        v = Point::raw(e);
        bv = apply_gram(&v);
        restart += 1;
    }

    let mut rho = v.dot(&bv); // Rayleigh quotient for A^T A, converges to ||A||^2
    for k in 1..=max_iter {
        let nbv = bv.norm();
        if nbv == 0.0 {
            return NormEstimate { value: 0.0, iterations: k, converged: true };
        }
        v = bv.scale(1.0 / nbv);
        bv = apply_gram(&v);
        rho = v.dot(&bv);
        let residual = (&bv - &v.scale(rho)).norm();
        if residual <= tol * rho.max(f64::MIN_POSITIVE) {
            return NormEstimate { value: rho.max(0.0).sqrt(), iterations: k, converged: true };
        }
    }
    NormEstimate { value: rho.max(0.0).sqrt(), iterations: max_iter, converged: false }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted ascending.
///
/// The input is symmetrized first, so tiny asymmetry from roundoff is harmless.
pub fn jacobi_eigenvalues(m: &Matrix) -> Vec<f64> {
    assert_eq!(m.rows(), m.cols(), "jacobi_eigenvalues: square input required");
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (m.get(i, j) + m.get(j, i))).collect())
        .collect();

    let off = |a: &Vec<Vec<f64>>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i][j] * a[i][j];
                }
            }
        }
        s.sqrt()
    };

    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        if off(&a) <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }

    let mut eigs: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

/// Solve A x = b by Gaussian elimination with partial pivoting. A must be square.
pub fn solve_dense(a: &Matrix, b: &Point) -> Result<Point> {
    let n = a.rows();
    if a.cols() != n || b.dim() != n {
        return Err(Error::DimensionMismatch("solve_dense: square system required".into()));
    }
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut rhs: Vec<f64> = b.coords().to_vec();
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pivot <= 1e-13 * scale {
            return Err(Error::SingularSystem(format!("pivot {pivot:.3e} at column {col}")));
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for r in (col + 1)..n {
            let factor = m[r][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                m[r][c] -= factor * m[col][c];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    for col in (0..n).rev() {
        let mut v = rhs[col];
        for c in (col + 1)..n {
            v -= m[col][c] * rhs[c];
        }
        rhs[col] = v / m[col][col];
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite solution".into()));
    }
    Ok(Point::raw(rhs))
}
