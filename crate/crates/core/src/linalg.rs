//! Small dense matrices and the solves needed for diffusion scores.

use std::ops::{Index, IndexMut};

use serde::ser::{Serialize, SerializeSeq, Serializer};

use crate::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Real> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, S::zero())
    }

    pub fn filled(rows: usize, cols: usize, value: S) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has wrong length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<S> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn trace(&self) -> S {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, x| m.max(x.abs()))
    }

    pub fn is_symmetric(&self, tol: S) -> bool {
        self.rows == self.cols && (0..self.rows).all(|r| (0..r).all(|c| (self[(r, c)] - self[(c, r)]).abs() <= tol))
    }

    /// Copies a block `[r0.., c0..]` of the given shape.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        let mut b = Self::zeros(rows, cols);
        for r in 0..rows {
            b.row_mut(r).copy_from_slice(&self.row(r0 + r)[c0..c0 + cols]);
        }
        b
    }

    /// Concatenates matrices with equal row counts left to right.
    pub fn hstack(parts: &[&Self]) -> Self {
        let rows = parts.first().map_or(0, |m| m.rows);
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut out = Self::zeros(rows, cols);
        for r in 0..rows {
            let mut c0 = 0;
            for p in parts {
                assert_eq!(p.rows, rows, "hstack row mismatch");
                out.row_mut(r)[c0..c0 + p.cols].copy_from_slice(p.row(r));
                c0 += p.cols;
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == S::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// Eigenvalues of a symmetric matrix (cyclic Jacobi rotations).
    pub fn symmetric_eigenvalues(&self) -> Vec<S> {
        assert_eq!(self.rows, self.cols, "eigenvalues need a square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let two = S::lit(2.0);
        for _sweep in 0..100 {
            let off: S = (0..n)
                .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
                .map(|(r, c)| a[(r, c)] * a[(r, c)])
                .sum();
            if off <= S::epsilon() * S::epsilon() * a.data.iter().map(|x| *x * *x).sum::<S>() {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == S::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                    let c = S::one() / (t * t + S::one()).sqrt();
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
                }
            }
        }
        (0..n).map(|i| a[(i, i)]).collect()
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &S {
        &self.data[r * self.cols + c]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut S {
        &mut self.data[r * self.cols + c]
    }
}

impl<S: Serialize> Serialize for Matrix<S> {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> Result<Z::Ok, Z::Error> {
        let mut seq = serializer.serialize_seq(Some(self.rows))?;
        if self.cols > 0 {
            for row in self.data.chunks(self.cols) {
                seq.serialize_element(row)?;
            }
        } else {
            for _ in 0..self.rows {
                seq.serialize_element::<[S]>(&[])?;
            }
        }
        seq.end()
    }
}

/// LU factorisation with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu<S> {
    lu: Matrix<S>,
    perm: Vec<usize>,
}

impl<S: Real> Lu<S> {
    /// Returns `None` when a pivot is exactly zero.
    pub fn new(a: &Matrix<S>) -> Option<Self> {
        assert_eq!(a.rows(), a.cols(), "LU needs a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| {
                    lu[(i, k)]
                        .abs()
                        .partial_cmp(&lu[(j, k)].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(k);
            if lu[(p, k)] == S::zero() || !lu[(p, k)].is_finite() {
                return None;
            }
            if p != k {
                for c in 0..n {
                    let tmp = lu[(k, c)];
                    lu[(k, c)] = lu[(p, c)];
                    lu[(p, c)] = tmp;
                }
                perm.swap(k, p);
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = f;
                for c in k + 1..n {
                    let v = lu[(k, c)];
                    lu[(i, c)] -= f * v;
                }
            }
        }
        Some(Self { lu, perm })
    }

    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.lu.rows();
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let v = x[k];
                x[i] -= self.lu[(i, k)] * v;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let v = x[k];
                x[i] -= self.lu[(i, k)] * v;
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix<S> {
        let n = self.lu.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![S::zero(); n];
        for c in 0..n {
            e.iter_mut().for_each(|x| *x = S::zero());
            e[c] = S::one();
            let col = self.solve(&e);
            for r in 0..n {
                inv[(r, c)] = col[r];
            }
        }
        inv
    }
}

/// Induced 1-norm (max column sum).
pub fn norm1<S: Real>(a: &Matrix<S>) -> S {
    (0..a.cols())
        .map(|c| (0..a.rows()).map(|r| a[(r, c)].abs()).sum::<S>())
        .fold(S::zero(), S::max)
}

/// Outcome of solving `A X = B` column by column.
#[derive(Debug, Clone)]
pub struct Solve<S> {
    pub solution: Matrix<S>,
    /// 1-norm condition number of `A` (square) or of the normal matrix.
    pub condition: S,
    /// Largest column residual norm `‖A x − b‖₂`.
    pub residual: S,
}

/// Solves `A X = B`: exact solve for square `A`, minimum-norm least squares
/// otherwise. Returns `None` if the (normal) matrix is singular.
pub fn solve_columns<S: Real>(a: &Matrix<S>, b: &Matrix<S>) -> Option<Solve<S>> {
    assert_eq!(a.rows(), b.rows(), "solve shape mismatch");
    let (n, d) = (a.rows(), a.cols());
    let solution = if n == d {
        let lu = Lu::new(a)?;
        let cond = norm1(a) * norm1(&lu.inverse());
        let mut x = Matrix::zeros(d, b.cols());
        for c in 0..b.cols() {
            let col = lu.solve(&b.column(c));
            for r in 0..d {
                x[(r, c)] = col[r];
            }
        }
        return Some(Solve {
            residual: residual(a, &x, b),
            solution: x,
            condition: cond,
        });
    } else if n > d {
        // overdetermined: x = (AᵀA)⁻¹ Aᵀ b
        let at = a.transpose();
        let normal = at.matmul(a);
        let lu = Lu::new(&normal)?;
        let cond = norm1(&normal) * norm1(&lu.inverse());
        let rhs = at.matmul(b);
        let mut x = Matrix::zeros(d, b.cols());
        for c in 0..b.cols() {
            let col = lu.solve(&rhs.column(c));
            for r in 0..d {
                x[(r, c)] = col[r];
            }
        }
        (x, cond)
    } else {
        // underdetermined: x = Aᵀ (AAᵀ)⁻¹ b
        let at = a.transpose();
        let normal = a.matmul(&at);
        let lu = Lu::new(&normal)?;
        let cond = norm1(&normal) * norm1(&lu.inverse());
        let mut y = Matrix::zeros(n, b.cols());
        for c in 0..b.cols() {
            let col = lu.solve(&b.column(c));
            for r in 0..n {
                y[(r, c)] = col[r];
            }
        }
        (at.matmul(&y), cond)
    };
    let (x, cond) = solution;
    Some(Solve {
        residual: residual(a, &x, b),
        solution: x,
        condition: cond,
    })
}

fn residual<S: Real>(a: &Matrix<S>, x: &Matrix<S>, b: &Matrix<S>) -> S {
    let ax = a.matmul(x);
    (0..b.cols())
        .map(|c| {
            (0..b.rows())
                .map(|r| {
                    let e = ax[(r, c)] - b[(r, c)];
                    e * e
                })
                .sum::<S>()
                .sqrt()
        })
        .fold(S::zero(), S::max)
}
