//! Sparse SPD storage and solvers, and the dense generalized symmetric eigenproblem.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Compressed sparse row matrix. Built from triplets with duplicates summed.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[r]..self.indptr[r + 1];
        self.indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| self.row(r).find(|&(c, _)| c == r).map_or(0.0, |(_, v)| v))
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `self · x` for a dense block of columns.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, x.ncols());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                for k in 0..x.ncols() {
                    out[(r, k)] += v * x[(c, k)];
                }
            }
        }
        out
    }

    /// Rows `rows` and columns `cols` (in the given orders) as a new matrix.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_slot = vec![usize::MAX; self.ncols];
        for (j, &c) in cols.iter().enumerate() {
            col_slot[c] = j;
        }
        let mut t = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if col_slot[c] != usize::MAX {
                    t.push((i, col_slot[c], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), t)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let t = self.transpose();
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        (0..self.nrows).all(|r| {
            let a: Vec<_> = self.row(r).filter(|(_, v)| *v != 0.0).collect();
            let b: Vec<_> = t.row(r).filter(|(_, v)| *v != 0.0).collect();
            a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() <= tol * scale)
        })
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                t.push((c, r, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }
}

/// Sparse Cholesky factorization of an SPD matrix.
pub struct SpdFactor {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl std::fmt::Debug for SpdFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdFactor").field("n", &self.n).finish()
    }
}

impl SpdFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows;
        let mut t = Vec::with_capacity(a.nnz());
        for r in 0..n {
            for (c, v) in a.row(r) {
                t.push(Triplet::new(r, c, v));
            }
        }
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
            .map_err(|e| Error::SingularSystem(format!("sparse matrix construction failed: {e:?}")))?;
        let llt = m.sp_cholesky(Side::Lower).map_err(|_| Error::NotSpd)?;
        Ok(Self { n, llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let rhs = Mat::<f64>::from_fn(self.n, b.ncols(), |i, j| b[(i, j)]);
        let x = self.llt.solve(&rhs);
        DMatrix::from_fn(self.n, b.ncols(), |i, j| x[(i, j)])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterativeReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, IterativeReport)> {
    let n = a.nrows;
    let diag = a.diagonal();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::NotSpd);
    }
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, IterativeReport { iterations: 0, relative_residual: 0.0 }));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut res = 1.0;
    for it in 1..=max_iter {
        let ap = a.mul_vec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::NotSpd);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        if res <= tol {
            return Ok((x, IterativeReport { iterations: it, relative_residual: res }));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: res })
}

/// Eigenvalues (ascending) of `A x = λ B x` for symmetric `A` and symmetric positive
/// semidefinite `B`. When `deflate` is given, both forms are restricted to the
/// Euclidean complement of that vector (a common null vector).
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>, deflate: Option<&DVector<f64>>) -> Result<Vec<f64>> {
    let (a, b) = match deflate {
        Some(k) => {
            let q = complement_basis(k);
            (q.transpose() * a * &q, q.transpose() * b * &q)
        }
        None => (a.clone(), b.clone()),
    };
    let b = 0.5 * (&b + b.transpose());
    let l = b.cholesky().ok_or(Error::NotSpd)?.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))
        .ok_or(Error::NotSpd)?;
    let c = &linv * a * linv.transpose();
    let c = 0.5 * (&c + c.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(ev)
}

/// Orthonormal basis (as columns) of the orthogonal complement of `k`.
pub fn complement_basis(k: &DVector<f64>) -> DMatrix<f64> {
    let n = k.len();
    // Householder reflector mapping k/|k| to e_0; its remaining columns span k^⊥
    let u = k / k.norm();
    let mut v = u.clone();
    let s = if u[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += s;
    let vn2 = v.norm_squared();
    let h = DMatrix::identity(n, n) - (2.0 / vn2) * &v * v.transpose();
    h.columns(1, n - 1).into_owned()
}
