//! Scaled monomial bases on polygons and their orthonormalization.

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::num::Real;

use super::rules::QuadratureRule;

/// Degree from which [`PolyBasis::for_cell`] switches to the orthonormalized kind.
pub const ORTHONORMAL_FROM_DEGREE: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisKind {
    ScaledMonomial,
    Orthonormalized,
}

/// Dimension of the bivariate polynomials of total degree `<= p`.
#[inline]
pub fn dim_p(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Dimension of `P_{p-2}`; zero when `p < 2`.
#[inline]
pub fn dim_moments(p: usize) -> usize {
    if p < 2 {
        0
    } else {
        dim_p(p - 2)
    }
}

/// Exponents `(a, b)` ordered by total degree, then `(d,0), (d-1,1), …, (0,d)`.
pub fn exponents(p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim_p(p));
    for d in 0..=p {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

#[inline]
pub fn exponent_index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

/// Polynomial basis of `P_p` on one cell.
///
/// The functions are `q_i = Σ_j R_ij m_j` with `m_j((x - x_E)/h_E)` the scaled
/// monomials; `R` is lower triangular (identity for the monomial kind), so the
/// first `dim_p(k)` functions always span `P_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyBasis<T: Real> {
    pub cell: usize,
    pub center: Point2<T>,
    pub h: T,
    pub degree: usize,
    pub kind: BasisKind,
    exps: Vec<(usize, usize)>,
    /// Row-major `dim × dim` change of basis; `None` for plain monomials.
    change: Option<Vec<T>>,
}

impl<T: Real> PolyBasis<T> {
    pub fn scaled_monomials(cell: usize, center: Point2<T>, h: T, degree: usize) -> Self {
        Self {
            cell,
            center,
            h,
            degree,
            kind: BasisKind::ScaledMonomial,
            exps: exponents(degree),
            change: None,
        }
    }

    /// Basis with the default kind for `degree`: monomials below
    /// [`ORTHONORMAL_FROM_DEGREE`], orthonormalized against `rule` from there on.
    pub fn for_cell(
        cell: usize,
        center: Point2<T>,
        h: T,
        degree: usize,
        rule: &QuadratureRule<T>,
    ) -> Result<Self> {
        let b = Self::scaled_monomials(cell, center, h, degree);
        if degree >= ORTHONORMAL_FROM_DEGREE {
            b.orthonormalize(rule)
        } else {
            Ok(b)
        }
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exps
    }

    /// Change-of-basis matrix `R` (row-major), identity for monomials.
    pub fn change_of_basis(&self) -> Vec<T> {
        match &self.change {
            Some(r) => r.clone(),
            None => identity(self.dim()),
        }
    }

    #[inline]
    fn local(&self, x: Point2<T>) -> (T, T) {
        ((x.x - self.center.x) / self.h, (x.y - self.center.y) / self.h)
    }

    pub fn eval_monomials(&self, x: Point2<T>) -> Vec<T> {
        let (xi, eta) = self.local(x);
        let px = powers(xi, self.degree);
        let py = powers(eta, self.degree);
        self.exps.iter().map(|&(a, b)| px[a] * py[b]).collect()
    }

    pub fn grad_monomials(&self, x: Point2<T>) -> Vec<[T; 2]> {
        let (xi, eta) = self.local(x);
        let px = powers(xi, self.degree);
        let py = powers(eta, self.degree);
        let inv_h = T::one() / self.h;
        self.exps
            .iter()
            .map(|&(a, b)| {
                let gx = if a == 0 { T::zero() } else { T::from_usize_lossy(a) * px[a - 1] * py[b] };
                let gy = if b == 0 { T::zero() } else { T::from_usize_lossy(b) * px[a] * py[b - 1] };
                [gx * inv_h, gy * inv_h]
            })
            .collect()
    }

    pub fn eval(&self, x: Point2<T>) -> Vec<T> {
        self.apply(self.eval_monomials(x))
    }

    pub fn grad(&self, x: Point2<T>) -> Vec<[T; 2]> {
        let g = self.grad_monomials(x);
        match &self.change {
            None => g,
            Some(r) => {
                let n = self.dim();
                (0..n)
                    .map(|i| {
                        let mut acc = [T::zero(), T::zero()];
                        for j in 0..=i {
                            let rij = r[i * n + j];
                            acc[0] = acc[0] + rij * g[j][0];
                            acc[1] = acc[1] + rij * g[j][1];
                        }
                        acc
                    })
                    .collect()
            }
        }
    }

    /// Evaluates the polynomial with coefficients `coef` in this basis.
    pub fn eval_poly(&self, coef: &[T], x: Point2<T>) -> T {
        self.eval(x).iter().zip(coef).fold(T::zero(), |a, (&v, &c)| a + v * c)
    }

    pub fn grad_poly(&self, coef: &[T], x: Point2<T>) -> [T; 2] {
        self.grad(x).iter().zip(coef).fold([T::zero(), T::zero()], |a, (g, &c)| {
            [a[0] + g[0] * c, a[1] + g[1] * c]
        })
    }

    fn apply(&self, m: Vec<T>) -> Vec<T> {
        match &self.change {
            None => m,
            Some(r) => {
                let n = self.dim();
                (0..n)
                    .map(|i| (0..=i).fold(T::zero(), |acc, j| acc + r[i * n + j] * m[j]))
                    .collect()
            }
        }
    }

    /// Laplacian of every basis function expressed in the first
    /// `dim_moments(degree)` functions of this basis (which span `P_{degree-2}`).
    ///
    /// Row-major `dim × dim_moments(degree)`.
    pub fn laplacian_coefficients(&self) -> Vec<T> {
        let n = self.dim();
        let nm = dim_moments(self.degree);
        if nm == 0 {
            return Vec::new();
        }
        let h2 = self.h * self.h;
        // Δ m_(a,b) = [a(a-1) m_(a-2,b) + b(b-1) m_(a,b-2)] / h²
        let mut dm = vec![T::zero(); n * nm];
        for (j, &(a, b)) in self.exps.iter().enumerate() {
            if a >= 2 {
                dm[j * nm + exponent_index(a - 2, b)] = T::from_usize_lossy(a * (a - 1)) / h2;
            }
            if b >= 2 {
                dm[j * nm + exponent_index(a, b - 2)] = T::from_usize_lossy(b * (b - 1)) / h2;
            }
        }
        match &self.change {
            None => dm,
            Some(r) => {
                // coefficients in monomials: R · Dm; then m_sub = R_sub^{-1} q_sub
                let mut rd = vec![T::zero(); n * nm];
                for i in 0..n {
                    for k in 0..nm {
                        let mut acc = T::zero();
                        for j in 0..=i {
                            acc = acc + r[i * n + j] * dm[j * nm + k];
                        }
                        rd[i * nm + k] = acc;
                    }
                }
                let mut rsub = vec![T::zero(); nm * nm];
                for i in 0..nm {
                    for j in 0..nm {
                        rsub[i * nm + j] = r[i * n + j];
                    }
                }
                let rsub_inv = lower_inverse(&rsub, nm);
                let mut out = vec![T::zero(); n * nm];
                for i in 0..n {
                    for l in 0..nm {
                        let mut acc = T::zero();
                        for k in l..nm {
                            acc = acc + rd[i * nm + k] * rsub_inv[k * nm + l];
                        }
                        out[i * nm + l] = acc;
                    }
                }
                out
            }
        }
    }

    /// Gram matrix `(1/|E|) ∫ q_i q_j` under `rule` (row-major).
    pub fn gram(&self, rule: &QuadratureRule<T>) -> Vec<T> {
        let n = self.dim();
        let area = rule.measure();
        let mut g = vec![T::zero(); n * n];
        for (x, w) in rule.iter() {
            let v = self.eval(x);
            let ww = w / area;
            for i in 0..n {
                let wi = ww * v[i];
                for j in 0..=i {
                    g[i * n + j] = g[i * n + j] + wi * v[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g[j * n + i] = g[i * n + j];
            }
        }
        g
    }

    /// Gram–Schmidt through two passes of Cholesky, orthonormal in the
    /// area-normalized `L²` product `(1/|E|) ∫ u v`.
    pub fn orthonormalize(&self, rule: &QuadratureRule<T>) -> Result<Self> {
        let n = self.dim();
        let mut r = self.change_of_basis();
        let mut out = self.clone();
        for _ in 0..2 {
            out.change = Some(r.clone());
            let g = out.gram(rule);
            let l = cholesky_lower(&g, n).ok_or(Error::IllConditioned {
                cell: self.cell,
                degree: self.degree,
            })?;
            let linv = lower_inverse(&l, n);
            r = lower_mul(&linv, &r, n);
        }
        out.change = Some(r);
        out.kind = BasisKind::Orthonormalized;
        Ok(out)
    }
}

fn powers<T: Real>(x: T, p: usize) -> Vec<T> {
    let mut v = Vec::with_capacity(p + 1);
    let mut acc = T::one();
    for _ in 0..=p {
        v.push(acc);
        acc = acc * x;
    }
    v
}

fn identity<T: Real>(n: usize) -> Vec<T> {
    let mut m = vec![T::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = T::one();
    }
    m
}

/// Dense Cholesky `A = L Lᵀ`; `None` when a pivot is not positive.
pub(crate) fn cholesky_lower<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - l[j * n + k] * l[j * n + k];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Some(l)
}

pub(crate) fn lower_inverse<T: Real>(l: &[T], n: usize) -> Vec<T> {
    let mut inv = vec![T::zero(); n * n];
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { T::one() } else { T::zero() };
            for k in col..i {
                s = s - l[i * n + k] * inv[k * n + col];
            }
            inv[i * n + col] = s / l[i * n + i];
        }
    }
    inv
}

fn lower_mul<T: Real>(a: &[T], b: &[T], n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = T::zero();
            for k in j..=i {
                s = s + a[i * n + k] * b[k * n + j];
            }
            c[i * n + j] = s;
        }
    }
    c
}
