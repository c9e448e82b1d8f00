//! Legendre polynomials and the Gauss / Gauss–Lobatto rules built on them.

use crate::num::Real;

/// Value and derivative of the Legendre polynomial `L_k` at `x`.
///
/// Three-term recurrence for the values; the derivative uses
/// `L'_{m+1} = L'_{m-1} + (2m+1) L_m`, which stays finite at `x = ±1`.
pub fn legendre_eval<T: Real>(k: usize, x: T) -> (T, T) {
    let all = legendre_table(k, x);
    all[k]
}

/// `(L_m(x), L'_m(x))` for `m = 0..=k`.
pub fn legendre_table<T: Real>(k: usize, x: T) -> Vec<(T, T)> {
    let mut out = Vec::with_capacity(k + 1);
    out.push((T::one(), T::zero()));
    if k == 0 {
        return out;
    }
    out.push((x, T::one()));
    for m in 1..k {
        let mf = T::from_usize_lossy(m);
        let (lm, _) = out[m];
        let (lm1, dlm1) = out[m - 1];
        let two_m1 = T::lit(2.0) * mf + T::one();
        let next = (two_m1 * x * lm - mf * lm1) / (mf + T::one());
        let dnext = dlm1 + two_m1 * lm;
        out.push((next, dnext));
    }
    out
}

/// One-dimensional rule on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule1d<T: Real> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    /// Polynomials up to this degree are integrated exactly.
    pub exactness: usize,
}

impl<T: Real> Rule1d<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * f(x))
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> (Vec<T>, Vec<T>) {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        let nodes = self.nodes.iter().map(|&x| mid + half * x).collect();
        let weights = self.weights.iter().map(|&w| w * half).collect();
        (nodes, weights)
    }
}

/// `n`-point Gauss–Legendre rule (exact up to degree `2n - 1`).
pub fn gauss_legendre<T: Real>(n: usize) -> Rule1d<T> {
    assert!(n >= 1, "Gauss rule needs at least one node");
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = T::from_usize_lossy(n);
    for i in 0..n.div_ceil(2) {
        let guess = (T::PI() * (T::from_usize_lossy(i) + T::lit(0.75)) / (nf + T::lit(0.5))).cos();
        let mut x = guess;
        for _ in 0..100 {
            let (l, dl) = legendre_eval(n, x);
            let dx = l / dl;
            x = x - dx;
            if dx.abs() <= T::kernel_tol() {
                break;
            }
        }
        let (_, dl) = legendre_eval(n, x);
        let w = T::lit(2.0) / ((T::one() - x * x) * dl * dl);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = T::zero();
    }
    Rule1d { nodes, weights, exactness: 2 * n - 1 }
}

/// Gauss rule with the fewest nodes that is exact up to `degree`.
pub fn gauss_for_degree<T: Real>(degree: usize) -> Rule1d<T> {
    gauss_legendre(degree / 2 + 1)
}

/// Gauss–Lobatto–Legendre rule with `p + 1` nodes on `[-1, 1]`.
///
/// Nodes are `±1` and the roots of `L'_p`, found by Newton iteration from the
/// Chebyshev–Gauss–Lobatto points; weights are `2 / (p (p+1) L_p(ξ)²)`.
pub fn gauss_lobatto_1d<T: Real>(p: usize) -> Rule1d<T> {
    assert!(p >= 1, "Gauss-Lobatto rule needs p >= 1");
    let pf = T::from_usize_lossy(p);
    let pp1 = pf * (pf + T::one());
    let mut nodes = Vec::with_capacity(p + 1);
    nodes.push(-T::one());
    for j in 1..p {
        let mut x = -(T::PI() * T::from_usize_lossy(j) / pf).cos();
        for _ in 0..100 {
            let (l, dl) = legendre_eval(p, x);
            // Legendre ODE: (1-x²) L'' = 2x L' - p(p+1) L
            let d2l = (T::lit(2.0) * x * dl - pp1 * l) / (T::one() - x * x);
            let dx = dl / d2l;
            x = x - dx;
            if dx.abs() <= T::kernel_tol() {
                break;
            }
        }
        nodes.push(x);
    }
    nodes.push(T::one());
    // symmetrize to remove Newton round-off asymmetry
    for j in 0..(p + 1) / 2 {
        let s = (nodes[p - j] - nodes[j]) * T::lit(0.5);
        nodes[j] = -s;
        nodes[p - j] = s;
    }
    if p % 2 == 0 {
        nodes[p / 2] = T::zero();
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (l, _) = legendre_eval(p, x);
            T::lit(2.0) / (pp1 * l * l)
        })
        .collect();
    Rule1d { nodes, weights, exactness: 2 * p - 1 }
}

/// Lagrange basis values at `t` for the given distinct nodes.
pub fn lagrange_values<T: Real>(nodes: &[T], t: T) -> Vec<T> {
    let n = nodes.len();
    (0..n)
        .map(|i| {
            let mut v = T::one();
            for j in 0..n {
                if j != i {
                    v = v * (t - nodes[j]) / (nodes[i] - nodes[j]);
                }
            }
            v
        })
        .collect()
}

/// Derivatives of the Lagrange basis at `t`.
pub fn lagrange_derivatives<T: Real>(nodes: &[T], t: T) -> Vec<T> {
    let n = nodes.len();
    (0..n)
        .map(|i| {
            let mut sum = T::zero();
            for k in 0..n {
                if k == i {
                    continue;
                }
                let mut prod = T::one() / (nodes[i] - nodes[k]);
                for j in 0..n {
                    if j != i && j != k {
                        prod = prod * (t - nodes[j]) / (nodes[i] - nodes[j]);
                    }
                }
                sum = sum + prod;
            }
            sum
        })
        .collect()
}
