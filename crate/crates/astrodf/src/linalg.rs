//! Small dense linear algebra used by the interpolation machinery.
//!
//! Interpolation systems here are tiny (at most a few hundred unknowns for
//! quadratic models in d <= 20), so everything is written directly against
//! row-major `Vec<f64>` storage: Householder QR with column pivoting for the
//! solves and the poisedness condition estimate, cyclic Jacobi for symmetric
//! eigenvalues, and an exact ball-constrained quadratic minimizer built on the
//! eigendecomposition.

use alloc::vec;
use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Matrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.ncols, self.nrows, |i, j| self.get(j, i))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut out = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let mut acc = 0.0;
            for j in 0..self.ncols {
                acc += self.get(i, j) * x[j];
            }
            out[i] = acc;
        }
        out
    }

    /// x' A x for square symmetric-use cases.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Householder QR factorization with column pivoting, `A P = Q R`.
///
/// Column pivoting makes the diagonal of `R` non-increasing in magnitude, so
/// `|r_11| / |r_nn|` is a cheap order-of-magnitude estimate of the condition
/// number that is reliable for the rank decisions we need.
#[derive(Debug, Clone)]
pub struct QrFactorization {
    qr: Matrix,
    tau: Vec<f64>,
    perm: Vec<usize>,
    n: usize,
}

impl QrFactorization {
    pub fn new(a: &Matrix) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "QR solve expects a square matrix");
        let n = a.nrows();
        let mut qr = a.clone();
        let mut tau = vec![0.0; n];
        let mut perm: Vec<usize> = (0..n).collect();

        let mut col_norms: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| qr.get(i, j) * qr.get(i, j)).sum::<f64>())
            .collect();

        for k in 0..n {
            // Pivot: bring the column with the largest remaining norm to position k.
            let mut best = k;
            for j in (k + 1)..n {
                if col_norms[j] > col_norms[best] {
                    best = j;
                }
            }
            if best != k {
                for i in 0..n {
                    let t = qr.get(i, k);
                    qr.set(i, k, qr.get(i, best));
                    qr.set(i, best, t);
                }
                col_norms.swap(k, best);
                perm.swap(k, best);
            }

            // Householder reflector for column k.
            let mut alpha = 0.0;
            for i in k..n {
                alpha += qr.get(i, k) * qr.get(i, k);
            }
            let alpha = alpha.sqrt();
            if alpha == 0.0 {
                tau[k] = 0.0;
                continue;
            }
            let beta = if qr.get(k, k) >= 0.0 { -alpha } else { alpha };
            let v0 = qr.get(k, k) - beta;
            tau[k] = -v0 / beta;
            // Store v normalized so that v[k] = 1.
            for i in (k + 1)..n {
                qr.set(i, k, qr.get(i, k) / v0);
            }
            qr.set(k, k, beta);

            // Apply the reflector to the trailing columns.
            for j in (k + 1)..n {
                let mut s = qr.get(k, j);
                for i in (k + 1)..n {
                    s += qr.get(i, k) * qr.get(i, j);
                }
                s *= tau[k];
                qr.set(k, j, qr.get(k, j) - s);
                for i in (k + 1)..n {
                    qr.set(i, j, qr.get(i, j) - s * qr.get(i, k));
                }
            }
            for j in (k + 1)..n {
                let r = qr.get(k, j);
                col_norms[j] = (col_norms[j] - r * r).max(0.0);
            }
        }

        QrFactorization { qr, tau, perm, n }
    }

    /// `max |r_ii| / min |r_ii|`; `+inf` when a diagonal entry is exactly zero.
    pub fn condition_estimate(&self) -> f64 {
        let mut hi = 0.0f64;
        let mut lo = f64::INFINITY;
        for i in 0..self.n {
            let d = self.qr.get(i, i).abs();
            hi = hi.max(d);
            lo = lo.min(d);
        }
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    fn apply_q_transpose(&self, b: &mut [f64]) {
        for k in 0..self.n {
            if self.tau[k] == 0.0 {
                continue;
            }
            let mut s = b[k];
            for i in (k + 1)..self.n {
                s += self.qr.get(i, k) * b[i];
            }
            s *= self.tau[k];
            b[k] -= s;
            for i in (k + 1)..self.n {
                b[i] -= s * self.qr.get(i, k);
            }
        }
    }

    /// Solve `A x = b`. Returns `None` if `R` is numerically singular.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        assert_eq!(b.len(), self.n);
        let mut y = b.to_vec();
        self.apply_q_transpose(&mut y);
        // Back substitution R z = y.
        let mut z = vec![0.0; self.n];
        for i in (0..self.n).rev() {
            let mut s = y[i];
            for j in (i + 1)..self.n {
                s -= self.qr.get(i, j) * z[j];
            }
            let d = self.qr.get(i, i);
            if d == 0.0 || !d.is_finite() {
                return None;
            }
            z[i] = s / d;
        }
        // Undo the column permutation: x[perm[i]] = z[i].
        let mut x = vec![0.0; self.n];
        for i in 0..self.n {
            x[self.perm[i]] = z[i];
        }
        Some(x)
    }
}

/// Cholesky factorization `A = L L'`. Returns `None` when `A` is not
/// (numerically) positive definite.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l.set(i, i, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Some(l)
}

/// Solve `L L' x = b` given a Cholesky factor `L`.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l.get(i, j) * y[j];
        }
        y[i] = s / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in (i + 1)..n {
            s -= l.get(j, i) * x[j];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors in the columns,
/// unsorted. Intended for the small (d <= 20) Hessians used here.
pub fn sym_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    if n <= 1 {
        return ((0..n).map(|i| m.get(i, i)).collect(), v);
    }

    let off = |m: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m.get(i, j) * m.get(i, j);
                }
            }
        }
        s
    };
    let frob: f64 = (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j) * m.get(i, j)).sum::<f64>())
        .sum();
    let tol = 1e-28 * frob.max(f64::MIN_POSITIVE);

    for _sweep in 0..64 {
        if off(&m) <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    ((0..n).map(|i| m.get(i, i)).collect(), v)
}

/// Spectral norm (largest absolute eigenvalue) of a symmetric matrix.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let (eigs, _) = sym_eigen(a);
    eigs.iter().fold(0.0f64, |acc, e| acc.max(e.abs()))
}

/// Exact global minimizer of `q(s) = g's + 1/2 s'Hs` over `||s|| <= radius`,
/// for symmetric `H`. Returns `(q(s*), s*)`.
///
/// Solved through the eigendecomposition of `H` and the secular equation in
/// the Lagrange multiplier, including the hard case. `radius` must be > 0.
pub fn min_quadratic_on_ball(g: &[f64], h: &Matrix, radius: f64) -> (f64, Vec<f64>) {
    let n = g.len();
    assert!(radius > 0.0);
    assert_eq!(h.nrows(), n);
    if n == 0 {
        return (0.0, Vec::new());
    }

    let (eigs, vecs) = sym_eigen(h);
    // g in the eigenbasis.
    let mut gh = vec![0.0; n];
    for j in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            s += vecs.get(i, j) * g[i];
        }
        gh[j] = s;
    }
    let lam_min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);

    let s_from = |sh: &[f64]| -> Vec<f64> {
        let mut s = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += vecs.get(i, j) * sh[j];
            }
            s[i] = acc;
        }
        s
    };
    let value = |s: &[f64]| dot(g, s) + 0.5 * h.quadratic_form(s);

    // Interior solution when H is positive definite and the Newton point fits.
    if lam_min > 0.0 {
        let sh: Vec<f64> = (0..n).map(|i| -gh[i] / eigs[i]).collect();
        if norm2(&sh) <= radius {
            let s = s_from(&sh);
            return (value(&s), s);
        }
    }

    // Boundary solution: find sigma >= max(0, -lam_min) with ||s(sigma)|| = radius.
    let sigma_floor = (-lam_min).max(0.0);
    let norm_at = |sigma: f64| -> f64 {
        let mut s2 = 0.0;
        for i in 0..n {
            let d = eigs[i] + sigma;
            if d > 0.0 {
                let t = gh[i] / d;
                s2 += t * t;
            } else if gh[i] != 0.0 {
                return f64::INFINITY;
            }
        }
        s2.sqrt()
    };

    // Detect the hard case: even at the floor the attainable norm is short.
    let eps_gap = 1e-12 * (1.0 + sigma_floor);
    let norm_floor = norm_at(sigma_floor + eps_gap);
    if norm_floor < radius && lam_min <= 0.0 {
        // Hard case: pseudo-inverse step plus a null-direction component.
        let gap_tol = 1e-10 * (1.0 + lam_min.abs());
        let mut sh = vec![0.0; n];
        for i in 0..n {
            let d = eigs[i] - lam_min;
            sh[i] = if d > gap_tol { -gh[i] / d } else { 0.0 };
        }
        let fill = radius * radius - dot(&sh, &sh);
        if fill > 0.0 {
            let tau = fill.sqrt();
            for i in 0..n {
                if eigs[i] - lam_min <= gap_tol {
                    sh[i] += tau;
                    break;
                }
            }
        }
        let s = s_from(&sh);
        return (value(&s), s);
    }

    // Safeguarded bisection on sigma; ||s(sigma)|| is decreasing in sigma.
    let mut lo = sigma_floor + eps_gap;
    let mut hi = sigma_floor + norm2(&gh) / radius + 1.0;
    while norm_at(hi) > radius {
        hi = 2.0 * hi + 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    let sigma = hi;
    let mut sh = vec![0.0; n];
    for i in 0..n {
        let d = eigs[i] + sigma;
        sh[i] = if d > 0.0 { -gh[i] / d } else { 0.0 };
    }
    // Land exactly on the boundary.
    let nm = norm2(&sh);
    if nm > 0.0 {
        let scale = radius / nm;
        for v in sh.iter_mut() {
            *v *= scale;
        }
    }
    let s = s_from(&sh);
    (value(&s), s)
}

/// Exact global maximum of `q(s) = g's + 1/2 s'Hs` over `||s|| <= radius`.
pub fn max_quadratic_on_ball(g: &[f64], h: &Matrix, radius: f64) -> (f64, Vec<f64>) {
    let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
    let neg_h = Matrix::from_fn(h.nrows(), h.ncols(), |i, j| -h.get(i, j));
    let (v, s) = min_quadratic_on_ball(&neg_g, &neg_h, radius);
    (-v, s)
}
