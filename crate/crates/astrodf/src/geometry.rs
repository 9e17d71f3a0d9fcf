//! Polynomial bases, interpolation sets, Lagrange polynomials, and
//! poisedness certification.
//!
//! All numerical work happens in shifted-and-scaled coordinates
//! `u = (z - center) / radius`, which keeps the interpolation matrix
//! well-conditioned independent of where and how small the trust region is.
//! Fitted quantities are mapped back to original coordinates exactly.

use crate::linalg::{self, Matrix, QrFactorization};
use crate::oracle::{Point, RngStream};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

/// Condition-estimate threshold above which a set is declared not poised.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e8;

/// Degree of the interpolation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Linear,
    Quadratic,
}

/// Monomial basis in the order `(1, z_1, ..., z_d)` for linear and
/// `(1, z_1, ..., z_d, z_1^2/2, z_1 z_2, ..., z_1 z_d, z_2^2/2, ..., z_d^2/2)`
/// for quadratic. With the 1/2 factors on squares, the quadratic-block
/// coefficients of a fitted model are literally Hessian entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolynomialBasis {
    kind: BasisKind,
    dim: usize,
}

impl PolynomialBasis {
    pub fn new(kind: BasisKind, dim: usize) -> Self {
        assert!(dim >= 1);
        PolynomialBasis { kind, dim }
    }

    pub fn linear(dim: usize) -> Self {
        Self::new(BasisKind::Linear, dim)
    }

    pub fn quadratic(dim: usize) -> Self {
        Self::new(BasisKind::Quadratic, dim)
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis functions `p`: `d + 1` or `(d+1)(d+2)/2`.
    pub fn len(&self) -> usize {
        match self.kind {
            BasisKind::Linear => self.dim + 1,
            BasisKind::Quadratic => (self.dim + 1) * (self.dim + 2) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn degree(&self) -> u32 {
        match self.kind {
            BasisKind::Linear => 1,
            BasisKind::Quadratic => 2,
        }
    }

    /// Evaluate all basis functions at `z` into `out` (length `self.len()`).
    pub fn eval_into(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.dim);
        debug_assert_eq!(out.len(), self.len());
        out[0] = 1.0;
        out[1..=self.dim].copy_from_slice(z);
        if self.kind == BasisKind::Quadratic {
            let mut idx = self.dim + 1;
            for i in 0..self.dim {
                for j in i..self.dim {
                    out[idx] = if i == j {
                        0.5 * z[i] * z[i]
                    } else {
                        z[i] * z[j]
                    };
                    idx += 1;
                }
            }
        }
    }

    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(z, &mut out);
        out
    }
}

/// Errors from set construction and poisedness certification.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    /// The interpolation matrix is singular or too ill-conditioned; the
    /// caller should rebuild the set.
    IllConditioned { estimate: f64 },
    InvalidSet { reason: &'static str },
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::IllConditioned { estimate } => {
                write!(f, "interpolation set is not poised (condition estimate {estimate:e})")
            }
            GeometryError::InvalidSet { reason } => write!(f, "invalid interpolation set: {reason}"),
        }
    }
}

impl core::error::Error for GeometryError {}

/// A closed ball, used for poisedness certification.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Self {
        assert!(radius > 0.0 && radius.is_finite());
        Ball { center, radius }
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.center.distance_to(x) <= self.radius * (1.0 + 1e-12)
    }
}

/// Interpolation set: a center plus `p` design points inside a ball. The
/// first point is always the center.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationSet {
    center: Point,
    points: Vec<Point>,
    radius: f64,
}

impl InterpolationSet {
    pub fn new(center: Point, points: Vec<Point>, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::InvalidSet {
                reason: "radius must be positive and finite",
            });
        }
        if points.is_empty() || points[0] != center {
            return Err(GeometryError::InvalidSet {
                reason: "points[0] must equal the center",
            });
        }
        let limit = radius * (1.0 + 1e-12);
        if points.iter().any(|p| center.distance_to(p) > limit) {
            return Err(GeometryError::InvalidSet {
                reason: "all points must lie in the closed ball",
            });
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(GeometryError::InvalidSet {
                        reason: "points must be pairwise distinct",
                    });
                }
            }
        }
        Ok(InterpolationSet {
            center,
            points,
            radius,
        })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn ball(&self) -> Ball {
        Ball::new(self.center.clone(), self.radius)
    }

    /// Points in the scaled frame `u = (z - center) / radius`.
    pub fn scaled_points(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .map(|p| {
                p.coords()
                    .iter()
                    .zip(self.center.coords())
                    .map(|(a, c)| (a - c) / self.radius)
                    .collect()
            })
            .collect()
    }
}

/// The default poised stencil at `center` with the given `radius`.
///
/// Linear: `{x0} ∪ {x0 + r e_i}`. Quadratic: `{x0} ∪ {x0 ± r e_i} ∪
/// {x0 + (r/√2)(e_i + e_j), i < j}`, exactly `(d+1)(d+2)/2` points. Both are
/// nonsingular by construction.
pub fn default_poised_set(center: &Point, radius: f64, basis: &PolynomialBasis) -> InterpolationSet {
    assert!(radius > 0.0 && radius.is_finite());
    let d = basis.dim();
    assert_eq!(center.dim(), d);
    let offsets = stencil_offsets(d, radius, basis.kind());
    let points: Vec<Point> = offsets.iter().map(|s| center.offset(s)).collect();
    InterpolationSet::new(center.clone(), points, radius).expect("stencil is valid by construction")
}

fn stencil_offsets(d: usize, radius: f64, kind: BasisKind) -> Vec<Vec<f64>> {
    let mut offsets = Vec::new();
    offsets.push(vec![0.0; d]);
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = radius;
        offsets.push(e);
    }
    if kind == BasisKind::Quadratic {
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = -radius;
            offsets.push(e);
        }
        let s = radius / 2.0f64.sqrt();
        for i in 0..d {
            for j in (i + 1)..d {
                let mut e = vec![0.0; d];
                e[i] = s;
                e[j] = s;
                offsets.push(e);
            }
        }
    }
    offsets
}

/// A randomly rotated copy of the default stencil. Used when a fresh set is
/// needed but the axis-aligned directions have gone stale or degenerate.
pub fn jittered_poised_set(
    center: &Point,
    radius: f64,
    basis: &PolynomialBasis,
    rng: &mut RngStream,
) -> InterpolationSet {
    let d = basis.dim();
    let mut offsets = stencil_offsets(d, radius, basis.kind());
    if d >= 2 {
        // Compose random Givens rotations; orthogonal, so norms are kept and
        // the stencil stays poised.
        for _ in 0..(2 * d) {
            let i = (rng.uniform_unit() * d as f64) as usize % d;
            let mut j = (rng.uniform_unit() * d as f64) as usize % d;
            if i == j {
                j = (j + 1) % d;
            }
            let theta = rng.uniform_in(0.0, core::f64::consts::TAU);
            let (s, c) = theta.sin_cos();
            for o in offsets.iter_mut() {
                let oi = o[i];
                let oj = o[j];
                o[i] = c * oi - s * oj;
                o[j] = s * oi + c * oj;
            }
        }
    }
    let points: Vec<Point> = offsets.iter().map(|s| center.offset(s)).collect();
    InterpolationSet::new(center.clone(), points, radius).expect("rotated stencil is valid")
}

/// The interpolation matrix with entry `(i, j) = phi_j(Y_i)`, rows ordered by
/// the set's points and columns by basis order. Points are used as given (no
/// scaling); see [`scaled_interpolation_matrix`] for the conditioned variant.
pub fn interpolation_matrix(basis: &PolynomialBasis, set: &InterpolationSet) -> Matrix {
    let p = basis.len();
    let mut m = Matrix::zeros(set.len(), p);
    let mut row = vec![0.0; p];
    for (i, point) in set.points().iter().enumerate() {
        basis.eval_into(point.coords(), &mut row);
        for (j, &v) in row.iter().enumerate() {
            m.set(i, j, v);
        }
    }
    m
}

/// The interpolation matrix evaluated on scaled points `(Y_i - center)/radius`.
pub fn scaled_interpolation_matrix(basis: &PolynomialBasis, set: &InterpolationSet) -> Matrix {
    let p = basis.len();
    let scaled = set.scaled_points();
    let mut m = Matrix::zeros(scaled.len(), p);
    let mut row = vec![0.0; p];
    for (i, u) in scaled.iter().enumerate() {
        basis.eval_into(u, &mut row);
        for (j, &v) in row.iter().enumerate() {
            m.set(i, j, v);
        }
    }
    m
}

/// Lagrange polynomials of a poised set, stored as coefficient vectors in the
/// basis over the set's scaled frame.
#[derive(Debug, Clone)]
pub struct LagrangeSet {
    basis: PolynomialBasis,
    center: Point,
    radius: f64,
    /// `coeffs[j]` are the basis coefficients of `l_j`.
    coeffs: Vec<Vec<f64>>,
    /// Scaled copies of the set's points, kept for certification.
    scaled_points: Vec<Vec<f64>>,
}

impl LagrangeSet {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coefficients(&self, j: usize) -> &[f64] {
        &self.coeffs[j]
    }

    /// Evaluate `l_j` at a point in original coordinates.
    pub fn eval(&self, j: usize, z: &Point) -> f64 {
        let u: Vec<f64> = z
            .coords()
            .iter()
            .zip(self.center.coords())
            .map(|(a, c)| (a - c) / self.radius)
            .collect();
        self.eval_scaled(j, &u)
    }

    fn eval_scaled(&self, j: usize, u: &[f64]) -> f64 {
        let phi = self.basis.eval(u);
        linalg::dot(&self.coeffs[j], &phi)
    }
}

/// Compute the Lagrange polynomials `l_j` with `l_j(Y_i) = delta_ij` by
/// solving `P c_j = e_j` in the scaled frame. Fails when the condition
/// estimate of `P` exceeds `max_condition`.
pub fn lagrange_polynomials(
    basis: &PolynomialBasis,
    set: &InterpolationSet,
    max_condition: f64,
) -> Result<LagrangeSet, GeometryError> {
    let p = basis.len();
    if set.len() != p {
        return Err(GeometryError::InvalidSet {
            reason: "set cardinality must equal the basis size",
        });
    }
    let m = scaled_interpolation_matrix(basis, set);
    let qr = QrFactorization::new(&m);
    let estimate = qr.condition_estimate();
    if !estimate.is_finite() || estimate > max_condition {
        return Err(GeometryError::IllConditioned { estimate });
    }
    let mut coeffs = Vec::with_capacity(p);
    let mut e = vec![0.0; p];
    for j in 0..p {
        e[j] = 1.0;
        let c = qr
            .solve(&e)
            .ok_or(GeometryError::IllConditioned { estimate })?;
        e[j] = 0.0;
        coeffs.push(c);
    }
    Ok(LagrangeSet {
        basis: *basis,
        center: set.center().clone(),
        radius: set.radius(),
        coeffs,
        scaled_points: set.scaled_points(),
    })
}

/// Estimate the poisedness constant `Lambda = max_j max_{z in ball} |l_j(z)|`.
///
/// For linear bases the per-polynomial maximum has the closed form
/// `|l_j(ball center)| + rho * ||b_j||`. For quadratic bases each maximum is a
/// ball-constrained quadratic optimization solved exactly through the
/// eigendecomposition, with the set's own points as a pointwise floor.
pub fn poisedness_constant(set: &InterpolationSet, lagrange: &LagrangeSet, ball: &Ball) -> f64 {
    debug_assert_eq!(set.len(), lagrange.len());
    let d = lagrange.basis.dim();
    // Ball in the scaled frame of the Lagrange set.
    let center_u: Vec<f64> = ball
        .center
        .coords()
        .iter()
        .zip(lagrange.center.coords())
        .map(|(a, c)| (a - c) / lagrange.radius)
        .collect();
    let rho = ball.radius / lagrange.radius;

    let mut lambda = 0.0f64;
    for j in 0..lagrange.len() {
        let c = &lagrange.coeffs[j];
        let a0 = c[0];
        let b = &c[1..=d];
        let max_abs = match lagrange.basis.kind() {
            BasisKind::Linear => {
                let at_center = a0 + linalg::dot(b, &center_u);
                at_center.abs() + rho * linalg::norm2(b)
            }
            BasisKind::Quadratic => {
                let h = quadratic_block(c, d);
                // Value and gradient of l_j at the ball center.
                let hu = h.matvec(&center_u);
                let val_c = a0 + linalg::dot(b, &center_u) + 0.5 * linalg::dot(&center_u, &hu);
                let grad_c: Vec<f64> = b.iter().zip(hu.iter()).map(|(bi, hi)| bi + hi).collect();
                let (inc_max, _) = linalg::max_quadratic_on_ball(&grad_c, &h, rho);
                let (dec_min, _) = linalg::min_quadratic_on_ball(&grad_c, &h, rho);
                (val_c + inc_max).abs().max((val_c + dec_min).abs())
            }
        };
        lambda = lambda.max(max_abs);
        // Pointwise floor from the set's own points (inside the ball by
        // construction when the ball covers the set).
        for u in &lagrange.scaled_points {
            lambda = lambda.max(lagrange.eval_scaled(j, u).abs());
        }
    }
    lambda
}

/// Extract the symmetric quadratic block of a coefficient vector as a matrix.
/// With the 1/2 convention on squares, coefficients are Hessian entries.
pub(crate) fn quadratic_block(coeffs: &[f64], d: usize) -> Matrix {
    let mut h = Matrix::zeros(d, d);
    let mut idx = d + 1;
    for i in 0..d {
        for j in i..d {
            let v = coeffs[idx];
            h.set(i, j, v);
            h.set(j, i, v);
            idx += 1;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec())
    }

    fn unit_triangle_set() -> InterpolationSet {
        InterpolationSet::new(
            pt(&[0.0, 0.0]),
            vec![pt(&[0.0, 0.0]), pt(&[1.0, 0.0]), pt(&[0.0, 1.0])],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn linear_matrix_by_substitution() {
        let basis = PolynomialBasis::linear(2);
        let m = interpolation_matrix(&basis, &unit_triangle_set());
        let expect = [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), expect[i][j]);
            }
        }
        // Hand 3x3 determinant of the expected matrix is 1: the stencil is poised.
        let det = expect[0][0]
            * (expect[1][1] * expect[2][2] - expect[1][2] * expect[2][1])
            - expect[0][1] * (expect[1][0] * expect[2][2] - expect[1][2] * expect[2][0])
            + expect[0][2] * (expect[1][0] * expect[2][1] - expect[1][1] * expect[2][0]);
        assert_eq!(det, 1.0);
    }

    #[test]
    fn collinear_points_are_singular() {
        let basis = PolynomialBasis::linear(2);
        let set = InterpolationSet::new(
            pt(&[0.0, 0.0]),
            vec![pt(&[0.0, 0.0]), pt(&[1.0, 0.0]), pt(&[2.0, 0.0])],
            2.0,
        )
        .unwrap();
        let m = interpolation_matrix(&basis, &set);
        // Hand determinant: rows (1,0,0), (1,1,0), (1,2,0) -> 0.
        let det = m.get(0, 0) * (m.get(1, 1) * m.get(2, 2) - m.get(1, 2) * m.get(2, 1))
            - m.get(0, 1) * (m.get(1, 0) * m.get(2, 2) - m.get(1, 2) * m.get(2, 0))
            + m.get(0, 2) * (m.get(1, 0) * m.get(2, 1) - m.get(1, 1) * m.get(2, 0));
        assert_eq!(det, 0.0);
        assert!(lagrange_polynomials(&basis, &set, DEFAULT_CONDITION_LIMIT).is_err());
    }

    #[test]
    fn quadratic_matrix_1d_by_substitution() {
        let basis = PolynomialBasis::quadratic(1);
        let set = InterpolationSet::new(
            pt(&[0.0]),
            vec![pt(&[0.0]), pt(&[1.0]), pt(&[2.0])],
            2.0,
        )
        .unwrap();
        let m = interpolation_matrix(&basis, &set);
        let expect = [[1.0, 0.0, 0.0], [1.0, 1.0, 0.5], [1.0, 2.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), expect[i][j]);
            }
        }
    }

    #[test]
    fn default_quadratic_stencil_has_p_points() {
        let basis = PolynomialBasis::quadratic(2);
        let set = default_poised_set(&pt(&[0.0, 0.0]), 1.0, &basis);
        assert_eq!(set.len(), 6);
        assert_eq!(basis.len(), 6);
    }

    #[test]
    fn stencil_points_stay_in_ball() {
        for d in 1..=6 {
            let center = Point::new(vec![0.3; d]);
            for kind in [BasisKind::Linear, BasisKind::Quadratic] {
                let basis = PolynomialBasis::new(kind, d);
                let set = default_poised_set(&center, 0.7, &basis);
                for p in set.points() {
                    assert!(center.distance_to(p) <= 0.7 * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn default_stencils_are_poised_up_to_d10() {
        for d in 1..=10 {
            let center = Point::new(vec![1.0; d]);
            for kind in [BasisKind::Linear, BasisKind::Quadratic] {
                let basis = PolynomialBasis::new(kind, d);
                // A small radius exercises the scaling: conditioning must not
                // depend on it.
                let set = default_poised_set(&center, 1e-3, &basis);
                let m = scaled_interpolation_matrix(&basis, &set);
                let qr = QrFactorization::new(&m);
                let cond = qr.condition_estimate();
                assert!(
                    cond.is_finite() && cond < 1e6,
                    "d={d} {kind:?}: condition {cond}"
                );
            }
        }
    }

    #[test]
    fn lagrange_triangle_closed_form() {
        let basis = PolynomialBasis::linear(2);
        let set = unit_triangle_set();
        let lag = lagrange_polynomials(&basis, &set, DEFAULT_CONDITION_LIMIT).unwrap();
        // l1 = 1 - z1 - z2, l2 = z1, l3 = z2.
        let expect = [
            vec![1.0, -1.0, -1.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        for j in 0..3 {
            for i in 0..3 {
                assert!(
                    (lag.coefficients(j)[i] - expect[j][i]).abs() < 1e-12,
                    "l_{j}[{i}]"
                );
            }
        }
    }

    #[test]
    fn lagrange_cardinality_property() {
        let mut rng = RngStream::new(31, 0);
        for d in [2usize, 3, 4] {
            for kind in [BasisKind::Linear, BasisKind::Quadratic] {
                let basis = PolynomialBasis::new(kind, d);
                let center = Point::new((0..d).map(|_| rng.uniform_in(-1.0, 1.0)).collect());
                let set = jittered_poised_set(&center, 0.5, &basis, &mut rng);
                let lag = lagrange_polynomials(&basis, &set, DEFAULT_CONDITION_LIMIT).unwrap();
                for j in 0..set.len() {
                    for (i, y) in set.points().iter().enumerate() {
                        let v = lag.eval(j, y);
                        let target = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (v - target).abs() <= 1e-8,
                            "d={d} {kind:?} l_{j}(Y_{i}) = {v}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn lagrange_partition_of_unity() {
        let basis = PolynomialBasis::quadratic(3);
        let center = pt(&[0.5, -0.25, 1.0]);
        let set = default_poised_set(&center, 0.8, &basis);
        let lag = lagrange_polynomials(&basis, &set, DEFAULT_CONDITION_LIMIT).unwrap();
        let mut rng = RngStream::new(5, 5);
        for _ in 0..20 {
            let z = center.offset(
                &(0..3)
                    .map(|_| rng.uniform_in(-0.4, 0.4))
                    .collect::<Vec<f64>>(),
            );
            let total: f64 = (0..set.len()).map(|j| lag.eval(j, &z)).sum();
            assert!((total - 1.0).abs() <= 1e-9, "sum l_j = {total}");
        }
    }

    #[test]
    fn lagrange_reconstructs_low_degree_polynomials() {
        // sum_j l_j(z) q(Y_j) = q(z) for any q of degree <= basis degree.
        let mut rng = RngStream::new(77, 1);
        let basis = PolynomialBasis::quadratic(2);
        let center = pt(&[0.2, -0.1]);
        let set = default_poised_set(&center, 1.5, &basis);
        let lag = lagrange_polynomials(&basis, &set, DEFAULT_CONDITION_LIMIT).unwrap();
        let q = |z: &[f64]| 0.7 - 1.2 * z[0] + 0.4 * z[1] + 0.9 * z[0] * z[0]
            - 0.3 * z[0] * z[1]
            + 1.1 * z[1] * z[1];
        for _ in 0..20 {
            let z = center.offset(&[rng.uniform_in(-1.5, 1.5), rng.uniform_in(-1.5, 1.5)]);
            let interp: f64 = set
                .points()
                .iter()
                .enumerate()
                .map(|(j, y)| lag.eval(j, &z) * q(y.coords()))
                .sum();
            let direct = q(z.coords());
            assert!(
                (interp - direct).abs() <= 1e-7 * (1.0 + direct.abs()),
                "{interp} vs {direct}"
            );
        }
    }

    #[test]
    fn triangle_poisedness_constant() {
        let basis = PolynomialBasis::linear(2);
        let set = unit_triangle_set();
        let lag = lagrange_polynomials(&basis, &set, DEFAULT_CONDITION_LIMIT).unwrap();
        let lambda = poisedness_constant(&set, &lag, &set.ball());
        // max over the unit ball of |1 - z1 - z2| = 1 + sqrt(2).
        assert!((lambda - (1.0 + 2.0f64.sqrt())).abs() <= 1e-9, "{lambda}");
    }

    #[test]
    fn poisedness_is_scale_invariant() {
        let basis = PolynomialBasis::linear(2);
        let lambda_at_scale = |c: f64| {
            let set = default_poised_set(&pt(&[0.0, 0.0]), c, &basis);
            let lag = lagrange_polynomials(&basis, &set, DEFAULT_CONDITION_LIMIT).unwrap();
            poisedness_constant(&set, &lag, &set.ball())
        };
        let base = lambda_at_scale(1.0);
        for c in [0.01, 0.5, 3.0, 250.0] {
            assert!((lambda_at_scale(c) - base).abs() <= 1e-9 * base);
        }
    }

    #[test]
    fn poisedness_at_least_one() {
        let mut rng = RngStream::new(13, 2);
        for kind in [BasisKind::Linear, BasisKind::Quadratic] {
            let basis = PolynomialBasis::new(kind, 3);
            let center = pt(&[0.0, 0.0, 0.0]);
            let set = jittered_poised_set(&center, 2.0, &basis, &mut rng);
            let lag = lagrange_polynomials(&basis, &set, DEFAULT_CONDITION_LIMIT).unwrap();
            let lambda = poisedness_constant(&set, &lag, &set.ball());
            assert!(lambda >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn quadratic_poisedness_matches_sampling_bound() {
        // The exact ball-max must dominate any sampled evaluation of |l_j|.
        let mut rng = RngStream::new(99, 0);
        let basis = PolynomialBasis::quadratic(2);
        let center = pt(&[0.1, 0.4]);
        let set = default_poised_set(&center, 0.9, &basis);
        let lag = lagrange_polynomials(&basis, &set, DEFAULT_CONDITION_LIMIT).unwrap();
        let ball = set.ball();
        let lambda = poisedness_constant(&set, &lag, &ball);
        let mut sampled = 0.0f64;
        for _ in 0..4000 {
            // Rejection-sample the ball.
            let u = [rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)];
            if u[0] * u[0] + u[1] * u[1] > 1.0 {
                continue;
            }
            let z = center.offset(&[u[0] * 0.9, u[1] * 0.9]);
            for j in 0..set.len() {
                sampled = sampled.max(lag.eval(j, &z).abs());
            }
        }
        assert!(lambda >= sampled - 1e-9, "{lambda} < sampled {sampled}");
    }
}
