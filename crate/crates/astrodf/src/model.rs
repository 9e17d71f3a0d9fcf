//! Fitting and evaluating stochastic interpolation models, plus runtime
//! diagnostics comparing the fitted model against the (test-problem-only)
//! interpolant of true function values.

use crate::geometry::{
    lagrange_polynomials, poisedness_constant, quadratic_block, scaled_interpolation_matrix,
    BasisKind, GeometryError, InterpolationSet, PolynomialBasis,
};
use crate::linalg::{self, Matrix, QrFactorization};
use crate::oracle::{Point, RngStream, TestProblem};
use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

/// A fitted local model `M(z) = sum_j alpha_j phi_j((z - center)/radius)`
/// with its gradient and Hessian mapped back to original coordinates.
///
/// Models are immutable once fitted.
#[derive(Debug, Clone)]
pub struct LocalModel {
    basis: PolynomialBasis,
    alpha: Vec<f64>,
    center: Point,
    radius: f64,
    value_at_center: f64,
    gradient: Vec<f64>,
    hessian: Matrix,
    hessian_norm: f64,
}

impl LocalModel {
    /// Solve the interpolation system `P alpha = estimates` in the scaled
    /// frame and extract value, gradient, and Hessian at the center.
    ///
    /// Fails with a geometry error when the set's condition estimate exceeds
    /// `max_condition`; the caller is expected to rebuild the set.
    pub fn fit(
        basis: &PolynomialBasis,
        set: &InterpolationSet,
        estimates: &[f64],
        max_condition: f64,
    ) -> Result<Self, GeometryError> {
        let p = basis.len();
        if set.len() != p || estimates.len() != p {
            return Err(GeometryError::InvalidSet {
                reason: "set and estimates must both have the basis cardinality",
            });
        }
        let m = scaled_interpolation_matrix(basis, set);
        let qr = QrFactorization::new(&m);
        let estimate = qr.condition_estimate();
        if !estimate.is_finite() || estimate > max_condition {
            return Err(GeometryError::IllConditioned { estimate });
        }
        let alpha = qr
            .solve(estimates)
            .ok_or(GeometryError::IllConditioned { estimate })?;

        let d = basis.dim();
        let r = set.radius();
        let gradient: Vec<f64> = alpha[1..=d].iter().map(|a| a / r).collect();
        let hessian = match basis.kind() {
            BasisKind::Linear => Matrix::zeros(d, d),
            BasisKind::Quadratic => {
                let c = quadratic_block(&alpha, d);
                Matrix::from_fn(d, d, |i, j| c.get(i, j) / (r * r))
            }
        };
        let hessian_norm = linalg::spectral_norm(&hessian);
        Ok(LocalModel {
            basis: *basis,
            value_at_center: alpha[0],
            alpha,
            center: set.center().clone(),
            radius: r,
            gradient,
            hessian,
            hessian_norm,
        })
    }

    pub fn basis(&self) -> &PolynomialBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.alpha
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn value_at_center(&self) -> f64 {
        self.value_at_center
    }

    /// Model gradient at the center, original coordinates.
    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    pub fn gradient_norm(&self) -> f64 {
        linalg::norm2(&self.gradient)
    }

    /// Model Hessian (zero matrix for linear models), original coordinates.
    pub fn hessian(&self) -> &Matrix {
        &self.hessian
    }

    /// Spectral norm of the Hessian, computed once at fit time.
    pub fn hessian_norm(&self) -> f64 {
        self.hessian_norm
    }

    /// Evaluate the model at `z` (original coordinates).
    pub fn eval(&self, z: &Point) -> f64 {
        debug_assert_eq!(z.dim(), self.center.dim());
        let u: Vec<f64> = z
            .coords()
            .iter()
            .zip(self.center.coords())
            .map(|(a, c)| (a - c) / self.radius)
            .collect();
        let phi = self.basis.eval(&u);
        linalg::dot(&self.alpha, &phi)
    }

    /// Model gradient at `z`: `g + H (z - center)`.
    pub fn grad(&self, z: &Point) -> Vec<f64> {
        let s: Vec<f64> = z
            .coords()
            .iter()
            .zip(self.center.coords())
            .map(|(a, c)| a - c)
            .collect();
        let hs = self.hessian.matvec(&s);
        self.gradient
            .iter()
            .zip(hs.iter())
            .map(|(g, h)| g + h)
            .collect()
    }

    /// Predicted decrease `M(center) - M(center + s)` for a step `s` in
    /// original coordinates.
    pub fn decrease_for_step(&self, s: &[f64]) -> f64 {
        -(linalg::dot(&self.gradient, s) + 0.5 * self.hessian.quadratic_form(s))
    }
}

/// Diagnostics tying the fitted stochastic model to the interpolant of the
/// true function on the same set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelDiagnostics {
    /// Poisedness estimate of the set on its own ball.
    pub lambda_hat: f64,
    /// `max_i |estimate_i - f(Y_i)|`.
    pub max_abs_sampling_error: f64,
    /// `p * lambda_hat * max_abs_sampling_error`.
    pub bound_rhs: f64,
    /// Largest `|M(z) - m(z)|` seen over the probe points.
    pub max_bound_lhs: f64,
    /// Probe points at which `|M(z) - m(z)|` exceeded `bound_rhs`.
    pub bound_violations: u32,
    /// Spectral norm of the model Hessian.
    pub hessian_norm: f64,
    /// `||grad M(center) - grad f(center)||`, NaN when the problem has no
    /// analytic gradient.
    pub grad_error_norm: f64,
    /// `sqrt(sum_{i>=2} (E_i - E_1)^2) / radius`: the sampling part of the
    /// gradient-error decomposition.
    pub grad_sampling_term: f64,
}

/// Fit the noise-free interpolant `m` on the same set and check the pointwise
/// bound `|M(z) - m(z)| <= p * Lambda * max_i |E_i|` at `probes` random points
/// in the set's ball. Any violation is a bug in the geometry or the fit, not
/// a statistical event.
pub fn error_bound_report(
    model: &LocalModel,
    set: &InterpolationSet,
    estimates: &[f64],
    problem: &TestProblem,
    probes: u32,
    rng: &mut RngStream,
) -> Result<ModelDiagnostics, GeometryError> {
    let basis = model.basis();
    let p = basis.len();
    let d = basis.dim();
    let true_values: Vec<f64> = set
        .points()
        .iter()
        .map(|y| problem.true_value(y).expect("dimension checked by set"))
        .collect();
    let exact = LocalModel::fit(basis, set, &true_values, f64::INFINITY)?;

    let lagrange = lagrange_polynomials(basis, set, f64::INFINITY)?;
    let lambda_hat = poisedness_constant(set, &lagrange, &set.ball());

    let max_err = estimates
        .iter()
        .zip(true_values.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let bound_rhs = p as f64 * lambda_hat * max_err;

    let mut violations = 0u32;
    let mut max_lhs = 0.0f64;
    let mut done = 0;
    while done < probes {
        // Rejection-sample the unit ball in the scaled frame.
        let u: Vec<f64> = (0..d).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        if linalg::dot(&u, &u) > 1.0 {
            continue;
        }
        done += 1;
        let z = set
            .center()
            .offset(&u.iter().map(|v| v * set.radius()).collect::<Vec<f64>>());
        let lhs = (model.eval(&z) - exact.eval(&z)).abs();
        max_lhs = max_lhs.max(lhs);
        if lhs > bound_rhs * (1.0 + 1e-9) + 1e-14 {
            violations += 1;
        }
    }

    let grad_error_norm = match problem.true_gradient(set.center()) {
        Some(g) => {
            let mg = model.gradient();
            g.iter()
                .zip(mg.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        }
        None => f64::NAN,
    };
    let e1 = estimates[0] - true_values[0];
    let grad_sampling_term = estimates
        .iter()
        .zip(true_values.iter())
        .skip(1)
        .map(|(a, b)| {
            let e = a - b - e1;
            e * e
        })
        .sum::<f64>()
        .sqrt()
        / set.radius();

    Ok(ModelDiagnostics {
        lambda_hat,
        max_abs_sampling_error: max_err,
        bound_rhs,
        max_bound_lhs: max_lhs,
        bound_violations: violations,
        hessian_norm: model.hessian_norm(),
        grad_error_norm,
        grad_sampling_term,
    })
}
