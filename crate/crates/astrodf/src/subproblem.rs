//! Trust-region subproblem: Cauchy step, dogleg, and the fraction-of-Cauchy-
//! decrease certificate that every returned step must satisfy.

use crate::linalg::{self, cholesky, cholesky_solve};
use crate::model::LocalModel;
use alloc::vec;
use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

/// A candidate step inside the trust region, with its certified decrease.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    /// Step vector in original coordinates, `||s|| <= delta`.
    pub s: Vec<f64>,
    /// `M(x) - M(x + s)`, nonnegative for any step this module returns.
    pub predicted_decrease: f64,
    /// Right-hand side of the Cauchy-decrease inequality at the kappa used
    /// when the step was produced.
    pub cauchy_decrease_floor: f64,
}

impl Step {
    pub fn norm(&self) -> f64 {
        linalg::norm2(&self.s)
    }

    pub fn is_zero(&self) -> bool {
        self.s.iter().all(|v| *v == 0.0)
    }
}

/// `kappa/2 * ||g|| * min(||g|| / ||H||, delta)`, with the convention
/// `||g|| / ||H|| = +inf` when `H = 0`.
fn decrease_floor(grad_norm: f64, hessian_norm: f64, delta: f64, kappa_fcd: f64) -> f64 {
    if grad_norm == 0.0 {
        return 0.0;
    }
    let curvature_cap = if hessian_norm == 0.0 {
        f64::INFINITY
    } else {
        grad_norm / hessian_norm
    };
    0.5 * kappa_fcd * grad_norm * curvature_cap.min(delta)
}

/// Exact minimizer of the model along the steepest-descent direction within
/// the ball of radius `delta`.
///
/// With `g = grad M(x)` and curvature `q = g'Hg / ||g||^2` along `-g`, the
/// minimizing length is `delta` when `q <= 0` and `min(delta, ||g||/q)`
/// otherwise. Satisfies the Cauchy-decrease inequality with `kappa_fcd = 1`.
pub fn cauchy_step(model: &LocalModel, delta: f64) -> Step {
    assert!(delta > 0.0);
    let g = model.gradient();
    let g_norm = linalg::norm2(g);
    if g_norm == 0.0 {
        return Step {
            s: vec![0.0; g.len()],
            predicted_decrease: 0.0,
            cauchy_decrease_floor: 0.0,
        };
    }
    let ghg = model.hessian().quadratic_form(g);
    let curvature = ghg / (g_norm * g_norm);
    let t = if ghg <= 0.0 {
        delta
    } else {
        delta.min(g_norm / curvature)
    };
    let s: Vec<f64> = g.iter().map(|gi| -t * gi / g_norm).collect();
    let predicted_decrease = t * g_norm - 0.5 * t * t * curvature;
    Step {
        s,
        predicted_decrease,
        cauchy_decrease_floor: decrease_floor(g_norm, model.hessian_norm(), delta, 1.0),
    }
}

/// True iff the step satisfies the fraction-of-Cauchy-decrease inequality at
/// the given `kappa_fcd`, using the spectral norm of the model Hessian.
pub fn check_cauchy(model: &LocalModel, step: &Step, delta: f64, kappa_fcd: f64) -> bool {
    let floor = decrease_floor(model.gradient_norm(), model.hessian_norm(), delta, kappa_fcd);
    step.predicted_decrease >= floor - 1e-10 * floor.abs().max(1.0)
}

/// Solve the trust-region subproblem: the best of the Cauchy step, a dogleg
/// step (Newton point clipped to the ball when the Hessian is positive
/// definite), and the exact eigen-based ball minimizer, verified against the
/// `kappa_fcd` Cauchy floor.
///
/// The certificate is asserted at runtime; a violation is a bug, not a
/// recoverable condition.
pub fn solve_subproblem(model: &LocalModel, delta: f64, kappa_fcd: f64) -> Step {
    assert!(delta > 0.0);
    assert!(kappa_fcd > 0.0 && kappa_fcd <= 1.0);
    let mut best = cauchy_step(model, delta);
    let floor = best.cauchy_decrease_floor;

    let mut consider = |s: Vec<f64>| {
        if linalg::norm2(&s) > delta * (1.0 + 1e-12) {
            return;
        }
        let decrease = model.decrease_for_step(&s);
        if decrease > best.predicted_decrease {
            let candidate = Step {
                s,
                predicted_decrease: decrease,
                cauchy_decrease_floor: floor,
            };
            // Fall back to the Cauchy step on any verification failure.
            if check_cauchy(model, &candidate, delta, kappa_fcd) {
                best = candidate;
            }
        }
    };
    if let Some(dl) = dogleg_step(model, delta) {
        consider(dl);
    }
    if !model.gradient().is_empty() && model.hessian_norm() > 0.0 {
        // Exact minimizer of the quadratic over the ball; picks up negative
        // curvature that the steepest-descent path cannot see.
        let (_, s) = linalg::min_quadratic_on_ball(model.gradient(), model.hessian(), delta);
        consider(s);
    }

    let floor = decrease_floor(model.gradient_norm(), model.hessian_norm(), delta, kappa_fcd);
    best.cauchy_decrease_floor = floor;
    assert!(
        best.predicted_decrease >= floor - 1e-10 * floor.abs().max(1.0),
        "Cauchy decrease certificate violated: {} < {}",
        best.predicted_decrease,
        floor
    );
    assert!(best.norm() <= delta * (1.0 + 1e-12), "step outside ball");
    best
}

/// Dogleg path step: Newton point if interior, otherwise the intersection of
/// the steepest-descent-to-Newton path with the ball. `None` when the Hessian
/// is not positive definite (the Cauchy step covers that case).
fn dogleg_step(model: &LocalModel, delta: f64) -> Option<Vec<f64>> {
    let g = model.gradient();
    let g_norm = linalg::norm2(g);
    if g_norm == 0.0 {
        return None;
    }
    let l = cholesky(model.hessian())?;
    let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
    let newton = cholesky_solve(&l, &neg_g);
    if linalg::norm2(&newton) <= delta {
        return Some(newton);
    }
    // Unconstrained Cauchy point along -g.
    let ghg = model.hessian().quadratic_form(g);
    if ghg <= 0.0 {
        return None;
    }
    let t_u = g_norm * g_norm / ghg;
    let pu: Vec<f64> = g.iter().map(|v| -t_u * v).collect();
    let pu_norm = linalg::norm2(&pu);
    if pu_norm >= delta {
        // Ball boundary along -g; identical to the clipped Cauchy step.
        return Some(g.iter().map(|v| -delta * v / g_norm).collect());
    }
    // Intersection of pu + tau (pn - pu), tau in [0, 1], with the sphere.
    let dvec: Vec<f64> = newton.iter().zip(pu.iter()).map(|(n, u)| n - u).collect();
    let a = linalg::dot(&dvec, &dvec);
    let b = 2.0 * linalg::dot(&pu, &dvec);
    let c = pu_norm * pu_norm - delta * delta;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let tau = (-b + disc.sqrt()) / (2.0 * a);
    let tau = tau.clamp(0.0, 1.0);
    Some(
        pu.iter()
            .zip(dvec.iter())
            .map(|(u, d)| u + tau * d)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{default_poised_set, PolynomialBasis, DEFAULT_CONDITION_LIMIT};
    use crate::linalg::Matrix;
    use crate::model::LocalModel;
    use crate::oracle::{Point, RngStream};
    use alloc::vec;

    /// Fit the quadratic model with given gradient and Hessian at the origin.
    fn model_from(g: &[f64], h: &Matrix) -> LocalModel {
        let d = g.len();
        let basis = PolynomialBasis::quadratic(d);
        let center = Point::new(vec![0.0; d]);
        let set = default_poised_set(&center, 1.0, &basis);
        let estimates: alloc::vec::Vec<f64> = set
            .points()
            .iter()
            .map(|p| {
                let z = p.coords();
                linalg::dot(g, z) + 0.5 * h.quadratic_form(z)
            })
            .collect();
        LocalModel::fit(&basis, &set, &estimates, DEFAULT_CONDITION_LIMIT).unwrap()
    }

    fn linear_model_from(g: &[f64]) -> LocalModel {
        let d = g.len();
        let basis = PolynomialBasis::linear(d);
        let center = Point::new(vec![0.0; d]);
        let set = default_poised_set(&center, 1.0, &basis);
        let estimates: alloc::vec::Vec<f64> =
            set.points().iter().map(|p| linalg::dot(g, p.coords())).collect();
        LocalModel::fit(&basis, &set, &estimates, DEFAULT_CONDITION_LIMIT).unwrap()
    }

    #[test]
    fn cauchy_step_hand_computed_case() {
        // g = (2, 0), H = 2I, delta = 0.5: t = 0.5, decrease = 0.75, floor
        // (kappa = 1) is 0.5.
        let h = Matrix::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 0.0 });
        let model = model_from(&[2.0, 0.0], &h);
        let step = cauchy_step(&model, 0.5);
        assert!((step.s[0] + 0.5).abs() < 1e-9);
        assert!(step.s[1].abs() < 1e-9);
        assert!((step.predicted_decrease - 0.75).abs() < 1e-9);
        assert!((step.cauchy_decrease_floor - 0.5).abs() < 1e-9);
        assert!(check_cauchy(&model, &step, 0.5, 1.0));
    }

    #[test]
    fn linear_model_takes_boundary_step() {
        let model = linear_model_from(&[1.0, 1.0]);
        let step = cauchy_step(&model, 1.0);
        let expect = 1.0 / 2.0f64.sqrt();
        assert!((step.s[0] + expect).abs() < 1e-9);
        assert!((step.s[1] + expect).abs() < 1e-9);
        assert!((step.predicted_decrease - 2.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_gives_zero_step() {
        // All-zero estimates solve to exactly-zero coefficients.
        let basis = PolynomialBasis::quadratic(2);
        let set = default_poised_set(&Point::new(vec![0.0, 0.0]), 1.0, &basis);
        let estimates = vec![0.0; set.len()];
        let model = LocalModel::fit(&basis, &set, &estimates, DEFAULT_CONDITION_LIMIT).unwrap();
        assert_eq!(model.gradient_norm(), 0.0);
        let step = cauchy_step(&model, 1.0);
        assert!(step.is_zero());
        assert_eq!(step.predicted_decrease, 0.0);
    }

    #[test]
    fn zero_step_fails_cauchy_check() {
        let model = linear_model_from(&[1.0, 0.0]);
        let zero = Step {
            s: vec![0.0, 0.0],
            predicted_decrease: 0.0,
            cauchy_decrease_floor: 0.0,
        };
        assert!(!check_cauchy(&model, &zero, 1.0, 1.0));
    }

    #[test]
    fn interior_newton_point_is_used() {
        // Strongly convex with the minimizer well inside the ball.
        let h = Matrix::from_fn(2, 2, |i, j| if i == j { 4.0 } else { 0.0 });
        let model = model_from(&[1.0, -2.0], &h);
        let step = solve_subproblem(&model, 10.0, 0.5);
        // Newton point is -H^{-1} g = (-0.25, 0.5).
        assert!((step.s[0] + 0.25).abs() < 1e-8);
        assert!((step.s[1] - 0.5).abs() < 1e-8);
        let cauchy = cauchy_step(&model, 10.0);
        assert!(step.predicted_decrease >= cauchy.predicted_decrease - 1e-12);
    }

    #[test]
    fn indefinite_hessian_still_satisfies_floor() {
        let mut rng = RngStream::new(2024, 0);
        for trial in 0..100 {
            let h = {
                let a = rng.uniform_in(0.5, 2.0);
                let b = rng.uniform_in(0.5, 2.0);
                let c = rng.uniform_in(-1.0, 1.0);
                Matrix::from_fn(2, 2, |i, j| match (i, j) {
                    (0, 0) => a,
                    (1, 1) => -b,
                    _ => c,
                })
            };
            let g = [rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0)];
            if linalg::norm2(&g) < 1e-6 {
                continue;
            }
            let model = model_from(&g, &h);
            let delta = rng.uniform_in(0.1, 2.0);
            let step = solve_subproblem(&model, delta, 0.5);
            assert!(step.norm() <= delta * (1.0 + 1e-12), "trial {trial}");
            assert!(check_cauchy(&model, &step, delta, 0.5), "trial {trial}");
        }
    }

    #[test]
    fn dominates_brute_force_grid() {
        // d = 2 random quadratics: the subproblem decrease reaches at least
        // 95% of a dense grid search over the ball.
        let mut rng = RngStream::new(7, 7);
        for trial in 0..25 {
            let h = {
                let a = rng.uniform_in(-2.0, 2.0);
                let b = rng.uniform_in(-2.0, 2.0);
                let c = rng.uniform_in(-1.0, 1.0);
                Matrix::from_fn(2, 2, |i, j| match (i, j) {
                    (0, 0) => a,
                    (1, 1) => b,
                    _ => c,
                })
            };
            let g = [rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0)];
            if linalg::norm2(&g) < 1e-3 {
                continue;
            }
            let model = model_from(&g, &h);
            let delta = 1.0;
            let step = solve_subproblem(&model, delta, 0.5);

            let mut best = 0.0f64;
            let n = 200;
            for i in 0..=2 * n {
                for j in 0..=2 * n {
                    let x = (i as f64 / n as f64 - 1.0) * delta;
                    let y = (j as f64 / n as f64 - 1.0) * delta;
                    if x * x + y * y > delta * delta {
                        continue;
                    }
                    best = best.max(model.decrease_for_step(&[x, y]));
                }
            }
            assert!(
                step.predicted_decrease >= 0.95 * best,
                "trial {trial}: {} vs grid {best}",
                step.predicted_decrease
            );
        }
    }

    #[test]
    fn cauchy_decrease_scales_linearly() {
        // Scaling g and H by c > 0 scales the clipped-case decrease by c and
        // keeps the minimizing t unchanged.
        let h = Matrix::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 0.0 });
        let base = cauchy_step(&model_from(&[2.0, 0.0], &h), 0.5);
        for c in [0.5, 3.0, 10.0] {
            let hc = Matrix::from_fn(2, 2, |i, j| c * h.get(i, j));
            let scaled = cauchy_step(&model_from(&[2.0 * c, 0.0], &hc), 0.5);
            assert!((scaled.predicted_decrease - c * base.predicted_decrease).abs() < 1e-8 * c);
            assert!((scaled.norm() - base.norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn ball_feasibility_over_random_models() {
        let mut rng = RngStream::new(55, 0);
        for _ in 0..50 {
            let d = 2 + (rng.uniform_unit() * 3.0) as usize;
            let g: alloc::vec::Vec<f64> = (0..d).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
            let mut h = Matrix::zeros(d, d);
            for i in 0..d {
                for j in i..d {
                    let v = rng.uniform_in(-2.0, 2.0);
                    h.set(i, j, v);
                    h.set(j, i, v);
                }
            }
            let model = model_from(&g, &h);
            let delta = rng.uniform_in(0.05, 5.0);
            let step = solve_subproblem(&model, delta, 0.5);
            assert!(step.norm() <= delta * (1.0 + 1e-12));
            assert!(step.predicted_decrease >= -1e-12);
        }
    }

    #[test]
    fn check_cauchy_respects_kind_of_basis() {
        // Linear model: H = 0 convention puts delta in the floor.
        let model = linear_model_from(&[3.0, 4.0]);
        let step = cauchy_step(&model, 0.7);
        // floor = 1/2 * 5 * min(inf, 0.7) = 1.75; decrease = 0.7 * 5 = 3.5.
        assert!((step.cauchy_decrease_floor - 1.75).abs() < 1e-9);
        assert!((step.predicted_decrease - 3.5).abs() < 1e-9);
    }
}
