//! Monte Carlo oracle: noisy test problems, reproducible RNG streams, and
//! streaming replication statistics.
//!
//! The oracle returns iid replicates `F_j(x) = f(x) + xi` and never exposes
//! gradients. Call counting is the budget currency of the whole solver, so the
//! per-run counter lives here and is incremented on every single replicate.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A point in problem coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn distance_to(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(other.coords.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// The point `self + s`.
    pub fn offset(&self, s: &[f64]) -> Point {
        debug_assert_eq!(s.len(), self.dim());
        Point::new(
            self.coords
                .iter()
                .zip(s.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point::new(coords)
    }
}

/// Running count/mean/variance of replicates at one point (Welford update).
///
/// The variance uses divisor `n`, not `n - 1`, to match the estimator the
/// adaptive stopping rules are stated in.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplicationStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl ReplicationStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: f64) {
        debug_assert!(value.is_finite());
        self.n += 1;
        let delta = value - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Sample mean; 0 when no replicates have been pushed.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Biased sample variance `m2 / n`; 0 when `n == 0`.
    pub fn variance(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0)
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Estimated standard error of the mean, `sigma_hat / sqrt(n)`.
    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Reproducible counter-based RNG stream.
///
/// Streams with distinct `(seed, stream_id)` are statistically independent;
/// the same pair reproduces the identical sequence bit-exactly. Each design
/// point in a run owns its own stream so that resampling a point resumes its
/// sequence no matter what happened elsewhere.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Standard normal draw (ziggurat).
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform_unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform_unit()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// Noise distribution family for builtin problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseFamily {
    Gaussian,
    Uniform,
}

/// Additive noise descriptor: family plus standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub family: NoiseFamily,
    pub sigma: f64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Self {
        assert!(sigma >= 0.0 && sigma.is_finite());
        NoiseModel {
            family: NoiseFamily::Gaussian,
            sigma,
        }
    }

    pub fn uniform(sigma: f64) -> Self {
        assert!(sigma >= 0.0 && sigma.is_finite());
        NoiseModel {
            family: NoiseFamily::Uniform,
            sigma,
        }
    }

    /// Draw one centered noise value with variance `sigma^2`.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        if self.sigma == 0.0 {
            // Zero-noise problems must stay bit-deterministic without
            // consuming stream state differently per family.
            return 0.0;
        }
        match self.family {
            NoiseFamily::Gaussian => self.sigma * rng.standard_normal(),
            // Uniform on [-sigma*sqrt(3), sigma*sqrt(3)] has variance sigma^2.
            NoiseFamily::Uniform => {
                let half_width = self.sigma * 3.0f64.sqrt();
                rng.uniform_in(-half_width, half_width)
            }
        }
    }
}

type ObjectiveFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A test problem: smooth objective `f`, optional analytic gradient for
/// diagnostics, and an additive noise model defining the Monte Carlo oracle
/// `F(x) = f(x) + xi`.
pub struct TestProblem {
    name: String,
    dim: usize,
    objective: ObjectiveFn,
    gradient: Option<GradientFn>,
    noise: NoiseModel,
    lipschitz_hint: Option<f64>,
    minimizer: Option<Point>,
}

impl fmt::Debug for TestProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("noise", &self.noise)
            .finish()
    }
}

impl TestProblem {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        noise: NoiseModel,
        objective: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TestProblem {
            name: name.into(),
            dim,
            objective: Box::new(objective),
            gradient: None,
            noise,
            lipschitz_hint: None,
            minimizer: None,
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Box::new(gradient));
        self
    }

    pub fn with_lipschitz_hint(mut self, hint: f64) -> Self {
        self.lipschitz_hint = Some(hint);
        self
    }

    pub fn with_minimizer(mut self, x: Point) -> Self {
        self.minimizer = Some(x);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn lipschitz_hint(&self) -> Option<f64> {
        self.lipschitz_hint
    }

    pub fn minimizer(&self) -> Option<&Point> {
        self.minimizer.as_ref()
    }

    fn check_dim(&self, x: &Point) -> Result<(), OracleError> {
        if x.dim() != self.dim {
            Err(OracleError::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            })
        } else {
            Ok(())
        }
    }

    /// Noise-free objective value (diagnostics only).
    pub fn true_value(&self, x: &Point) -> Result<f64, OracleError> {
        self.check_dim(x)?;
        Ok((self.objective)(x.coords()))
    }

    /// Analytic gradient when available (diagnostics only).
    pub fn true_gradient(&self, x: &Point) -> Option<Vec<f64>> {
        if x.dim() != self.dim {
            return None;
        }
        self.gradient.as_ref().map(|g| g(x.coords()))
    }

    pub fn true_gradient_norm(&self, x: &Point) -> Option<f64> {
        self.true_gradient(x)
            .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}

/// One run's oracle: a problem plus the call counter that the budget is
/// accounted against. `observe` is `&self` so workers holding distinct
/// [`RngStream`]s may evaluate concurrently.
pub struct Oracle<'a> {
    problem: &'a TestProblem,
    calls: AtomicU64,
}

impl<'a> Oracle<'a> {
    pub fn new(problem: &'a TestProblem) -> Self {
        Oracle {
            problem,
            calls: AtomicU64::new(0),
        }
    }

    pub fn problem(&self) -> &TestProblem {
        self.problem
    }

    /// Total `observe` invocations so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Draw one replicate `F(x) = f(x) + xi` and count the call.
    pub fn observe(&self, x: &Point, rng: &mut RngStream) -> Result<f64, OracleError> {
        self.problem.check_dim(x)?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        let f = (self.problem.objective)(x.coords());
        Ok(f + self.problem.noise.sample(rng))
    }
}

/// Errors from problem configuration and lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    DimensionMismatch { expected: usize, got: usize },
    UnknownProblem { name: String },
    InvalidDimension { name: String, dim: usize },
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            OracleError::UnknownProblem { name } => write!(f, "unknown problem `{name}`"),
            OracleError::InvalidDimension { name, dim } => {
                write!(f, "problem `{name}` does not support dimension {dim}")
            }
        }
    }
}

impl core::error::Error for OracleError {}

/// `f(x) = ||x||^2`, minimizer at the origin.
pub fn noisy_sphere(dim: usize, noise: NoiseModel) -> TestProblem {
    TestProblem::new("noisy-sphere", dim, noise, |x| {
        x.iter().map(|v| v * v).sum()
    })
    .with_gradient(|x| x.iter().map(|v| 2.0 * v).collect())
    .with_lipschitz_hint(2.0)
    .with_minimizer(Point::new(alloc::vec![0.0; dim]))
}

/// `f(x) = 1/2 x'Qx` with `Q = diag` log-spaced from 1 to `condition`;
/// minimizer at the origin.
pub fn noisy_quadratic(dim: usize, condition: f64, noise: NoiseModel) -> TestProblem {
    assert!(condition >= 1.0 && condition.is_finite());
    let q: Vec<f64> = (0..dim)
        .map(|i| {
            if dim <= 1 {
                1.0
            } else {
                condition.powf(i as f64 / (dim - 1) as f64)
            }
        })
        .collect();
    let qg = q.clone();
    TestProblem::new("noisy-quadratic", dim, noise, move |x| {
        0.5 * x.iter().zip(q.iter()).map(|(v, qi)| qi * v * v).sum::<f64>()
    })
    .with_gradient(move |x| x.iter().zip(qg.iter()).map(|(v, qi)| qi * v).collect())
    .with_lipschitz_hint(condition)
    .with_minimizer(Point::new(alloc::vec![0.0; dim]))
}

/// Chained Rosenbrock, minimizer at `(1, ..., 1)`. Requires `dim >= 2`.
pub fn noisy_rosenbrock(dim: usize, noise: NoiseModel) -> Result<TestProblem, OracleError> {
    if dim < 2 {
        return Err(OracleError::InvalidDimension {
            name: String::from("noisy-rosenbrock"),
            dim,
        });
    }
    Ok(TestProblem::new("noisy-rosenbrock", dim, noise, |x| {
        let mut f = 0.0;
        for i in 0..x.len() - 1 {
            let a = x[i + 1] - x[i] * x[i];
            let b = 1.0 - x[i];
            f += 100.0 * a * a + b * b;
        }
        f
    })
    .with_gradient(|x| {
        let d = x.len();
        let mut g = alloc::vec![0.0; d];
        for i in 0..d - 1 {
            let a = x[i + 1] - x[i] * x[i];
            g[i] += -400.0 * x[i] * a - 2.0 * (1.0 - x[i]);
            g[i + 1] += 200.0 * a;
        }
        g
    })
    .with_minimizer(Point::new(alloc::vec![1.0; dim])))
}

/// Names accepted by [`builtin_problem`].
pub fn builtin_names() -> [&'static str; 3] {
    ["noisy-sphere", "noisy-quadratic", "noisy-rosenbrock"]
}

/// Registry lookup by name. The quadratic uses condition number 10 here; use
/// [`noisy_quadratic`] directly for other conditionings.
pub fn builtin_problem(
    name: &str,
    dim: usize,
    noise: NoiseModel,
) -> Result<TestProblem, OracleError> {
    match name {
        "noisy-sphere" => Ok(noisy_sphere(dim, noise)),
        "noisy-quadratic" => Ok(noisy_quadratic(dim, 10.0, noise)),
        "noisy-rosenbrock" => noisy_rosenbrock(dim, noise),
        _ => Err(OracleError::UnknownProblem {
            name: String::from(name),
        }),
    }
}
