//! Adaptive sampling stopping rules and the sample-size floor sequence.
//!
//! Both the model-construction (inner) and candidate-evaluation (outer) rules
//! have the same shape: replicate at a point until the estimated standard
//! error of the mean drops below `kappa * delta^2 / sqrt(lambda_k)`, subject
//! to the floor `n >= lambda_k`. The resulting sample size is a stopping time:
//! the decision to continue depends only on replicates already drawn.

use crate::oracle::{NoiseModel, Oracle, OracleError, Point, ReplicationStats, RngStream};
use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

/// Floor sequence `lambda_k = ceil(lambda0 * (k+1)^(1+epsilon))`.
///
/// Minimal polynomial growth keeps early iterations cheap while still growing
/// superlinearly in the iteration count, which is what protects the solver
/// from unlucky early estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSchedule {
    lambda0: u64,
    epsilon: f64,
}

impl LambdaSchedule {
    /// `lambda0 >= 2`, `epsilon > 0`.
    pub fn new(lambda0: u64, epsilon: f64) -> Self {
        assert!(lambda0 >= 2, "lambda0 must be at least 2");
        assert!(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be > 0");
        LambdaSchedule { lambda0, epsilon }
    }

    pub fn lambda0(&self) -> u64 {
        self.lambda0
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lambda_at(&self, k: usize) -> u64 {
        let v = self.lambda0 as f64 * ((k + 1) as f64).powf(1.0 + self.epsilon);
        if v >= u64::MAX as f64 {
            u64::MAX
        } else {
            v.ceil() as u64
        }
    }
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        LambdaSchedule::new(2, 0.1)
    }
}

/// One instantiation of the stopping rule: threshold `kappa*delta^2/sqrt(lambda)`
/// with floor `lambda_k`, plus an optional hard cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingRule {
    pub kappa: f64,
    pub lambda_k: u64,
    pub delta: f64,
    pub cap: Option<u64>,
}

impl SamplingRule {
    pub fn new(kappa: f64, lambda_k: u64, delta: f64) -> Self {
        assert!(kappa > 0.0 && kappa.is_finite());
        assert!(lambda_k >= 2);
        assert!(delta > 0.0 && delta.is_finite());
        SamplingRule {
            kappa,
            lambda_k,
            delta,
            cap: None,
        }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = Some(cap);
        self
    }

    /// The standard-error threshold `kappa * delta^2 / sqrt(lambda_k)`.
    pub fn threshold(&self) -> f64 {
        self.kappa * self.delta * self.delta / (self.lambda_k as f64).sqrt()
    }

    /// True when sampling may stop: the floor is met and the estimated
    /// standard error is within the threshold. With fewer than 2 replicates
    /// the standard error is treated as infinite.
    pub fn is_satisfied(&self, stats: &ReplicationStats) -> bool {
        if let Some(cap) = self.cap {
            if stats.n() >= cap {
                return true;
            }
        }
        stats.n() >= self.lambda_k && stats.n() >= 2 && stats.std_error() <= self.threshold()
    }
}

/// How many replicates to add between rule checks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SampleGrowth {
    /// Check after every replicate: the exact `min{n : ...}` semantics.
    #[default]
    OneAtATime,
    /// Grow the sample geometrically (e.g. 1.1x) between checks. Faster, and
    /// a documented approximation of the exact stopping time.
    Geometric(f64),
}

/// Result of running a stopping rule at one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingOutcome {
    /// Final sample size at the point.
    pub n: u64,
    /// Replicates drawn by this invocation.
    pub drawn: u64,
    /// True when the oracle budget ran out before the rule was satisfied.
    pub truncated: bool,
}

/// Replicate at `x` until `rule` is satisfied, resuming from whatever `stats`
/// already contains. Never discards replicates, so the final `n` can only
/// grow across repeated visits to the same point.
///
/// `budget` is the global cap on `oracle.calls()`; when it is hit mid-rule the
/// partial statistics are kept and the outcome is flagged truncated.
pub fn sample_to_stopping(
    oracle: &Oracle<'_>,
    x: &Point,
    stats: &mut ReplicationStats,
    stream: &mut RngStream,
    rule: &SamplingRule,
    budget: u64,
    growth: SampleGrowth,
) -> Result<SamplingOutcome, OracleError> {
    let mut drawn = 0u64;
    loop {
        if rule.is_satisfied(stats) {
            return Ok(SamplingOutcome {
                n: stats.n(),
                drawn,
                truncated: false,
            });
        }
        // Target for the next check: the floor first, then one-by-one or
        // geometric growth while the standard error is still too large.
        let floor = rule.lambda_k.max(2);
        let target = if stats.n() < floor {
            floor
        } else {
            match growth {
                SampleGrowth::OneAtATime => stats.n() + 1,
                SampleGrowth::Geometric(factor) => {
                    let t = ((stats.n() as f64) * factor).ceil() as u64;
                    t.max(stats.n() + 1)
                }
            }
        };
        let target = match rule.cap {
            Some(cap) => target.min(cap),
            None => target,
        };
        while stats.n() < target {
            if oracle.calls() >= budget {
                return Ok(SamplingOutcome {
                    n: stats.n(),
                    drawn,
                    truncated: true,
                });
            }
            stats.push(oracle.observe(x, stream)?);
            drawn += 1;
        }
    }
}

/// One row of the stopping-rule calibration table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRow {
    pub lambda: u64,
    /// Mean stopping time over the replications.
    pub mean_n: f64,
    /// `mean_n * kappa^2 * delta^4 / (sigma^2 * lambda)`; tends to 1.
    pub ratio_n: f64,
    /// Mean squared sample mean at stopping.
    pub mean_sq_mean: f64,
    /// `mean_sq_mean * lambda / kappa^2`; tends to 1 for delta = 1.
    pub ratio_msm: f64,
}

/// Monte Carlo calibration of the stopping rule on iid centered noise.
///
/// For each `lambda` the rule is run `reps` times from scratch; the table
/// reports the mean stopping time and the mean squared sample mean at
/// stopping, each alongside its theoretical normalization.
pub fn calibrate_stopping(
    noise: &NoiseModel,
    kappa: f64,
    delta: f64,
    lambda_grid: &[u64],
    reps: u32,
    seed: u64,
) -> Vec<CalibrationRow> {
    assert!(reps >= 1);
    let sigma2 = noise.sigma * noise.sigma;
    let mut rows = Vec::with_capacity(lambda_grid.len());
    for (li, &lambda) in lambda_grid.iter().enumerate() {
        let rule = SamplingRule::new(kappa, lambda.max(2), delta);
        let threshold = rule.threshold();
        let mut sum_n = 0.0;
        let mut sum_sq_mean = 0.0;
        for rep in 0..reps {
            let mut stream = RngStream::new(seed, ((li as u64) << 32) | rep as u64);
            let mut stats = ReplicationStats::new();
            while !(stats.n() >= rule.lambda_k
                && stats.n() >= 2
                && stats.std_error() <= threshold)
            {
                stats.push(noise.sample(&mut stream));
            }
            sum_n += stats.n() as f64;
            sum_sq_mean += stats.mean() * stats.mean();
        }
        let mean_n = sum_n / reps as f64;
        let mean_sq_mean = sum_sq_mean / reps as f64;
        let d4 = delta.powi(4);
        rows.push(CalibrationRow {
            lambda,
            mean_n,
            ratio_n: mean_n * kappa * kappa * d4 / (sigma2 * lambda as f64),
            mean_sq_mean,
            ratio_msm: mean_sq_mean * lambda as f64 / (kappa * kappa),
        });
    }
    rows
}
