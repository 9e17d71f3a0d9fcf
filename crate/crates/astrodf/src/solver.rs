//! The outer trust-region loop and the adaptive model-construction
//! contraction loop, with full per-iteration trace logging.
//!
//! One iteration: construct a certified model at the incumbent (contracting
//! the candidate radius until it is at most `mu` times the model gradient
//! norm, adaptively sampling every design point), solve the subproblem with a
//! Cauchy-decrease certificate, adaptively sample the candidate, and accept
//! or reject from the noisy success ratio.

use crate::geometry::{
    default_poised_set, jittered_poised_set, lagrange_polynomials, poisedness_constant,
    BasisKind, GeometryError, InterpolationSet, PolynomialBasis,
};
use crate::model::LocalModel;
use crate::oracle::{Oracle, OracleError, Point, ReplicationStats, RngStream, TestProblem};
use crate::sampling::{sample_to_stopping, LambdaSchedule, SampleGrowth, SamplingRule};
use crate::subproblem::solve_subproblem;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

/// All algorithm parameters. Defaults follow common trust-region practice;
/// every value is overridable and validated by [`SolverConfig::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Initial candidate trust-region radius.
    pub delta0: f64,
    /// Hard cap on the candidate radius.
    pub delta_max: f64,
    /// Success threshold for the ratio test (strict inequality).
    pub eta1: f64,
    /// Expansion factor on success, > 1.
    pub gamma1: f64,
    /// Contraction factor on failure, in (0, 1).
    pub gamma2: f64,
    /// Contraction factor of the model-construction loop, in (0, 1).
    pub w: f64,
    /// Radius/gradient balance: the loop exits once the construction radius
    /// is at most `mu * ||grad M||`.
    pub mu: f64,
    /// Gradient inflation constant for the returned radius, 0 < beta < mu.
    pub beta: f64,
    /// Inner (model-construction) sampling constant.
    pub kappa_ias: f64,
    /// Outer (candidate-evaluation) sampling constant.
    pub kappa_oas: f64,
    /// Required fraction of Cauchy decrease, in (0, 1].
    pub kappa_fcd: f64,
    /// Sample-size floor sequence parameters: `lambda0 * (k+1)^(1+epsilon)`.
    pub lambda0: u64,
    pub epsilon: f64,
    /// Interpolation model degree.
    pub basis: BasisKind,
    /// Total oracle-call budget for the run.
    pub budget: u64,
    /// Radius below which the run is declared converged.
    pub delta_min: f64,
    /// Cap on contraction-loop iterations per model construction.
    pub j_max: u32,
    /// Monitor threshold for the model Hessian norm (logged, not enforced).
    pub kappa_bhm: f64,
    /// Base seed; all streams of a run derive from it.
    pub seed: u64,
    /// Condition-estimate limit above which a set is declared not poised.
    pub max_condition: f64,
    /// Replicates per stopping-rule check.
    pub growth: SampleGrowth,
    /// Reuse nearby evaluated points (rejected candidates, previous stencil
    /// points) when they keep the poisedness estimate below `lambda_max`.
    pub reuse_points: bool,
    /// Poisedness threshold for point reuse.
    pub lambda_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            delta0: 1.0,
            delta_max: 1e3,
            eta1: 0.1,
            gamma1: 1.2,
            gamma2: 0.9,
            w: 0.9,
            mu: 1e2,
            beta: 50.0,
            kappa_ias: 1.0,
            kappa_oas: 1.0,
            kappa_fcd: 0.5,
            lambda0: 2,
            epsilon: 0.1,
            basis: BasisKind::Quadratic,
            budget: 200_000,
            delta_min: 1e-6,
            j_max: 200,
            kappa_bhm: 1e3,
            seed: 0,
            max_condition: 1e8,
            growth: SampleGrowth::OneAtATime,
            reuse_points: false,
            lambda_max: 100.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check(ok: bool, parameter: &'static str, message: &str) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError {
                    parameter,
                    message: String::from(message),
                })
            }
        }
        check(
            self.delta0 > 0.0 && self.delta0.is_finite(),
            "delta0",
            "must be positive",
        )?;
        check(self.delta_max >= self.delta0, "delta_max", "must be >= delta0")?;
        check(
            self.eta1 > 0.0 && self.eta1 < 1.0,
            "eta1",
            "must be in (0, 1)",
        )?;
        check(self.gamma1 > 1.0, "gamma1", "must be > 1")?;
        check(
            self.gamma2 > 0.0 && self.gamma2 < 1.0,
            "gamma2",
            "must be in (0, 1)",
        )?;
        check(self.w > 0.0 && self.w < 1.0, "w", "must be in (0, 1)")?;
        check(self.mu > 0.0 && self.mu.is_finite(), "mu", "must be positive")?;
        check(
            self.beta > 0.0 && self.beta < self.mu,
            "beta",
            "must satisfy 0 < beta < mu",
        )?;
        check(
            self.kappa_ias > 0.0 && self.kappa_ias.is_finite(),
            "kappa_ias",
            "must be positive",
        )?;
        check(
            self.kappa_oas > 0.0 && self.kappa_oas.is_finite(),
            "kappa_oas",
            "must be positive",
        )?;
        check(
            self.kappa_fcd > 0.0 && self.kappa_fcd <= 1.0,
            "kappa_fcd",
            "must be in (0, 1]",
        )?;
        check(self.lambda0 >= 2, "lambda0", "must be at least 2")?;
        check(
            self.epsilon > 0.0 && self.epsilon.is_finite(),
            "epsilon",
            "must be positive",
        )?;
        check(
            self.delta_min > 0.0 && self.delta_min < self.delta0,
            "delta_min",
            "must be in (0, delta0)",
        )?;
        check(self.j_max >= 1, "j_max", "must be at least 1")?;
        check(
            self.kappa_bhm > 0.0,
            "kappa_bhm",
            "must be positive",
        )?;
        check(
            self.max_condition > 1.0,
            "max_condition",
            "must be > 1",
        )?;
        check(
            self.lambda_max >= 1.0,
            "lambda_max",
            "must be at least 1",
        )?;
        if let SampleGrowth::Geometric(f) = self.growth {
            check(f > 1.0 && f.is_finite(), "growth", "factor must be > 1")?;
        }
        Ok(())
    }

    pub fn lambda_schedule(&self) -> LambdaSchedule {
        LambdaSchedule::new(self.lambda0, self.epsilon)
    }
}

/// A configuration parameter violated its constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub parameter: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config parameter `{}`: {}", self.parameter, self.message)
    }
}

impl core::error::Error for ConfigError {}

/// Errors that can abort a run before it terminates normally.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    Config(ConfigError),
    Oracle(OracleError),
    Geometry(GeometryError),
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::Config(e) => write!(f, "{e}"),
            SolverError::Oracle(e) => write!(f, "{e}"),
            SolverError::Geometry(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SolverError {}

impl From<ConfigError> for SolverError {
    fn from(e: ConfigError) -> Self {
        SolverError::Config(e)
    }
}

impl From<OracleError> for SolverError {
    fn from(e: OracleError) -> Self {
        SolverError::Oracle(e)
    }
}

impl From<GeometryError> for SolverError {
    fn from(e: GeometryError) -> Self {
        SolverError::Geometry(e)
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    /// The oracle-call budget was exhausted.
    BudgetExhausted,
    /// The candidate radius fell below `delta_min`.
    DeltaMin,
    /// Model construction could not find a gradient to balance against at a
    /// vanishing radius; treated as convergence to a critical point.
    CriticalityStall,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TerminationReason::BudgetExhausted => "budget",
            TerminationReason::DeltaMin => "delta-min",
            TerminationReason::CriticalityStall => "criticality-stall",
        };
        f.write_str(s)
    }
}

/// One row of the run trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Incumbent at the start of the iteration.
    pub x: Vec<f64>,
    /// Estimate at the incumbent after model construction (= M(X_k)).
    pub f_bar: f64,
    /// True objective at the incumbent (test problems).
    pub f_true: f64,
    pub delta_k: f64,
    /// Success ratio; NaN for degenerate or truncated iterations.
    pub rho_hat: f64,
    pub success: bool,
    pub model_grad_norm: f64,
    pub hessian_norm: f64,
    pub lambda_hat: f64,
    /// Contraction-loop iterations spent in model construction.
    pub j_k: u32,
    pub n_center: u64,
    pub n_candidate: u64,
    pub cum_calls: u64,
}

impl IterationRecord {
    fn csv_row(&self) -> String {
        let mut row = format!("{}", self.k);
        for c in &self.x {
            row.push_str(&format!(",{}", c));
        }
        row.push_str(&format!(
            ",{},{},{},{},{},{},{},{},{},{},{},{}",
            self.f_bar,
            self.f_true,
            self.delta_k,
            self.rho_hat,
            self.success,
            self.model_grad_norm,
            self.hessian_norm,
            self.lambda_hat,
            self.j_k,
            self.n_center,
            self.n_candidate,
            self.cum_calls
        ));
        row
    }
}

/// Header for the trace CSV at a given dimension.
pub fn trace_csv_header(dim: usize) -> String {
    let mut h = String::from("k");
    for i in 0..dim {
        h.push_str(&format!(",x_{}", i));
    }
    h.push_str(
        ",f_bar,f_true,delta_k,rho_hat,success,model_grad_norm,hessian_norm,lambda_hat,j_k,n_center,n_candidate,cum_calls",
    );
    h
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_point: Point,
    pub final_f_bar: f64,
    pub final_n: u64,
    pub iterations: usize,
    pub total_calls: u64,
    pub termination: TerminationReason,
    pub trace: Vec<IterationRecord>,
    /// Iterations whose model Hessian norm exceeded `kappa_bhm`. Monitoring
    /// only; the Hessian is never altered (that would break interpolation).
    pub hessian_warnings: u32,
}

impl RunResult {
    /// The whole trace as CSV, bit-deterministic for a given (config, seed).
    pub fn trace_csv(&self) -> String {
        let mut out = trace_csv_header(self.final_point.dim());
        out.push('\n');
        for r in &self.trace {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let coords: Vec<String> = self
            .final_point
            .coords()
            .iter()
            .map(|c| format!("{}", c))
            .collect();
        format!(
            "final_x: {}\nfinal_f_bar: {}\ntotal_calls: {}\niterations: {}\ntermination_reason: {}\n",
            coords.join(","),
            self.final_f_bar,
            self.total_calls,
            self.iterations,
            self.termination
        )
    }
}

/// A design point together with its replication statistics and the RNG
/// stream that owns its replicate sequence. Keeping the stream with the
/// point makes resampling a resumption, never a restart.
#[derive(Debug, Clone)]
pub struct EvaluatedPoint {
    pub point: Point,
    pub stats: ReplicationStats,
    pub stream: RngStream,
}

impl EvaluatedPoint {
    pub fn fresh(point: Point, stream: RngStream) -> Self {
        EvaluatedPoint {
            point,
            stats: ReplicationStats::new(),
            stream,
        }
    }
}

/// Hands out fresh, mutually independent streams for new design points.
#[derive(Debug, Clone)]
pub struct StreamAllocator {
    seed: u64,
    next_id: u64,
}

impl StreamAllocator {
    pub fn new(seed: u64, first_id: u64) -> Self {
        StreamAllocator {
            seed,
            next_id: first_id,
        }
    }

    pub fn next_stream(&mut self) -> RngStream {
        let id = self.next_id;
        self.next_id += 1;
        RngStream::new(self.seed, id)
    }
}

/// How the contraction loop exited.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmcExit {
    /// Radius balanced against the model gradient: the normal exit.
    Balanced,
    /// Hit the contraction-iteration cap.
    JMax,
    /// The next contraction radius would fall below `delta_min`.
    RadiusFloor,
}

/// Output of the model-construction loop.
#[derive(Debug, Clone)]
pub struct ModelConstruction {
    pub model: LocalModel,
    pub set: InterpolationSet,
    pub estimates: Vec<f64>,
    /// Radius of the pass that produced the accepted model.
    pub construction_radius: f64,
    /// Updated incumbent radius `min(delta_tilde, max(beta ||g||, radius))`.
    pub delta_k: f64,
    pub j_k: u32,
    pub lambda_hat: f64,
    pub exit: AmcExit,
}

/// Outcome of model construction including the budget-truncation case.
#[derive(Debug, Clone)]
pub enum AmcOutcome {
    Done(ModelConstruction),
    /// Budget exhausted mid-construction; carries the best completed pass.
    Truncated {
        best: Option<ModelConstruction>,
        j_k: u32,
    },
}

/// The returned-radius formula of the construction loop.
fn construction_delta(delta_tilde: f64, grad_norm: f64, beta: f64, radius: f64) -> f64 {
    delta_tilde.min((beta * grad_norm).max(radius))
}

/// Build a poised set, adaptively sample every point, and fit a model,
/// contracting the radius by `w` until it is at most `mu` times the model
/// gradient norm (or a safeguard trips).
///
/// The incumbent's statistics are shared across passes: its sampling resumes
/// and its sample size never decreases. Fresh stencil points get fresh
/// streams from `streams`; with `config.reuse_points` nearby points from
/// `pool` are swapped in when they keep the set certified.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_model_construction(
    oracle: &Oracle<'_>,
    incumbent: &mut EvaluatedPoint,
    delta_tilde: f64,
    k: usize,
    config: &SolverConfig,
    streams: &mut StreamAllocator,
    pool: &mut Vec<EvaluatedPoint>,
    jitter_rng: &mut RngStream,
) -> Result<AmcOutcome, SolverError> {
    let basis = PolynomialBasis::new(config.basis, incumbent.point.dim());
    let lambda_k = config.lambda_schedule().lambda_at(k);
    let mut best: Option<ModelConstruction> = None;

    let mut j: u32 = 1;
    loop {
        let radius = delta_tilde * config.w.powi(j as i32 - 1);
        if j > 1 && radius < config.delta_min {
            // Contracting further would go below the resolution floor; hand
            // back the last completed pass as a criticality signal.
            let mut mc = best.expect("pass j-1 completed before the floor check");
            mc.exit = AmcExit::RadiusFloor;
            return Ok(AmcOutcome::Done(mc));
        }

        let rule = SamplingRule::new(config.kappa_ias, lambda_k, radius);

        // Sample the center first; it persists across passes and iterations.
        let out = sample_to_stopping(
            oracle,
            &incumbent.point,
            &mut incumbent.stats,
            &mut incumbent.stream,
            &rule,
            config.budget,
            config.growth,
        )?;
        if out.truncated {
            return Ok(AmcOutcome::Truncated { best, j_k: j });
        }

        // Assemble the design set and sample the off-center points. Retry
        // with a rotated stencil if the geometry check rejects the set.
        let mut fitted: Option<(InterpolationSet, Vec<f64>, LocalModel, Vec<EvaluatedPoint>)> =
            None;
        for attempt in 0..3 {
            let set = build_set(&incumbent.point, radius, &basis, config, pool, jitter_rng, attempt)?;
            let mut members: Vec<EvaluatedPoint> = Vec::with_capacity(set.len() - 1);
            for point in set.points().iter().skip(1) {
                members.push(take_or_fresh(pool, point, streams, config.reuse_points));
            }
            let mut truncated = false;
            for member in members.iter_mut() {
                let out = sample_to_stopping(
                    oracle,
                    &member.point,
                    &mut member.stats,
                    &mut member.stream,
                    &rule,
                    config.budget,
                    config.growth,
                )?;
                if out.truncated {
                    truncated = true;
                    break;
                }
            }
            if truncated {
                return Ok(AmcOutcome::Truncated { best, j_k: j });
            }
            let mut estimates = Vec::with_capacity(set.len());
            estimates.push(incumbent.stats.mean());
            estimates.extend(members.iter().map(|m| m.stats.mean()));
            match LocalModel::fit(&basis, &set, &estimates, config.max_condition) {
                Ok(model) => {
                    fitted = Some((set, estimates, model, members));
                    break;
                }
                Err(GeometryError::IllConditioned { .. }) if attempt < 2 => continue,
                Err(e) => return Err(e.into()),
            }
        }
        let (set, estimates, model, members) =
            fitted.expect("stencil fit retries exhausted; objective produced non-finite values?");

        // Keep evaluated points available for reuse.
        if config.reuse_points {
            for m in members {
                push_pool(pool, m);
            }
        }

        let grad_norm = model.gradient_norm();
        let lagrange = lagrange_polynomials(&basis, &set, config.max_condition)?;
        let lambda_hat = poisedness_constant(&set, &lagrange, &set.ball());
        let mc = ModelConstruction {
            delta_k: construction_delta(delta_tilde, grad_norm, config.beta, radius),
            construction_radius: radius,
            j_k: j,
            lambda_hat,
            exit: AmcExit::Balanced,
            model,
            set,
            estimates,
        };

        if radius <= config.mu * grad_norm {
            return Ok(AmcOutcome::Done(mc));
        }
        if j >= config.j_max {
            let mut mc = mc;
            mc.exit = AmcExit::JMax;
            return Ok(AmcOutcome::Done(mc));
        }
        best = Some(mc);
        j += 1;
    }
}

/// Stencil assembly: default axis-aligned stencil on attempt 0 (optionally
/// with pool reuse), rotated stencils on retries.
fn build_set(
    center: &Point,
    radius: f64,
    basis: &PolynomialBasis,
    config: &SolverConfig,
    pool: &[EvaluatedPoint],
    jitter_rng: &mut RngStream,
    attempt: u32,
) -> Result<InterpolationSet, SolverError> {
    if attempt > 0 {
        return Ok(jittered_poised_set(center, radius, basis, jitter_rng));
    }
    let stencil = default_poised_set(center, radius, basis);
    if !config.reuse_points || pool.is_empty() {
        return Ok(stencil);
    }
    // Swap stencil points for nearby already-evaluated ones when the swapped
    // set still certifies below lambda_max.
    let mut points: Vec<Point> = stencil.points().to_vec();
    let mut used: Vec<usize> = Vec::new();
    for slot in 1..points.len() {
        let mut best_idx: Option<usize> = None;
        let mut best_dist = 0.35 * radius;
        for (pi, cand) in pool.iter().enumerate() {
            if used.contains(&pi) {
                continue;
            }
            if center.distance_to(&cand.point) > radius {
                continue;
            }
            let dist = cand.point.distance_to(&points[slot]);
            if dist < best_dist {
                best_dist = dist;
                best_idx = Some(pi);
            }
        }
        if let Some(pi) = best_idx {
            points[slot] = pool[pi].point.clone();
            used.push(pi);
        }
    }
    if used.is_empty() {
        return Ok(stencil);
    }
    let swapped = match InterpolationSet::new(center.clone(), points, radius) {
        Ok(s) => s,
        Err(_) => return Ok(stencil),
    };
    match lagrange_polynomials(basis, &swapped, config.max_condition) {
        Ok(lagrange) => {
            let lambda = poisedness_constant(&swapped, &lagrange, &swapped.ball());
            if lambda <= config.lambda_max {
                Ok(swapped)
            } else {
                Ok(stencil)
            }
        }
        Err(_) => Ok(stencil),
    }
}

/// Take the pool entry at exactly this point if present, else a fresh one.
fn take_or_fresh(
    pool: &mut Vec<EvaluatedPoint>,
    point: &Point,
    streams: &mut StreamAllocator,
    reuse: bool,
) -> EvaluatedPoint {
    if reuse {
        if let Some(idx) = pool.iter().position(|e| &e.point == point) {
            return pool.swap_remove(idx);
        }
    }
    EvaluatedPoint::fresh(point.clone(), streams.next_stream())
}

const POOL_CAP: usize = 64;

fn push_pool(pool: &mut Vec<EvaluatedPoint>, entry: EvaluatedPoint) {
    if pool.len() >= POOL_CAP {
        pool.remove(0);
    }
    pool.push(entry);
}

/// The success ratio `(F(X_k) - F(cand)) / (M(X_k) - M(cand))`.
///
/// Fails when the model decrease is nonpositive; the caller must treat the
/// iteration as unsuccessful.
pub fn success_ratio(
    f_bar_center: f64,
    f_bar_candidate: f64,
    model: &LocalModel,
    candidate: &Point,
) -> Result<f64, DegenerateIteration> {
    let denominator = model.value_at_center() - model.eval(candidate);
    if denominator <= 0.0 || !denominator.is_finite() {
        return Err(DegenerateIteration { denominator });
    }
    Ok((f_bar_center - f_bar_candidate) / denominator)
}

/// The model predicted no decrease at the candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegenerateIteration {
    pub denominator: f64,
}

impl fmt::Display for DegenerateIteration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "nonpositive model decrease {}", self.denominator)
    }
}

impl core::error::Error for DegenerateIteration {}

/// Radius update: expand (capped) on success, contract otherwise. A ratio of
/// exactly `eta1` — or NaN from a degenerate iteration — contracts.
pub fn update_trust_region(
    rho_hat: f64,
    eta1: f64,
    delta_k: f64,
    gamma1: f64,
    gamma2: f64,
    delta_max: f64,
) -> f64 {
    if rho_hat > eta1 {
        (gamma1 * delta_k).min(delta_max)
    } else {
        gamma2 * delta_k
    }
}

/// Whether an iteration finished or the run should stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationOutcome {
    Continue,
    Terminated(TerminationReason),
}

/// Solver state for one run.
pub struct Solver<'a> {
    problem: &'a TestProblem,
    config: SolverConfig,
    oracle: Oracle<'a>,
    k: usize,
    incumbent: EvaluatedPoint,
    delta_tilde: f64,
    streams: StreamAllocator,
    jitter_rng: RngStream,
    pool: Vec<EvaluatedPoint>,
    trace: Vec<IterationRecord>,
    hessian_warnings: u32,
}

impl<'a> Solver<'a> {
    pub fn new(
        problem: &'a TestProblem,
        x0: Point,
        config: SolverConfig,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        if x0.dim() != problem.dim() {
            return Err(OracleError::DimensionMismatch {
                expected: problem.dim(),
                got: x0.dim(),
            }
            .into());
        }
        // Stream 0 is the jitter stream, 1 the incumbent, 2+ design points.
        let jitter_rng = RngStream::new(config.seed, 0);
        let incumbent = EvaluatedPoint::fresh(x0, RngStream::new(config.seed, 1));
        Ok(Solver {
            problem,
            oracle: Oracle::new(problem),
            k: 0,
            incumbent,
            delta_tilde: config.delta0,
            streams: StreamAllocator::new(config.seed, 2),
            jitter_rng,
            pool: Vec::new(),
            trace: Vec::new(),
            hessian_warnings: 0,
            config,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn delta_tilde(&self) -> f64 {
        self.delta_tilde
    }

    pub fn incumbent(&self) -> &EvaluatedPoint {
        &self.incumbent
    }

    pub fn calls(&self) -> u64 {
        self.oracle.calls()
    }

    pub fn trace(&self) -> &[IterationRecord] {
        &self.trace
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// One full iteration: model construction, subproblem, candidate
    /// evaluation, ratio test, and trust-region update.
    pub fn iterate(&mut self) -> Result<IterationOutcome, SolverError> {
        if self.oracle.calls() >= self.config.budget {
            return Ok(IterationOutcome::Terminated(TerminationReason::BudgetExhausted));
        }
        if self.delta_tilde < self.config.delta_min {
            return Ok(IterationOutcome::Terminated(TerminationReason::DeltaMin));
        }

        let k = self.k;
        let lambda_k = self.config.lambda_schedule().lambda_at(k);
        let x_start = self.incumbent.point.clone();

        let amc = adaptive_model_construction(
            &self.oracle,
            &mut self.incumbent,
            self.delta_tilde,
            k,
            &self.config,
            &mut self.streams,
            &mut self.pool,
            &mut self.jitter_rng,
        )?;
        let mc = match amc {
            AmcOutcome::Truncated { best, j_k } => {
                self.push_truncated_record(&x_start, best.as_ref(), j_k, 0);
                return Ok(IterationOutcome::Terminated(TerminationReason::BudgetExhausted));
            }
            AmcOutcome::Done(mc) => mc,
        };
        if mc.exit == AmcExit::RadiusFloor {
            // Gradient too small to balance at the resolution floor; the
            // paper's own convergence signal.
            return Ok(IterationOutcome::Terminated(TerminationReason::CriticalityStall));
        }
        debug_assert!(
            (self.incumbent.stats.mean() - mc.model.value_at_center()).abs()
                <= 1e-7 * (1.0 + self.incumbent.stats.mean().abs()),
            "interpolation must reproduce the center estimate"
        );
        let n_center = self.incumbent.stats.n();
        let f_bar_center = self.incumbent.stats.mean();
        if mc.model.hessian_norm() > self.config.kappa_bhm {
            self.hessian_warnings += 1;
        }

        // Trust-region subproblem with the Cauchy-decrease certificate.
        let step = solve_subproblem(&mc.model, mc.delta_k, self.config.kappa_fcd);
        let candidate_point = self.incumbent.point.offset(&step.s);

        let mut rho_hat = f64::NAN;
        let mut success = false;
        let mut n_candidate = 0u64;
        if !step.is_zero() {
            // Evaluate the candidate with the outer rule.
            let rule = SamplingRule::new(self.config.kappa_oas, lambda_k, mc.delta_k);
            let mut candidate =
                EvaluatedPoint::fresh(candidate_point.clone(), self.streams.next_stream());
            let out = sample_to_stopping(
                &self.oracle,
                &candidate.point,
                &mut candidate.stats,
                &mut candidate.stream,
                &rule,
                self.config.budget,
                self.config.growth,
            )?;
            if out.truncated {
                self.push_truncated_record_with_model(&x_start, &mc, n_center, candidate.stats.n());
                return Ok(IterationOutcome::Terminated(TerminationReason::BudgetExhausted));
            }
            n_candidate = candidate.stats.n();

            match success_ratio(
                f_bar_center,
                candidate.stats.mean(),
                &mc.model,
                &candidate.point,
            ) {
                Ok(r) => {
                    rho_hat = r;
                    success = r > self.config.eta1;
                }
                Err(_) => {
                    rho_hat = f64::NAN;
                    success = false;
                }
            }

            if success {
                let old = core::mem::replace(&mut self.incumbent, candidate);
                push_pool(&mut self.pool, old);
            } else {
                push_pool(&mut self.pool, candidate);
            }
        }

        self.delta_tilde = update_trust_region(
            rho_hat,
            self.config.eta1,
            mc.delta_k,
            self.config.gamma1,
            self.config.gamma2,
            self.config.delta_max,
        );

        self.trace.push(IterationRecord {
            k,
            x: x_start.coords().to_vec(),
            f_bar: f_bar_center,
            f_true: self.problem.true_value(&x_start)?,
            delta_k: mc.delta_k,
            rho_hat,
            success,
            model_grad_norm: mc.model.gradient_norm(),
            hessian_norm: mc.model.hessian_norm(),
            lambda_hat: mc.lambda_hat,
            j_k: mc.j_k,
            n_center,
            n_candidate,
            cum_calls: self.oracle.calls(),
        });
        self.k += 1;
        Ok(IterationOutcome::Continue)
    }

    fn push_truncated_record(
        &mut self,
        x_start: &Point,
        best: Option<&ModelConstruction>,
        j_k: u32,
        n_candidate: u64,
    ) {
        let f_true = self.problem.true_value(x_start).unwrap_or(f64::NAN);
        let (delta_k, grad, hess, lambda_hat) = match best {
            Some(mc) => (
                mc.delta_k,
                mc.model.gradient_norm(),
                mc.model.hessian_norm(),
                mc.lambda_hat,
            ),
            None => (self.delta_tilde, f64::NAN, f64::NAN, f64::NAN),
        };
        self.trace.push(IterationRecord {
            k: self.k,
            x: x_start.coords().to_vec(),
            f_bar: self.incumbent.stats.mean(),
            f_true,
            delta_k,
            rho_hat: f64::NAN,
            success: false,
            model_grad_norm: grad,
            hessian_norm: hess,
            lambda_hat,
            j_k,
            n_center: self.incumbent.stats.n(),
            n_candidate,
            cum_calls: self.oracle.calls(),
        });
        self.k += 1;
    }

    fn push_truncated_record_with_model(
        &mut self,
        x_start: &Point,
        mc: &ModelConstruction,
        n_center: u64,
        n_candidate: u64,
    ) {
        let f_true = self.problem.true_value(x_start).unwrap_or(f64::NAN);
        self.trace.push(IterationRecord {
            k: self.k,
            x: x_start.coords().to_vec(),
            f_bar: self.incumbent.stats.mean(),
            f_true,
            delta_k: mc.delta_k,
            rho_hat: f64::NAN,
            success: false,
            model_grad_norm: mc.model.gradient_norm(),
            hessian_norm: mc.model.hessian_norm(),
            lambda_hat: mc.lambda_hat,
            j_k: mc.j_k,
            n_center,
            n_candidate,
            cum_calls: self.oracle.calls(),
        });
        self.k += 1;
    }

    /// Run to termination and consume the solver.
    pub fn run_to_end(mut self) -> Result<RunResult, SolverError> {
        let reason = loop {
            match self.iterate()? {
                IterationOutcome::Continue => {}
                IterationOutcome::Terminated(r) => break r,
            }
        };
        Ok(RunResult {
            final_f_bar: self.incumbent.stats.mean(),
            final_n: self.incumbent.stats.n(),
            final_point: self.incumbent.point,
            iterations: self.k,
            total_calls: self.oracle.calls(),
            termination: reason,
            trace: self.trace,
            hessian_warnings: self.hessian_warnings,
        })
    }
}

/// Convenience entry point: run the solver on a problem from `x0`.
pub fn run(
    problem: &TestProblem,
    x0: Point,
    config: &SolverConfig,
) -> Result<RunResult, SolverError> {
    Solver::new(problem, x0, config.clone())?.run_to_end()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{noisy_quadratic, noisy_sphere, NoiseModel, TestProblem};
    

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec())
    }

    #[test]
    fn config_default_is_valid() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn config_rejects_bad_parameters() {
        let mut c = SolverConfig::default();
        c.beta = c.mu + 1.0;
        let err = c.validate().unwrap_err();
        assert_eq!(err.parameter, "beta");

        let mut c = SolverConfig::default();
        c.gamma2 = 1.5;
        assert_eq!(c.validate().unwrap_err().parameter, "gamma2");
    }

    #[test]
    fn construction_delta_formula() {
        // Exit at j=1, delta_tilde=1, beta=0.5, ||g||=sqrt(5): min(1, max(1.118, 1)) = 1.
        let g5 = 5.0f64.sqrt();
        assert!((construction_delta(1.0, g5, 0.5, 1.0) - 1.0).abs() < 1e-12);
        // Exit at j=2 with w=0.5: min(1, max(0.4, 0.5)) = 0.5.
        assert!((construction_delta(1.0, 0.4, 1.0, 0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn update_trust_region_cases() {
        assert_eq!(update_trust_region(0.2, 0.1, 1.0, 2.0, 0.5, 1.5), 1.5);
        assert_eq!(update_trust_region(0.05, 0.1, 1.0, 2.0, 0.5, 1.5), 0.5);
        // Exactly eta1 contracts (strict inequality).
        assert_eq!(update_trust_region(0.1, 0.1, 1.0, 2.0, 0.5, 1.5), 0.5);
        // NaN (degenerate iteration) contracts.
        assert_eq!(update_trust_region(f64::NAN, 0.1, 1.0, 2.0, 0.5, 1.5), 0.5);
    }

    #[test]
    fn success_ratio_arithmetic() {
        let problem = noisy_sphere(2, NoiseModel::gaussian(0.0));
        let basis = PolynomialBasis::quadratic(2);
        let set = default_poised_set(&pt(&[1.0, 0.0]), 0.5, &basis);
        let estimates: Vec<f64> = set
            .points()
            .iter()
            .map(|y| problem.true_value(y).unwrap())
            .collect();
        let model = LocalModel::fit(&basis, &set, &estimates, 1e8).unwrap();
        let candidate = pt(&[0.6, 0.0]);
        let denom = model.value_at_center() - model.eval(&candidate);
        assert!(denom > 0.0);

        // Observed decrease equal to predicted: rho = 1.
        let r = success_ratio(1.0, 1.0 - denom, &model, &candidate).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        // Candidate worse than center: rho < 0.
        let r = success_ratio(1.0, 1.1, &model, &candidate).unwrap();
        assert!(r < 0.0);
        // Plain arithmetic: 0.3 / 0.6 = 0.5.
        let r = success_ratio(0.3, 0.0, &model, &candidate).unwrap();
        assert!((r - 0.3 / denom).abs() < 1e-12);
        // Degenerate: candidate where the model predicts increase.
        let uphill = pt(&[1.5, 0.0]);
        assert!(success_ratio(1.0, 0.0, &model, &uphill).is_err());
    }

    fn quick_config() -> SolverConfig {
        SolverConfig {
            budget: 50_000,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn amc_exits_immediately_with_large_gradient() {
        // f(z) = z1 + 2 z2 at the origin: ||grad M|| = sqrt(5) > 1 = radius,
        // so with mu = 1 the loop exits at j = 1 and delta_k = 1.
        let problem = TestProblem::new("plane", 2, NoiseModel::gaussian(0.0), |z| {
            z[0] + 2.0 * z[1]
        });
        let oracle = Oracle::new(&problem);
        let config = SolverConfig {
            mu: 1.0,
            beta: 0.5,
            ..quick_config()
        };
        let mut incumbent = EvaluatedPoint::fresh(pt(&[0.0, 0.0]), RngStream::new(0, 1));
        let mut streams = StreamAllocator::new(0, 2);
        let mut pool = Vec::new();
        let mut jitter = RngStream::new(0, 0);
        let out = adaptive_model_construction(
            &oracle,
            &mut incumbent,
            1.0,
            0,
            &config,
            &mut streams,
            &mut pool,
            &mut jitter,
        )
        .unwrap();
        let mc = match out {
            AmcOutcome::Done(mc) => mc,
            _ => panic!("not truncated"),
        };
        assert_eq!(mc.j_k, 1);
        assert_eq!(mc.exit, AmcExit::Balanced);
        assert!((mc.model.gradient_norm() - 5.0f64.sqrt()).abs() < 1e-8);
        assert!((mc.delta_k - 1.0).abs() < 1e-12);
        // Balanced exit keeps the radius within mu * ||grad M||.
        assert!(mc.delta_k <= config.mu * mc.model.gradient_norm() + 1e-12);
    }

    #[test]
    fn amc_contracts_until_balance() {
        // Gradient norm ~0.2 at the start: radius 1 must contract to about
        // mu * 0.2 before the loop exits.
        let problem = TestProblem::new("shallow", 2, NoiseModel::gaussian(0.0), |z| {
            0.1 * z[0] + 0.17 * z[1]
        });
        let oracle = Oracle::new(&problem);
        let config = SolverConfig {
            mu: 1.0,
            beta: 0.5,
            ..quick_config()
        };
        let mut incumbent = EvaluatedPoint::fresh(pt(&[0.0, 0.0]), RngStream::new(0, 1));
        let mut streams = StreamAllocator::new(0, 2);
        let mut pool = Vec::new();
        let mut jitter = RngStream::new(0, 0);
        let out = adaptive_model_construction(
            &oracle,
            &mut incumbent,
            1.0,
            0,
            &config,
            &mut streams,
            &mut pool,
            &mut jitter,
        )
        .unwrap();
        let mc = match out {
            AmcOutcome::Done(mc) => mc,
            _ => panic!("not truncated"),
        };
        assert_eq!(mc.exit, AmcExit::Balanced);
        assert!(mc.j_k > 1);
        let grad = mc.model.gradient_norm();
        assert!(mc.construction_radius <= config.mu * grad + 1e-12);
        // One contraction earlier the radius was still too large.
        assert!(mc.construction_radius / config.w > config.mu * grad * (1.0 - 1e-9));
    }

    #[test]
    fn amc_safeguard_at_stationary_point() {
        // Constant objective: the model gradient is 0 at every radius, so the
        // loop must hit the radius floor rather than spin forever.
        let problem = TestProblem::new("flat", 2, NoiseModel::gaussian(0.0), |_| 1.0);
        let oracle = Oracle::new(&problem);
        let config = SolverConfig {
            j_max: 10_000,
            ..quick_config()
        };
        let mut incumbent = EvaluatedPoint::fresh(pt(&[0.0, 0.0]), RngStream::new(0, 1));
        let mut streams = StreamAllocator::new(0, 2);
        let mut pool = Vec::new();
        let mut jitter = RngStream::new(0, 0);
        let out = adaptive_model_construction(
            &oracle,
            &mut incumbent,
            1.0,
            0,
            &config,
            &mut streams,
            &mut pool,
            &mut jitter,
        )
        .unwrap();
        match out {
            AmcOutcome::Done(mc) => {
                assert_eq!(mc.exit, AmcExit::RadiusFloor);
                assert!(mc.construction_radius >= config.delta_min);
            }
            _ => panic!("should not exhaust budget"),
        }
    }

    #[test]
    fn first_iteration_on_deterministic_sphere_succeeds() {
        let problem = noisy_sphere(2, NoiseModel::gaussian(0.0));
        let config = SolverConfig {
            delta0: 0.5,
            ..quick_config()
        };
        let mut solver = Solver::new(&problem, pt(&[1.0, 0.0]), config).unwrap();
        assert!(matches!(
            solver.iterate().unwrap(),
            IterationOutcome::Continue
        ));
        let rec = &solver.trace()[0];
        // Quadratic model of a quadratic is exact, so rho = 1.
        assert!(rec.success);
        assert!((rec.rho_hat - 1.0).abs() < 1e-9, "rho {}", rec.rho_hat);
        assert!(solver.incumbent().point != pt(&[1.0, 0.0]));
    }

    #[test]
    fn unsuccessful_iteration_keeps_incumbent_and_contracts() {
        // A linear model of the sphere is inexact; with eta1 near 1 the first
        // iteration must be rejected.
        let problem = noisy_sphere(2, NoiseModel::gaussian(0.0));
        let config = SolverConfig {
            basis: BasisKind::Linear,
            eta1: 0.999,
            mu: 1.0,
            beta: 0.5,
            delta0: 0.5,
            ..quick_config()
        };
        let gamma2 = config.gamma2;
        let mut solver = Solver::new(&problem, pt(&[1.0, 0.0]), config).unwrap();
        solver.iterate().unwrap();
        let rec = &solver.trace()[0];
        assert!(!rec.success);
        assert!(rec.rho_hat.is_finite() && rec.rho_hat < 0.999);
        assert_eq!(solver.incumbent().point, pt(&[1.0, 0.0]));
        assert!((solver.delta_tilde() - gamma2 * rec.delta_k).abs() < 1e-12);
    }

    #[test]
    fn zero_budget_run_is_empty() {
        let problem = noisy_sphere(2, NoiseModel::gaussian(1.0));
        let config = SolverConfig {
            budget: 0,
            ..SolverConfig::default()
        };
        let result = run(&problem, pt(&[2.0, 2.0]), &config).unwrap();
        assert!(result.trace.is_empty());
        assert_eq!(result.termination, TerminationReason::BudgetExhausted);
        assert_eq!(result.total_calls, 0);
    }

    #[test]
    fn budget_truncation_emits_final_record() {
        let problem = noisy_sphere(2, NoiseModel::gaussian(1.0));
        let config = SolverConfig {
            budget: 10,
            ..SolverConfig::default()
        };
        let result = run(&problem, pt(&[2.0, 2.0]), &config).unwrap();
        assert_eq!(result.termination, TerminationReason::BudgetExhausted);
        assert_eq!(result.trace.len(), 1);
        let rec = &result.trace[0];
        assert!(!rec.success);
        assert!(rec.rho_hat.is_nan());
        assert_eq!(rec.cum_calls, 10);
        assert_eq!(result.total_calls, 10);
    }

    #[test]
    fn deterministic_quadratic_radius_decays() {
        // Linear basis on a smooth quadratic: the recorded radius must fall
        // below 10 * delta_min before the stall, and every successful step
        // must strictly decrease the (exact) estimates.
        let problem = noisy_quadratic(2, 10.0, NoiseModel::gaussian(0.0));
        let config = SolverConfig {
            basis: BasisKind::Linear,
            mu: 0.3,
            beta: 0.15,
            budget: 800_000,
            ..SolverConfig::default()
        };
        let result = run(&problem, pt(&[2.0, 1.0]), &config).unwrap();
        // Either radius-driven exit is the convergence signal here.
        assert!(matches!(
            result.termination,
            TerminationReason::DeltaMin | TerminationReason::CriticalityStall
        ));
        let last = result.trace.last().unwrap();
        assert!(
            last.delta_k <= 10.0 * config.delta_min,
            "final delta {}",
            last.delta_k
        );
        let mut prev_fbar = f64::INFINITY;
        for rec in &result.trace {
            if rec.success {
                assert!(rec.f_bar < prev_fbar + 1e-12);
                prev_fbar = rec.f_bar;
            }
        }
    }

    #[test]
    fn hessian_monitor_warns_without_enforcing() {
        // kappa_bhm far below the true curvature: iterations warn but the
        // fitted Hessians keep their interpolated values.
        let problem = noisy_sphere(2, NoiseModel::gaussian(0.0));
        let config = SolverConfig {
            kappa_bhm: 0.1,
            budget: 5_000,
            ..SolverConfig::default()
        };
        let res = run(&problem, pt(&[1.0, 1.0]), &config).unwrap();
        assert!(res.hessian_warnings > 0);
        assert!(res.trace.iter().any(|r| r.hessian_norm > 1.5));
    }

    #[test]
    fn trace_is_bit_reproducible() {
        let problem = noisy_sphere(2, NoiseModel::gaussian(1.0));
        let config = SolverConfig {
            seed: 42,
            budget: 20_000,
            ..SolverConfig::default()
        };
        let a = run(&problem, pt(&[2.0, 2.0]), &config).unwrap();
        let b = run(&problem, pt(&[2.0, 2.0]), &config).unwrap();
        assert_eq!(a.trace_csv(), b.trace_csv());
        assert_eq!(a.summary_text(), b.summary_text());
    }

    #[test]
    fn trace_invariants_hold_on_noisy_run() {
        let problem = noisy_sphere(2, NoiseModel::gaussian(1.0));
        let config = SolverConfig {
            seed: 7,
            budget: 30_000,
            ..SolverConfig::default()
        };
        let schedule = config.lambda_schedule();
        let result = run(&problem, pt(&[2.0, 2.0]), &config).unwrap();
        assert!(!result.trace.is_empty());
        let mut prev_calls = 0;
        for rec in &result.trace {
            assert!(rec.cum_calls > prev_calls, "strictly increasing calls");
            assert!(rec.cum_calls <= config.budget);
            prev_calls = rec.cum_calls;
            let lambda_k = schedule.lambda_at(rec.k);
            assert!(rec.n_center >= lambda_k.min(config.budget));
            if rec.n_candidate > 0 && rec.cum_calls < config.budget {
                assert!(rec.n_candidate >= lambda_k);
            }
            assert!(rec.delta_k <= config.delta_max);
        }
    }

    #[test]
    fn rejected_candidates_enter_pool_and_reuse_mode_runs() {
        let problem = noisy_sphere(2, NoiseModel::gaussian(0.5));
        let config = SolverConfig {
            seed: 3,
            budget: 30_000,
            reuse_points: true,
            ..SolverConfig::default()
        };
        let result = run(&problem, pt(&[2.0, 2.0]), &config).unwrap();
        assert!(!result.trace.is_empty());
        // Reuse mode must remain reproducible.
        let again = run(&problem, pt(&[2.0, 2.0]), &config).unwrap();
        assert_eq!(result.trace_csv(), again.trace_csv());
    }

    #[test]
    fn trace_csv_shape_matches_header() {
        let problem = noisy_sphere(2, NoiseModel::gaussian(1.0));
        let config = SolverConfig {
            budget: 5_000,
            ..SolverConfig::default()
        };
        let result = run(&problem, pt(&[1.0, 1.0]), &config).unwrap();
        let csv = result.trace_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert_eq!(
            header,
            "k,x_0,x_1,f_bar,f_true,delta_k,rho_hat,success,model_grad_norm,hessian_norm,lambda_hat,j_k,n_center,n_candidate,cum_calls"
        );
        let cols = header.split(',').count();
        for line in lines {
            assert_eq!(line.split(',').count(), cols);
        }
    }
}
