//! Experiment configuration: flat `key = value` files with `#` comments and
//! dotted solver keys, plus repeatable `--override key=value` flags applied
//! on top. Writing the effective configuration back out and re-reading it
//! reproduces identical solver behavior.

use crate::CliError;
use astrodf::{BasisKind, NoiseFamily, NoiseModel, OracleError, Point, SampleGrowth, SolverConfig, TestProblem};
use std::fmt::Write as _;
use std::path::PathBuf;

/// Which builtin objective an experiment runs on.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub dim: usize,
    pub sigma: f64,
    pub family: NoiseFamily,
    /// Conditioning of the quadratic builtin.
    pub condition: f64,
    pub x0: Option<Vec<f64>>,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec {
            name: "noisy-sphere".into(),
            dim: 2,
            sigma: 1.0,
            family: NoiseFamily::Gaussian,
            condition: 10.0,
            x0: None,
        }
    }
}

impl ProblemSpec {
    pub fn noise(&self) -> NoiseModel {
        match self.family {
            NoiseFamily::Gaussian => NoiseModel::gaussian(self.sigma),
            NoiseFamily::Uniform => NoiseModel::uniform(self.sigma),
        }
    }

    /// Instantiate the problem; unknown names map to exit code 3.
    pub fn build(&self) -> Result<TestProblem, CliError> {
        let problem = match self.name.as_str() {
            "noisy-quadratic" => {
                astrodf::noisy_quadratic(self.dim, self.condition, self.noise())
            }
            "noisy-rosenbrock" => astrodf::noisy_rosenbrock(self.dim, self.noise())
                .map_err(|e| CliError::new(3, format!("{e}")))?,
            "noisy-sphere" => astrodf::noisy_sphere(self.dim, self.noise()),
            other => {
                return Err(CliError::new(
                    3,
                    format!(
                        "{}",
                        OracleError::UnknownProblem {
                            name: other.to_string()
                        }
                    ),
                ))
            }
        };
        Ok(problem)
    }

    pub fn start_point(&self) -> Point {
        match &self.x0 {
            Some(c) => Point::new(c.clone()),
            None => Point::new(vec![2.0; self.dim]),
        }
    }
}

/// Parameters of the `calibrate` subcommand.
#[derive(Debug, Clone)]
pub struct CalibrateParams {
    pub sigma: f64,
    pub family: NoiseFamily,
    pub kappa: f64,
    pub delta: f64,
    pub lambda_grid: Vec<u64>,
    pub reps: u32,
    pub seed: u64,
    pub trials: u32,
    pub dims: Vec<usize>,
    pub radii: Vec<f64>,
}

impl Default for CalibrateParams {
    fn default() -> Self {
        CalibrateParams {
            sigma: 1.0,
            family: NoiseFamily::Gaussian,
            kappa: 1.0,
            delta: 1.0,
            lambda_grid: vec![100, 1_000, 10_000],
            reps: 500,
            seed: 1234,
            trials: 1000,
            dims: vec![2, 3, 4],
            radii: vec![1.0, 0.5, 0.25, 0.125],
        }
    }
}

/// Full experiment description: problem, solver parameters, seeds, output.
#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub solver: SolverConfig,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub parallel: Option<usize>,
    pub calibrate: CalibrateParams,
}

impl ExperimentConfig {
    pub fn parse_file(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new(2, format!("cannot read config {}: {e}", path.display())))?;
        let mut config = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::new(
                    2,
                    format!("{}:{}: expected `key = value`", path.display(), lineno + 1),
                )
            })?;
            config
                .apply(key.trim(), value.trim())
                .map_err(|msg| CliError::new(2, format!("{}:{}: {msg}", path.display(), lineno + 1)))?;
        }
        config.check()?;
        Ok(config)
    }

    /// Apply a `key=value` override (the `--override` flag).
    pub fn apply_override(&mut self, spec: &str) -> Result<(), CliError> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::new(2, format!("override `{spec}`: expected key=value")))?;
        self.apply(key.trim(), value.trim())
            .map_err(|msg| CliError::new(2, format!("override: {msg}")))?;
        Ok(())
    }

    pub fn check(&self) -> Result<(), CliError> {
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(CliError::new(2, "seeds must be distinct".into()));
        }
        Ok(())
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad = |key: &str, value: &str| format!("invalid value `{value}` for key `{key}`");
        match key {
            "problem.name" => self.problem.name = value.to_string(),
            "problem.dim" => {
                self.problem.dim = value.parse().map_err(|_| bad(key, value))?;
            }
            "problem.sigma" => {
                let v: f64 = value.parse().map_err(|_| bad(key, value))?;
                if v.is_nan() || v < 0.0 {
                    return Err(bad(key, value));
                }
                self.problem.sigma = v;
            }
            "problem.noise" => {
                self.problem.family = parse_family(value).ok_or_else(|| bad(key, value))?;
            }
            "problem.condition" => {
                self.problem.condition = value.parse().map_err(|_| bad(key, value))?;
            }
            "problem.x0" => {
                self.problem.x0 = Some(parse_f64_list(value).ok_or_else(|| bad(key, value))?);
            }
            "seeds" => {
                self.seeds = parse_u64_list(value).ok_or_else(|| bad(key, value))?;
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "parallel" => {
                self.parallel = Some(value.parse().map_err(|_| bad(key, value))?);
            }
            "solver.delta0" => self.solver.delta0 = value.parse().map_err(|_| bad(key, value))?,
            "solver.delta_max" => {
                self.solver.delta_max = value.parse().map_err(|_| bad(key, value))?
            }
            "solver.eta1" => self.solver.eta1 = value.parse().map_err(|_| bad(key, value))?,
            "solver.gamma1" => self.solver.gamma1 = value.parse().map_err(|_| bad(key, value))?,
            "solver.gamma2" => self.solver.gamma2 = value.parse().map_err(|_| bad(key, value))?,
            "solver.w" => self.solver.w = value.parse().map_err(|_| bad(key, value))?,
            "solver.mu" => self.solver.mu = value.parse().map_err(|_| bad(key, value))?,
            "solver.beta" => self.solver.beta = value.parse().map_err(|_| bad(key, value))?,
            "solver.kappa_ias" => {
                self.solver.kappa_ias = value.parse().map_err(|_| bad(key, value))?
            }
            "solver.kappa_oas" => {
                self.solver.kappa_oas = value.parse().map_err(|_| bad(key, value))?
            }
            "solver.kappa_fcd" => {
                self.solver.kappa_fcd = value.parse().map_err(|_| bad(key, value))?
            }
            "solver.lambda0" => self.solver.lambda0 = value.parse().map_err(|_| bad(key, value))?,
            "solver.epsilon" => self.solver.epsilon = value.parse().map_err(|_| bad(key, value))?,
            "solver.basis" => {
                self.solver.basis = match value {
                    "linear" => BasisKind::Linear,
                    "quadratic" => BasisKind::Quadratic,
                    _ => return Err(bad(key, value)),
                };
            }
            "solver.budget" => self.solver.budget = value.parse().map_err(|_| bad(key, value))?,
            "solver.delta_min" => {
                self.solver.delta_min = value.parse().map_err(|_| bad(key, value))?
            }
            "solver.j_max" => self.solver.j_max = value.parse().map_err(|_| bad(key, value))?,
            "solver.kappa_bhm" => {
                self.solver.kappa_bhm = value.parse().map_err(|_| bad(key, value))?
            }
            "solver.seed" => self.solver.seed = value.parse().map_err(|_| bad(key, value))?,
            "solver.max_condition" => {
                self.solver.max_condition = value.parse().map_err(|_| bad(key, value))?
            }
            "solver.growth" => {
                self.solver.growth = if value == "one" {
                    SampleGrowth::OneAtATime
                } else if let Some(f) = value.strip_prefix("geometric:") {
                    SampleGrowth::Geometric(f.parse().map_err(|_| bad(key, value))?)
                } else {
                    return Err(bad(key, value));
                };
            }
            "solver.reuse_points" => {
                self.solver.reuse_points = value.parse().map_err(|_| bad(key, value))?
            }
            "solver.lambda_max" => {
                self.solver.lambda_max = value.parse().map_err(|_| bad(key, value))?
            }
            "calibrate.sigma" => {
                self.calibrate.sigma = value.parse().map_err(|_| bad(key, value))?
            }
            "calibrate.noise" => {
                self.calibrate.family = parse_family(value).ok_or_else(|| bad(key, value))?;
            }
            "calibrate.kappa" => {
                self.calibrate.kappa = value.parse().map_err(|_| bad(key, value))?
            }
            "calibrate.delta" => {
                self.calibrate.delta = value.parse().map_err(|_| bad(key, value))?
            }
            "calibrate.lambda_grid" => {
                self.calibrate.lambda_grid = parse_u64_list(value).ok_or_else(|| bad(key, value))?;
            }
            "calibrate.reps" => self.calibrate.reps = value.parse().map_err(|_| bad(key, value))?,
            "calibrate.seed" => self.calibrate.seed = value.parse().map_err(|_| bad(key, value))?,
            "calibrate.trials" => {
                self.calibrate.trials = value.parse().map_err(|_| bad(key, value))?
            }
            "calibrate.dims" => {
                let dims = parse_u64_list(value).ok_or_else(|| bad(key, value))?;
                self.calibrate.dims = dims.into_iter().map(|d| d as usize).collect();
            }
            "calibrate.radii" => {
                self.calibrate.radii = parse_f64_list(value).ok_or_else(|| bad(key, value))?;
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Serialize the full effective configuration (defaults with all
    /// overrides applied). Parsing the output reproduces this config.
    pub fn effective_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "problem.name = {}", self.problem.name);
        let _ = writeln!(s, "problem.dim = {}", self.problem.dim);
        let _ = writeln!(s, "problem.sigma = {}", self.problem.sigma);
        let _ = writeln!(
            s,
            "problem.noise = {}",
            match self.problem.family {
                NoiseFamily::Gaussian => "gaussian",
                NoiseFamily::Uniform => "uniform",
            }
        );
        let _ = writeln!(s, "problem.condition = {}", self.problem.condition);
        if let Some(x0) = &self.problem.x0 {
            let _ = writeln!(s, "problem.x0 = {}", join_f64(x0));
        }
        if !self.seeds.is_empty() {
            let seeds: Vec<String> = self.seeds.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "seeds = {}", seeds.join(","));
        }
        if let Some(p) = self.parallel {
            let _ = writeln!(s, "parallel = {}", p);
        }
        let c = &self.solver;
        let _ = writeln!(s, "solver.delta0 = {}", c.delta0);
        let _ = writeln!(s, "solver.delta_max = {}", c.delta_max);
        let _ = writeln!(s, "solver.eta1 = {}", c.eta1);
        let _ = writeln!(s, "solver.gamma1 = {}", c.gamma1);
        let _ = writeln!(s, "solver.gamma2 = {}", c.gamma2);
        let _ = writeln!(s, "solver.w = {}", c.w);
        let _ = writeln!(s, "solver.mu = {}", c.mu);
        let _ = writeln!(s, "solver.beta = {}", c.beta);
        let _ = writeln!(s, "solver.kappa_ias = {}", c.kappa_ias);
        let _ = writeln!(s, "solver.kappa_oas = {}", c.kappa_oas);
        let _ = writeln!(s, "solver.kappa_fcd = {}", c.kappa_fcd);
        let _ = writeln!(s, "solver.lambda0 = {}", c.lambda0);
        let _ = writeln!(s, "solver.epsilon = {}", c.epsilon);
        let _ = writeln!(
            s,
            "solver.basis = {}",
            match c.basis {
                BasisKind::Linear => "linear",
                BasisKind::Quadratic => "quadratic",
            }
        );
        let _ = writeln!(s, "solver.budget = {}", c.budget);
        let _ = writeln!(s, "solver.delta_min = {}", c.delta_min);
        let _ = writeln!(s, "solver.j_max = {}", c.j_max);
        let _ = writeln!(s, "solver.kappa_bhm = {}", c.kappa_bhm);
        let _ = writeln!(s, "solver.max_condition = {}", c.max_condition);
        let _ = writeln!(
            s,
            "solver.growth = {}",
            match c.growth {
                SampleGrowth::OneAtATime => "one".to_string(),
                SampleGrowth::Geometric(f) => format!("geometric:{f}"),
            }
        );
        let _ = writeln!(s, "solver.reuse_points = {}", c.reuse_points);
        let _ = writeln!(s, "solver.lambda_max = {}", c.lambda_max);
        s
    }

}

fn parse_family(value: &str) -> Option<NoiseFamily> {
    match value {
        "gaussian" => Some(NoiseFamily::Gaussian),
        "uniform" => Some(NoiseFamily::Uniform),
        _ => None,
    }
}

fn parse_f64_list(value: &str) -> Option<Vec<f64>> {
    let items: Result<Vec<f64>, _> = value.split(',').map(|v| v.trim().parse()).collect();
    items.ok().filter(|v| !v.is_empty())
}

fn parse_u64_list(value: &str) -> Option<Vec<u64>> {
    let items: Result<Vec<u64>, _> = value.split(',').map(|v| v.trim().parse()).collect();
    items.ok().filter(|v| !v.is_empty())
}

fn join_f64(values: &[f64]) -> String {
    if values.is_empty() {
        return String::new();
    }
    let items: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    items.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_flat_keys_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.conf");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# experiment").unwrap();
        writeln!(f, "problem.name = noisy-quadratic").unwrap();
        writeln!(f, "problem.dim = 3  # trailing comment").unwrap();
        writeln!(f, "solver.eta1 = 0.2").unwrap();
        writeln!(f, "seeds = 1, 2, 3").unwrap();
        drop(f);
        let c = ExperimentConfig::parse_file(&path).unwrap();
        assert_eq!(c.problem.name, "noisy-quadratic");
        assert_eq!(c.problem.dim, 3);
        assert_eq!(c.solver.eta1, 0.2);
        assert_eq!(c.seeds, vec![1, 2, 3]);
    }

    #[test]
    fn unknown_key_is_line_numbered() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.conf");
        std::fs::write(&path, "problem.dim = 2\nsolver.bogus = 1\n").unwrap();
        let err = ExperimentConfig::parse_file(&path).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains(":2:"), "{}", err.message);
        assert!(err.message.contains("solver.bogus"), "{}", err.message);
    }

    #[test]
    fn duplicate_seeds_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.conf");
        std::fs::write(&path, "seeds = 5,5\n").unwrap();
        let err = ExperimentConfig::parse_file(&path).unwrap_err();
        assert_eq!(err.code, 2);
    }

    #[test]
    fn effective_round_trip() {
        let mut c = ExperimentConfig::default();
        c.apply_override("solver.eta1=0.25").unwrap();
        c.apply_override("solver.growth=geometric:1.1").unwrap();
        c.apply_override("problem.x0=1.5,-0.5").unwrap();
        let text = c.effective_text();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eff.conf");
        std::fs::write(&path, &text).unwrap();
        let reread = ExperimentConfig::parse_file(&path).unwrap();
        assert_eq!(reread.solver, c.solver);
        assert_eq!(reread.problem.x0, c.problem.x0);
        assert_eq!(reread.effective_text(), text);
    }
}
