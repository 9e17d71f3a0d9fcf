//! The `run`, `calibrate`, and `summarize` subcommands.

use crate::config::ExperimentConfig;
use crate::table::{quantile, read_trace, TraceData};
use crate::CliError;
use astrodf::geometry::jittered_poised_set;
use astrodf::{
    calibrate_stopping, default_poised_set, error_bound_report, run, BasisKind, LocalModel,
    NoiseFamily, NoiseModel, Point, PolynomialBasis, RngStream, RunResult,
};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::new(1, format!("cannot write {}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::new(1, format!("cannot create {}: {e}", dir.display())))
}

/// One macroreplication per seed, dispatched to a worker pool; per-seed trace
/// files plus an aggregate summary.
pub fn cmd_run(config: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    if config.seeds.is_empty() {
        return Err(CliError::new(2, "no seeds configured".into()));
    }
    config
        .solver
        .validate()
        .map_err(|e| CliError::new(2, format!("{e}")))?;
    let problem = config.problem.build()?;
    let x0 = config.problem.start_point();
    if x0.dim() != problem.dim() {
        return Err(CliError::new(
            5,
            format!(
                "x0 has dimension {}, problem has dimension {}",
                x0.dim(),
                problem.dim()
            ),
        ));
    }
    ensure_dir(out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallel.unwrap_or(0))
        .build()
        .map_err(|e| CliError::new(1, format!("worker pool: {e}")))?;
    let results: Vec<Result<(u64, RunResult), CliError>> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| {
                let mut solver_config = config.solver.clone();
                solver_config.seed = seed;
                let result = run(&problem, x0.clone(), &solver_config)
                    .map_err(|e| CliError::new(1, format!("seed {seed}: {e}")))?;
                Ok((seed, result))
            })
            .collect()
    });

    let mut rows = Vec::new();
    for item in results {
        let (seed, result) = item?;
        let trace_path = out_dir.join(format!("trace_{seed}.csv"));
        write_file(&trace_path, &result.trace_csv())?;
        if result.hessian_warnings > 0 {
            eprintln!(
                "warning: seed {seed}: model Hessian norm exceeded kappa_bhm in {} iterations",
                result.hessian_warnings
            );
        }
        let grad_norm = problem
            .true_gradient_norm(&result.final_point)
            .unwrap_or(f64::NAN);
        rows.push((seed, grad_norm, result));
    }

    let mut summary = String::from("seed,final_grad_norm,total_calls,iterations,termination\n");
    for (seed, grad, result) in &rows {
        let _ = writeln!(
            summary,
            "{seed},{grad},{},{},{}",
            result.total_calls, result.iterations, result.termination
        );
    }
    let grads: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let calls: Vec<f64> = rows.iter().map(|r| r.2.total_calls as f64).collect();
    let iters: Vec<f64> = rows.iter().map(|r| r.2.iterations as f64).collect();
    for (label, p) in [("q25", 0.25), ("median", 0.5), ("q75", 0.75)] {
        let _ = writeln!(
            summary,
            "{label},{},{},{},",
            quantile(&grads, p),
            quantile(&calls, p),
            quantile(&iters, p)
        );
    }
    write_file(&out_dir.join("summary.csv"), &summary)?;
    write_file(&out_dir.join("config.effective"), &config.effective_text())?;
    println!(
        "{} runs -> {} (summary.csv, config.effective, trace_<seed>.csv)",
        rows.len(),
        out_dir.display()
    );
    Ok(())
}

/// Statistical calibration tables with a pass/fail column per tolerance.
pub fn cmd_calibrate(kind: &str, config: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let p = &config.calibrate;
    let csv = match kind {
        "stopping" => {
            let noise = match p.family {
                NoiseFamily::Gaussian => NoiseModel::gaussian(p.sigma),
                NoiseFamily::Uniform => NoiseModel::uniform(p.sigma),
            };
            let rows = calibrate_stopping(&noise, p.kappa, p.delta, &p.lambda_grid, p.reps, p.seed);
            let mut csv = String::from("lambda,mean_N,ratio_N,mean_sq_mean,ratio_msm,pass\n");
            for r in rows {
                let pass = (r.ratio_n - 1.0).abs() <= 0.1 && (0.8..=1.25).contains(&r.ratio_msm);
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    r.lambda, r.mean_n, r.ratio_n, r.mean_sq_mean, r.ratio_msm, pass
                );
            }
            csv
        }
        "fully-linear" => fully_linear_table(p.seed, &p.radii)?,
        "error-bound" => error_bound_table(p.seed, p.trials, &p.dims)?,
        other => {
            return Err(CliError::new(
                2,
                format!("unknown calibrate kind `{other}` (stopping | fully-linear | error-bound)"),
            ))
        }
    };
    let path = out_dir.join(format!("calibrate_{kind}.csv"));
    write_file(&path, &csv)?;
    print!("{csv}");
    println!("-> {}", path.display());
    Ok(())
}

/// Interpolation error over shrinking radii: `max_err / delta^(degree+1)`
/// must stay within a factor 2 across the grid.
fn fully_linear_table(seed: u64, radii: &[f64]) -> Result<String, CliError> {
    if radii.is_empty() {
        return Err(CliError::new(2, "calibrate.radii must be nonempty".into()));
    }
    let mut rng = RngStream::new(seed, 0);
    let mut csv = String::from("basis,delta,max_err,ratio,spread,pass\n");
    for kind in [BasisKind::Linear, BasisKind::Quadratic] {
        let basis = PolynomialBasis::new(kind, 2);
        let center = Point::new(vec![0.3, -0.2]);
        let target = |z: &[f64]| match kind {
            BasisKind::Linear => 0.5 * (z[0] * z[0] + 3.0 * z[1] * z[1]) + 0.3 * z[0] * z[1] - z[0],
            BasisKind::Quadratic => z[0].exp() + (2.0 * z[1]).exp(),
        };
        let exponent = basis.degree() as i32 + 1;
        let mut entries = Vec::new();
        for &radius in radii {
            let set = default_poised_set(&center, radius, &basis);
            let estimates: Vec<f64> = set.points().iter().map(|y| target(y.coords())).collect();
            let model = LocalModel::fit(&basis, &set, &estimates, 1e8)
                .map_err(|e| CliError::new(1, format!("{e}")))?;
            let mut max_err = 0.0f64;
            let mut done = 0;
            while done < 800 {
                let u = [rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)];
                if u[0] * u[0] + u[1] * u[1] > 1.0 {
                    continue;
                }
                done += 1;
                let z = center.offset(&[u[0] * radius, u[1] * radius]);
                max_err = max_err.max((model.eval(&z) - target(z.coords())).abs());
            }
            entries.push((radius, max_err, max_err / radius.powi(exponent)));
        }
        let hi = entries.iter().map(|e| e.2).fold(0.0f64, f64::max);
        let lo = entries.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
        let spread = hi / lo;
        let pass = spread <= 2.0;
        let name = match kind {
            BasisKind::Linear => "linear",
            BasisKind::Quadratic => "quadratic",
        };
        for (radius, max_err, ratio) in entries {
            let _ = writeln!(csv, "{name},{radius},{max_err},{ratio},{spread},{pass}");
        }
    }
    Ok(csv)
}

/// Randomized trials of the pointwise bound `|M - m| <= p * Lambda * max|E|`.
fn error_bound_table(seed: u64, trials: u32, dims: &[usize]) -> Result<String, CliError> {
    if dims.is_empty() {
        return Err(CliError::new(2, "calibrate.dims must be nonempty".into()));
    }
    let mut rng = RngStream::new(seed, 1);
    let mut csv = String::from("dim,basis,trials,violations,max_lhs_over_rhs,pass\n");
    for &d in dims {
        for kind in [BasisKind::Linear, BasisKind::Quadratic] {
            let basis = PolynomialBasis::new(kind, d);
            let problem = astrodf::noisy_quadratic(d, 10.0, NoiseModel::gaussian(0.0));
            let per_cell = (trials as usize / (dims.len() * 2)).max(1);
            let mut violations = 0u32;
            let mut max_ratio = 0.0f64;
            for _ in 0..per_cell {
                let center = Point::new((0..d).map(|_| rng.uniform_in(-2.0, 2.0)).collect());
                let radius = rng.uniform_in(0.1, 2.0);
                let set = jittered_poised_set(&center, radius, &basis, &mut rng);
                let scale = rng.uniform_in(0.01, 0.5);
                let estimates: Vec<f64> = set
                    .points()
                    .iter()
                    .map(|y| problem.true_value(y).unwrap() + rng.uniform_in(-scale, scale))
                    .collect();
                let model = LocalModel::fit(&basis, &set, &estimates, 1e8)
                    .map_err(|e| CliError::new(1, format!("{e}")))?;
                let diag = error_bound_report(&model, &set, &estimates, &problem, 50, &mut rng)
                    .map_err(|e| CliError::new(1, format!("{e}")))?;
                violations += diag.bound_violations;
                if diag.bound_rhs > 0.0 {
                    max_ratio = max_ratio.max(diag.max_bound_lhs / diag.bound_rhs);
                }
            }
            let name = match kind {
                BasisKind::Linear => "linear",
                BasisKind::Quadratic => "quadratic",
            };
            let _ = writeln!(
                csv,
                "{d},{name},{per_cell},{violations},{max_ratio},{}",
                violations == 0
            );
        }
    }
    Ok(csv)
}

/// Median/IQR of `f_true` and `model_grad_norm` at log-spaced cumulative-call
/// checkpoints across trace files.
pub fn cmd_summarize(paths: &[PathBuf], out_dir: &Path) -> Result<(), CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut in_dir: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| CliError::new(4, format!("cannot read {}: {e}", p.display())))?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|path| {
                    path.file_name()
                        .and_then(|n| n.to_str())
                        .map(|n| n.starts_with("trace_") && n.ends_with(".csv"))
                        .unwrap_or(false)
                })
                .collect();
            in_dir.sort();
            files.extend(in_dir);
        } else if p.exists() {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::new(4, "no trace files matched".into()));
    }
    let traces: Vec<TraceData> = files
        .iter()
        .map(|p| read_trace(p))
        .collect::<Result<_, _>>()?;
    let dim = traces[0].dim;
    if let Some(bad) = traces.iter().find(|t| t.dim != dim) {
        return Err(CliError::new(
            5,
            format!(
                "dimension mismatch: {} has d={}, {} has d={dim}",
                bad.path.display(),
                bad.dim,
                traces[0].path.display()
            ),
        ));
    }

    let max_calls = traces
        .iter()
        .filter_map(|t| t.cum_calls.last().copied())
        .max()
        .unwrap_or(0);
    let mut checkpoints = Vec::new();
    let mut cp = 100u64;
    loop {
        checkpoints.push(cp);
        if cp >= max_calls || cp > u64::MAX / 10 {
            break;
        }
        cp *= 10;
    }

    let mut csv = String::from(
        "calls,median_f_true,q25_f_true,q75_f_true,median_grad_norm,q25_grad_norm,q75_grad_norm,n_traces\n",
    );
    for &cp in &checkpoints {
        let mut fs = Vec::new();
        let mut gs = Vec::new();
        let mut n_traces = 0;
        for t in &traces {
            if t.cum_calls.is_empty() {
                continue;
            }
            // Latest row within the checkpoint, or the first row when the
            // trace starts beyond it.
            let idx = match t.cum_calls.iter().rposition(|&c| c <= cp) {
                Some(i) => i,
                None => 0,
            };
            n_traces += 1;
            // Truncated final rows can carry NaN diagnostics; aggregate over
            // the finite values only.
            if t.f_true[idx].is_finite() {
                fs.push(t.f_true[idx]);
            }
            if t.grad_norm[idx].is_finite() {
                gs.push(t.grad_norm[idx]);
            }
        }
        if n_traces == 0 {
            continue;
        }
        let q = |v: &[f64], p: f64| {
            if v.is_empty() {
                f64::NAN
            } else {
                quantile(v, p)
            }
        };
        let _ = writeln!(
            csv,
            "{cp},{},{},{},{},{},{},{n_traces}",
            q(&fs, 0.5),
            q(&fs, 0.25),
            q(&fs, 0.75),
            q(&gs, 0.5),
            q(&gs, 0.25),
            q(&gs, 0.75)
        );
    }
    ensure_dir(out_dir)?;
    let path = out_dir.join("summarize.csv");
    write_file(&path, &csv)?;
    print!("{csv}");
    println!("-> {}", path.display());
    Ok(())
}
