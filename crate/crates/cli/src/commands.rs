use std::path::Path;
use std::str::FromStr;

use biot_core::solver::{time_march, SolverConfig};
use biot_core::spectral::{estimate_k_star, estimate_spectrum};
use biot_core::system::BiotProblem;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::report::{
    EstimateRecord, EstimateReport, LSource, Provenance, SolveReport, SweepReport, SweepRow,
    SweepSummary,
};

pub fn build_problem(config: &ExperimentConfig, n: usize) -> CliResult<BiotProblem<f64>> {
    Ok(BiotProblem::new(n, config.material_params()?, config.sources())?)
}

/// Spectral estimates of one problem with the configured power-iteration settings.
///
/// The div-div route to `K*` converges slowly on fine meshes, so it only runs when
/// `with_divdiv` is set.
pub fn estimate_problem(
    config: &ExperimentConfig,
    problem: &BiotProblem<f64>,
    with_divdiv: bool,
) -> CliResult<EstimateRecord> {
    let opts = config.spectral.options();
    let est = estimate_spectrum(&problem.system, &opts)?;
    let k_div = if with_divdiv {
        Some(estimate_k_star(&problem.system, &opts)?.value)
    } else {
        None
    };
    Ok(EstimateRecord::new(
        problem.mesh.n(),
        config.spectral.mode,
        opts.tol,
        problem.params.alpha,
        &est,
        k_div,
    ))
}

/// Writes the reduced operators and the mesh of `problem` under `dir/n<N>/`.
pub fn dump_problem(problem: &BiotProblem<f64>, dir: &Path) -> CliResult<()> {
    let sub = dir.join(format!("n{}", problem.mesh.n()));
    std::fs::create_dir_all(&sub).map_err(|source| CliError::Write {
        path: sub.clone(),
        source,
    })?;
    problem.system.dump_matrices(&sub)?;
    let mesh = sub.join("mesh.txt");
    std::fs::write(&mesh, problem.mesh.to_text()).map_err(|source| CliError::Write { path: mesh, source })
}

pub fn cmd_estimate(config: &ExperimentConfig, dump: Option<&Path>) -> CliResult<EstimateReport> {
    let mut estimates = Vec::new();
    for &n in &config.mesh.n {
        let problem = build_problem(config, n)?;
        if let Some(dir) = dump {
            dump_problem(&problem, dir)?;
        }
        estimates.push(estimate_problem(config, &problem, true)?);
    }
    Ok(EstimateReport {
        provenance: Provenance::new(config),
        estimates,
    })
}

/// Stabilization choice of a single solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LChoice {
    Optimal,
    Value(f64),
}

impl FromStr for LChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("optimal") {
            return Ok(LChoice::Optimal);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| format!("expected a number or 'optimal', got '{s}'"))?;
        if v.is_finite() && v >= 0.0 {
            Ok(LChoice::Value(v))
        } else {
            Err(format!("L must be finite and non-negative, got {s}"))
        }
    }
}

fn solver_config(config: &ExperimentConfig, l: f64) -> SolverConfig<f64> {
    SolverConfig {
        eps_r: config.solver.eps_r,
        max_iter: config.solver.max_iter,
        inner_tol: config.solver.inner_tol,
        ..SolverConfig::new(l)
    }
}

fn single_mesh(config: &ExperimentConfig) -> CliResult<usize> {
    match config.mesh.n.as_slice() {
        [n] => Ok(*n),
        many => Err(CliError::Config(format!(
            "solve needs exactly one mesh, the configuration lists {}; pass --mesh-n",
            many.len()
        ))),
    }
}

/// Time-marches one mesh. Divergence is reported in the returned value, not as an error,
/// so the caller can still write the report.
pub fn cmd_solve(
    config: &ExperimentConfig,
    l: LChoice,
    dump: Option<&Path>,
) -> CliResult<SolveReport> {
    let n = single_mesh(config)?;
    let problem = build_problem(config, n)?;
    if let Some(dir) = dump {
        dump_problem(&problem, dir)?;
    }
    let (l_value, source, estimate) = match l {
        LChoice::Optimal => {
            let est = estimate_problem(config, &problem, false)?;
            (est.l_opt, LSource::Optimal, Some(est))
        }
        LChoice::Value(v) => (v, LSource::Fixed, None),
    };
    let solver = solver_config(config, l_value);
    solver
        .validate(problem.params.inv_m)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let run = time_march(&problem, &solver, &config.time_grid()?)?;
    let diverged = run.diverged();
    let alpha2 = problem.params.alpha * problem.params.alpha;
    Ok(SolveReport {
        provenance: Provenance::new(config),
        n,
        h: 1.0 / n as f64,
        l: l_value,
        d: alpha2 / l_value,
        l_source: source,
        average: (!diverged).then_some(run.average),
        diverged,
        pressure_norm: problem.system.mp.energy_norm(&run.p)?,
        displacement_norm: problem.system.a.energy_norm(&run.u)?,
        iterations: run.iterations,
        converged: run.converged,
        estimate,
    })
}

/// Runs every `(n, D)` pair of the sweep. Diverged rows are recorded with
/// `avg_iterations = max_iter` and the sweep continues.
pub fn cmd_sweep(
    config: &ExperimentConfig,
    mut on_row: impl FnMut(&SweepRow),
) -> CliResult<SweepReport> {
    let grid = config.time_grid()?;
    let d_values = config.sweep.d_values();
    let mut rows = Vec::new();
    let mut estimates = Vec::new();
    let mut summary = Vec::new();
    let mut ns = config.mesh.n.clone();
    ns.sort_unstable();
    ns.dedup();
    for n in ns {
        let problem = build_problem(config, n)?;
        let est = estimate_problem(config, &problem, false)?;
        let alpha2 = problem.params.alpha * problem.params.alpha;
        let first = rows.len();
        for &d in &d_values {
            let l = alpha2 / d;
            let run = time_march(&problem, &solver_config(config, l), &grid)?;
            let diverged = run.diverged();
            let row = SweepRow {
                n,
                h: 1.0 / n as f64,
                d,
                l,
                avg_iterations: if diverged {
                    config.solver.max_iter as f64
                } else {
                    run.average
                },
                diverged,
            };
            on_row(&row);
            rows.push(row);
        }
        let best = rows[first..]
            .iter()
            .filter(|r| !r.diverged)
            .min_by(|a, b| a.avg_iterations.total_cmp(&b.avg_iterations));
        if let Some(best) = best {
            summary.push(SweepSummary {
                n,
                d_opt: est.d_opt,
                d_best: best.d,
                avg_best: best.avg_iterations,
            });
        }
        estimates.push(est);
    }
    Ok(SweepReport {
        provenance: Provenance::new(config),
        rows,
        estimates,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l_choice_parsing() {
        assert_eq!("optimal".parse::<LChoice>().unwrap(), LChoice::Optimal);
        assert_eq!("1.5e-11".parse::<LChoice>().unwrap(), LChoice::Value(1.5e-11));
        assert!("-1".parse::<LChoice>().is_err());
        assert!("fast".parse::<LChoice>().is_err());
    }

    #[test]
    fn solve_requires_single_mesh() {
        let cfg = ExperimentConfig::default();
        let err = cmd_solve(&cfg, LChoice::Optimal, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
