//! Dense-oracle self checks on a small mesh.

use biot_core::scalar::dot;
use biot_core::solver::{
    fixed_stress_step, monolithic_solve, reduced_flow_rhs, relative_difference, richardson_step,
};
use biot_core::sparse::{dense_generalized_symmetric_eigen, DenseMatrix};
use biot_core::spectral::{
    contraction_factor, estimate_k_star, estimate_spectrum, schur_apply, seeded_vector,
    PowerOptions,
};
use biot_core::system::{BiotSystem, Loads};

use crate::commands::build_problem;
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::report::{Check, Provenance, VerifyReport};

/// Largest mesh on which the dense Schur complement is formed.
pub const MAX_VERIFY_N: usize = 16;

fn check(name: &str, measured: f64, bound: f64) -> Check {
    Check {
        name: name.to_string(),
        measured,
        bound,
        passed: measured <= bound,
        informational: false,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn dense_schur(sys: &BiotSystem<f64>) -> CliResult<DenseMatrix<f64>> {
    let a = sys.a.to_dense();
    let b = sys.b.to_dense();
    let s = b.matmul(&a.solve_matrix(&b.transpose())?);
    let s = s.add(&sys.mp.to_dense().scaled(sys.params.inv_m));
    Ok(DenseMatrix::from_fn(s.nrows(), s.ncols(), |i, j| 0.5 * (s[(i, j)] + s[(j, i)])))
}

/// Largest excess of the M-norm error ratio over `ρ(ω)` in `iters` Richardson steps,
/// and the last ratio.
///
/// The error obeys `e ← (I − ω Mp⁻¹ S) e` whatever the data, so the iteration is run on
/// homogeneous data where the exact pressure is zero and the iterate is the error itself.
/// Otherwise the error would sink below the accuracy of the reference solution within
/// the 50 steps at `ω_opt`.
fn contraction_excess(
    sys: &BiotSystem<f64>,
    omega: f64,
    rho: f64,
    iters: usize,
    seed: u64,
) -> CliResult<(f64, f64)> {
    let zero = Loads::zeros(sys);
    let (_, p_exact) = monolithic_solve(sys, &zero, 1e-12)?;
    let g_tilde = reduced_flow_rhs(sys, &zero)?;
    let mut p: Vec<f64> = seeded_vector::<f64>(sys.num_p(), seed)
        .iter()
        .zip(&p_exact)
        .map(|(e, x)| x + e)
        .collect();
    let err = |p: &[f64]| -> CliResult<f64> {
        let e: Vec<f64> = p.iter().zip(&p_exact).map(|(a, b)| a - b).collect();
        Ok(sys.mp.energy_norm(&e)?)
    };
    let mut prev = err(&p)?;
    let (mut worst, mut last) = (f64::NEG_INFINITY, 0.0);
    for _ in 0..iters {
        p = richardson_step(sys, &g_tilde, &p, omega)?;
        let now = err(&p)?;
        last = now / prev;
        worst = worst.max(last - rho);
        prev = now;
    }
    Ok((worst, last))
}

pub fn cmd_verify(config: &ExperimentConfig, n: usize) -> CliResult<VerifyReport> {
    if n == 0 || n > MAX_VERIFY_N {
        return Err(CliError::Config(format!(
            "verify forms dense operators; choose 1 <= n <= {MAX_VERIFY_N}, got {n}"
        )));
    }
    let problem = build_problem(config, n)?;
    let sys = &problem.system;
    let params = &problem.params;
    let alpha2 = params.alpha * params.alpha;
    let grid = config.time_grid()?;
    let zero_u = vec![0.0; sys.num_u()];
    let zero_p = vec![0.0; sys.num_p()];
    let mut loads = problem.step_loads(&zero_u, &zero_p, grid.t0 + grid.tau, grid.tau)?;
    if loads.f.iter().chain(&loads.g).all(|&v| v == 0.0) {
        loads = Loads {
            f: seeded_vector(sys.num_u(), 17),
            g: seeded_vector(sys.num_p(), 18),
        };
    }
    let mut checks = Vec::new();

    // splitting vs Richardson pressures
    let l = alpha2 / params.drained_bulk_modulus();
    let g_tilde = reduced_flow_rhs(sys, &loads)?;
    let omega = 1.0 / (l + params.inv_m);
    // the splitting starts from the displacement u(p0) that the Richardson form eliminates
    let mut p = zero_p.clone();
    let mut u = sys.displacement_for(&loads.f, &p)?;
    let mut p_rich = zero_p.clone();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let next = fixed_stress_step(sys, &loads, &u, &p, l)?;
        u = next.0;
        p = next.1;
        p_rich = richardson_step(sys, &g_tilde, &p_rich, omega)?;
        worst = worst.max(relative_difference(&p, &p_rich));
    }
    checks.push(check("richardson_equivalence", worst, 1e-8));

    // dense pencil oracle
    let s = dense_schur(sys)?;
    let dense = dense_generalized_symmetric_eigen(&s, &sys.mp.to_dense())?;
    let (lo, hi) = (dense.eigenvalues[0], *dense.eigenvalues.last().unwrap());
    let opts = config.spectral.options();
    let est = estimate_spectrum(sys, &opts)?;
    checks.push(check("lambda_max_vs_dense", rel(est.lambda_max, hi), 1e-6));
    checks.push(check("lambda_min_vs_dense", rel(est.lambda_min, lo), 1e-6));
    let bta = dense_generalized_symmetric_eigen(
        &s.sub(&sys.mp.to_dense().scaled(params.inv_m)),
        &sys.mp.to_dense(),
    )?;
    checks.push(check("beta_vs_dense", rel(est.beta, alpha2 / bta.eigenvalues[0]), 1e-6));

    let k_div = estimate_k_star(sys, &opts)?.value;
    let mut ident = check("k_star_divdiv_identification", rel(alpha2 / k_div + params.inv_m, hi), 1e-6);
    ident.informational = true;
    checks.push(ident);
    checks.push(check("k_star_over_beta", est.k_star / est.beta, 1.0));
    checks.push(check("k_dr_over_k_star", params.drained_bulk_modulus() / est.k_star, 1.0));
    checks.push(check("k_dr_over_k_star_divdiv", params.drained_bulk_modulus() / k_div, 1.0));

    // contraction, with tightly converged eigenvalues so ρ(ω) is sharp
    let tight = estimate_spectrum(sys, &PowerOptions { tol: 1e-12, max_iter: 200_000, ..opts })?;
    for (name, w) in [
        ("contraction_half_omega_opt", 0.5 * tight.omega_opt),
        ("contraction_omega_opt", tight.omega_opt),
        ("contraction_near_threshold", 0.9 * 2.0 / tight.lambda_max),
    ] {
        let rho = contraction_factor(w, tight.lambda_min, tight.lambda_max);
        let (excess, last) = contraction_excess(sys, w, rho, 50, 29)?;
        checks.push(check(name, excess, 1e-8));
        if name == "contraction_omega_opt" {
            checks.push(check("asymptotic_rate_vs_rho_opt", (last / tight.rho_opt - 1.0).abs(), 0.05));
        }
    }
    let sym = {
        let a = seeded_vector::<f64>(sys.num_p(), 3);
        let b = seeded_vector::<f64>(sys.num_p(), 4);
        let (sa, sb) = (schur_apply(sys, &a)?, schur_apply(sys, &b)?);
        (dot(&sa, &b) - dot(&a, &sb)).abs() / (dot(&sa, &sa) * dot(&b, &b)).sqrt()
    };
    checks.push(check("schur_symmetry", sym, 1e-10));

    let mut report = VerifyReport {
        provenance: Provenance::new(config),
        n,
        checks,
        passed: true,
    };
    report.passed = report.failures() == 0;
    Ok(report)
}
