//! Acceptance criteria for the fixed-stress solver and its spectral estimator.
//!
//! Each criterion is a function returning [`Outcome`]: `Ok` with a measurement
//! summary when it holds, `Err` with the same summary when it does not.

use biot_cli::commands::cmd_sweep;
use biot_cli::ExperimentConfig;
use biot_core::assembly::ManufacturedSources;
use biot_core::params::{MaterialParams, TimeGrid};
use biot_core::solver::{
    fixed_stress_step, monolithic_solve, reduced_flow_rhs, relative_difference, richardson_step,
    time_march, SolverConfig,
};
use biot_core::sparse::{dense_generalized_symmetric_eigen, DenseMatrix};
use biot_core::spectral::{
    contraction_factor, estimate_k_star, estimate_spectrum, power_iteration_max, seeded_vector,
    PowerOptions, SpectralEstimates,
};
use biot_core::system::{BiotProblem, BiotSystem, Loads};

/// Drained bulk modulus of the reference material, `2·41.667e9/2 + 27.778e9`.
const K_DR: f64 = 6.9445e10;

pub type Outcome = Result<String, String>;

type Check = Box<dyn Fn() -> Outcome>;

fn problem(n: usize) -> BiotProblem<f64> {
    problem_with(n, MaterialParams::reference())
}

fn problem_with(n: usize, params: MaterialParams<f64>) -> BiotProblem<f64> {
    BiotProblem::new(n, params, ManufacturedSources::default()).expect("problem assembles")
}

fn first_step_loads(pr: &BiotProblem<f64>) -> Loads<f64> {
    let sys = &pr.system;
    pr.step_loads(&vec![0.0; sys.num_u()], &vec![0.0; sys.num_p()], 0.1, 0.1)
        .expect("loads")
}

fn dense_bab(sys: &BiotSystem<f64>) -> DenseMatrix<f64> {
    let a = sys.a.to_dense();
    let b = sys.b.to_dense();
    let s = b.matmul(&a.solve_matrix(&b.transpose()).expect("dense solve"));
    DenseMatrix::from_fn(s.nrows(), s.ncols(), |i, j| 0.5 * (s[(i, j)] + s[(j, i)]))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fine(sys: &BiotSystem<f64>) -> SpectralEstimates<f64> {
    estimate_spectrum(sys, &PowerOptions::fine()).expect("estimates")
}

pub fn richardson_equivalence() -> Outcome {
    let pr = problem(8);
    let sys = &pr.system;
    let loads = first_step_loads(&pr);
    let l = 1.0 / K_DR;
    let omega = 1.0 / (l + sys.params.inv_m);
    let g_tilde = reduced_flow_rhs(sys, &loads).unwrap();
    let mut p = vec![0.0; sys.num_p()];
    let mut u = sys.displacement_for(&loads.f, &p).unwrap();
    let mut q = p.clone();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        (u, p) = fixed_stress_step(sys, &loads, &u, &p, l).unwrap();
        q = richardson_step(sys, &g_tilde, &q, omega).unwrap();
        worst = worst.max(relative_difference(&p, &q));
    }
    ensure(worst <= 1e-8, format!("max relative difference over 20 iterates {worst:.3e} (bound 1e-8)"))
}

fn identification_gaps(inv_m: f64) -> (f64, f64) {
    let mut params = MaterialParams::reference();
    params.inv_m = inv_m;
    let pr = problem_with(4, params);
    let sys = &pr.system;
    let mp = sys.mp.to_dense();
    let bab = dense_bab(sys);
    let s = bab.add(&mp.clone().scaled(inv_m));
    let spectrum = dense_generalized_symmetric_eigen(&s, &mp).unwrap();
    let (lo, hi) = (spectrum.eigenvalues[0], *spectrum.eigenvalues.last().unwrap());
    let a2 = params.alpha * params.alpha;

    let ddiv = dense_generalized_symmetric_eigen(&sys.ddiv.to_dense(), &sys.a.to_dense()).unwrap();
    let k_star = 1.0 / ddiv.eigenvalues.last().unwrap();
    let beta = a2 / dense_generalized_symmetric_eigen(&bab, &mp).unwrap().eigenvalues[0];
    (rel(a2 / k_star + inv_m, hi), rel(a2 / beta + inv_m, lo))
}

pub fn eigenvalue_identifications() -> Outcome {
    let (k0, b0) = identification_gaps(0.0);
    let (k1, b1) = identification_gaps(1e-12);
    let detail = format!(
        "1/M = 0: K* gap {k0:.3e}, beta gap {b0:.3e}; 1/M = 1e-12: K* gap {k1:.3e}, beta gap {b1:.3e} (bound 1e-6)"
    );
    ensure(k0.max(b0).max(k1).max(b1) <= 1e-6, detail)
}

pub fn contraction_bound() -> Outcome {
    let pr = problem(8);
    let sys = &pr.system;
    let est = estimate_spectrum(sys, &PowerOptions { tol: 1e-12, max_iter: 200_000, seed: 2024 }).unwrap();
    let zero = Loads::zeros(sys);
    let (_, p_exact) = monolithic_solve(sys, &zero, 1e-12).unwrap();
    let g_tilde = reduced_flow_rhs(sys, &zero).unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut rate_gap = f64::NAN;
    for omega in [0.5 * est.omega_opt, est.omega_opt, 0.9 * 2.0 / est.lambda_max] {
        let rho = contraction_factor(omega, est.lambda_min, est.lambda_max);
        let mut p: Vec<f64> = seeded_vector::<f64>(sys.num_p(), 77)
            .iter()
            .zip(&p_exact)
            .map(|(e, x)| x + e)
            .collect();
        let err = |p: &[f64]| {
            let e: Vec<f64> = p.iter().zip(&p_exact).map(|(a, b)| a - b).collect();
            sys.mp.energy_norm(&e).unwrap()
        };
        let mut prev = err(&p);
        let mut ratio = 0.0;
        for _ in 0..50 {
            p = richardson_step(sys, &g_tilde, &p, omega).unwrap();
            let now = err(&p);
            ratio = now / prev;
            worst = worst.max(ratio - rho);
            prev = now;
        }
        if omega == est.omega_opt {
            rate_gap = rel(ratio, est.rho_opt);
        }
    }
    ensure(
        worst <= 1e-8 && rate_gap <= 0.05,
        format!(
            "max(ratio - rho) {worst:.3e} (bound 1e-8); asymptotic rate vs rho_opt {rate_gap:.3e} (bound 0.05)"
        ),
    )
}

pub fn sweep_optimality() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.mesh.n = vec![16];
    let report = cmd_sweep(&cfg, |_| {}).unwrap();
    let summary = &report.summary[0];
    let d = cfg.sweep.d_values();
    let step = d[1] - d[0];
    let near = (summary.d_best - summary.d_opt).abs() <= step;

    let pr = problem(16);
    let grid = TimeGrid::new(0.0, 0.1, 1.0).unwrap();
    let run = time_march(&pr, &SolverConfig::new(1.0 / 0.690e11), &grid).unwrap();
    let factor = run.average / summary.avg_best;

    let above: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.d > summary.d_opt)
        .take(5)
        .map(|r| r.avg_iterations)
        .collect();
    let rising = above.windows(2).all(|w| w[1] >= w[0]);
    ensure(
        near && factor >= 1.3 && rising,
        format!(
            "argmin D {:.4e} vs D_opt {:.4e} (step {:.3e}); avg(0.690e11) {:.1} = {factor:.2} x min {:.1} (bound 1.3); five points above D_opt rising: {rising} {above:?}",
            summary.d_best, summary.d_opt, step, run.average, summary.avg_best
        ),
    )
}

pub fn divergence_threshold() -> Outcome {
    let pr = problem(8);
    let sys = &pr.system;
    let est = fine(sys);
    let l = 0.9 / (2.0 * est.k_star);
    let top = power_iteration_max(sys, &PowerOptions::fine()).unwrap().vector;
    let loads = first_step_loads(&pr);
    let (_, p_exact) = monolithic_solve(sys, &loads, 1e-12).unwrap();
    let scale = sys.mp.energy_norm(&p_exact).unwrap().max(1.0);
    let mut p: Vec<f64> = p_exact.iter().zip(&top).map(|(x, v)| x + scale * v).collect();
    let mut u = sys.displacement_for(&loads.f, &p).unwrap();
    let err = |p: &[f64]| {
        let e: Vec<f64> = p.iter().zip(&p_exact).map(|(a, b)| a - b).collect();
        sys.mp.energy_norm(&e).unwrap()
    };
    let mut norms = vec![err(&p)];
    for _ in 0..10 {
        (u, p) = fixed_stress_step(sys, &loads, &u, &p, l).unwrap();
        norms.push(err(&p));
    }
    let growing = norms.windows(2).all(|w| w[1] > w[0]);
    ensure(
        growing,
        format!(
            "omega*lambda_max = {:.4}; error grew every iteration: {growing}; e10/e0 = {:.3}",
            est.lambda_max / l,
            norms[10] / norms[0]
        ),
    )
}

pub fn ordering_chain() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for n in [8, 16] {
        let pr = problem(n);
        let est = fine(&pr.system);
        let k_div = estimate_k_star(&pr.system, &PowerOptions::fine()).unwrap().value;
        for (route, k) in [("identification", est.k_star), ("divdiv", k_div)] {
            let chain = est.beta >= k && k >= K_DR;
            let interval = est.l_opt >= 0.5 / k && est.l_opt <= 1.0 / k;
            ok &= chain && interval;
            lines.push(format!(
                "n={n} {route}: beta {:.4e} >= K* {k:.4e} >= K_dr {K_DR:.4e}: {chain}, L_opt in [1/(2K*), 1/K*]: {interval}",
                est.beta
            ));
        }
    }
    ensure(ok, lines.join("; "))
}

pub fn power_vs_dense() -> Outcome {
    let pr = problem(4);
    let sys = &pr.system;
    let spectrum = dense_generalized_symmetric_eigen(&dense_bab(sys), &sys.mp.to_dense()).unwrap();
    let (lo, hi) = (spectrum.eigenvalues[0], *spectrum.eigenvalues.last().unwrap());
    let est = fine(sys);
    let (e_max, e_min) = (rel(est.lambda_max, hi), rel(est.lambda_min, lo));
    let mut coarse_gap = 0.0f64;
    for n in [4, 16] {
        let s = &problem(n).system;
        let coarse = estimate_spectrum(s, &PowerOptions::coarse()).unwrap();
        coarse_gap = coarse_gap.max(rel(coarse.l_opt, fine(s).l_opt));
    }
    ensure(
        e_max <= 1e-6 && e_min <= 1e-6 && coarse_gap <= 0.02,
        format!(
            "lambda_max err {e_max:.3e}, lambda_min err {e_min:.3e} (bound 1e-6); coarse vs fine L_opt {coarse_gap:.3e} (bound 0.02)"
        ),
    )
}

pub fn mesh_trend(ns: &[usize]) -> Outcome {
    let d: Vec<f64> = ns.iter().map(|&n| 1.0 / fine(&problem(n).system).l_opt).collect();
    let ok = d.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6));
    let list: Vec<String> = ns.iter().zip(&d).map(|(n, d)| format!("n={n}: {d:.4e}")).collect();
    ensure(ok, format!("D_opt {}", list.join(", ")))
}

/// A numbered criterion with a short name.
pub struct Criterion {
    pub number: u32,
    pub name: &'static str,
    pub check: Check,
}

/// The full battery, in criterion order.
pub fn criteria() -> Vec<Criterion> {
    let list: Vec<(u32, &'static str, Check)> = vec![
        (1, "Richardson equivalence", Box::new(richardson_equivalence)),
        (2, "eigenvalue identifications", Box::new(eigenvalue_identifications)),
        (3, "contraction bound", Box::new(contraction_bound)),
        (4, "optimality of L_opt", Box::new(sweep_optimality)),
        (5, "divergence threshold", Box::new(divergence_threshold)),
        (6, "ordering chain", Box::new(ordering_chain)),
        (7, "power iteration vs dense oracle", Box::new(power_vs_dense)),
        (8, "mesh trend of D_opt", Box::new(|| mesh_trend(&[16, 32, 64, 128]))),
    ];
    list.into_iter()
        .map(|(number, name, check)| Criterion { number, name, check })
        .collect()
}
