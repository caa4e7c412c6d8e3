use biot_core::assembly::ManufacturedSources;
use biot_core::params::MaterialParams;
use biot_core::scalar::dot;
use biot_core::sparse::{dense_generalized_symmetric_eigen, DenseMatrix};
use biot_core::spectral::{
    estimate_k_star, estimate_spectrum, power_iteration_max, power_iteration_min, schur_apply,
    seeded_vector, PowerOptions,
};
use biot_core::system::{BiotProblem, BiotSystem};

fn problem(n: usize, params: MaterialParams<f64>) -> BiotProblem<f64> {
    BiotProblem::new(n, params, ManufacturedSources::default()).unwrap()
}

fn dense_schur(sys: &BiotSystem<f64>) -> DenseMatrix<f64> {
    let a = sys.a.to_dense();
    let b = sys.b.to_dense();
    let s = b.matmul(&a.solve_matrix(&b.transpose()).unwrap());
    let s = s.add(&sys.mp.to_dense().scaled(sys.params.inv_m));
    DenseMatrix::from_fn(s.nrows(), s.ncols(), |i, j| 0.5 * (s[(i, j)] + s[(j, i)]))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn matrix_free_schur_matches_dense() {
    let pr = problem(4, MaterialParams::reference());
    let sys = &pr.system;
    let s = dense_schur(sys);
    for k in 0..20 {
        let p = seeded_vector::<f64>(sys.num_p(), 100 + k);
        let got = schur_apply(sys, &p).unwrap();
        let want = s.matvec(&p);
        let err: f64 = got.iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = want.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= 1e-10 * norm, "sample {k}: {err:e}");
    }
}

#[test]
fn schur_is_symmetric_and_positive() {
    let mut params = MaterialParams::reference();
    params.inv_m = 1e-12;
    let pr = problem(8, params);
    let sys = &pr.system;
    for k in 0..10 {
        let p = seeded_vector::<f64>(sys.num_p(), 2 * k);
        let q = seeded_vector::<f64>(sys.num_p(), 2 * k + 1);
        let sp = schur_apply(sys, &p).unwrap();
        let sq = schur_apply(sys, &q).unwrap();
        let (a, b) = (dot(&sp, &q), dot(&p, &sq));
        let scale = (dot(&sp, &sp) * dot(&q, &q)).sqrt();
        assert!((a - b).abs() <= 1e-10 * scale);
        assert!(dot(&p, &sp) > 0.0);
    }
}

#[test]
fn power_iterations_match_dense_pencil() {
    let pr = problem(4, MaterialParams::reference());
    let sys = &pr.system;
    let dense = dense_generalized_symmetric_eigen(&dense_schur(sys), &sys.mp.to_dense()).unwrap();
    let (lo, hi) = (dense.eigenvalues[0], *dense.eigenvalues.last().unwrap());
    let opts = PowerOptions::fine();
    let max = power_iteration_max(sys, &opts).unwrap();
    let min = power_iteration_min(sys, max.value, &opts).unwrap();
    assert!(max.converged && min.converged);
    assert!(rel(max.value, hi) <= 1e-6, "{:e} vs {hi:e}", max.value);
    assert!(rel(min.value, lo) <= 1e-6, "{:e} vs {lo:e}", min.value);
}

#[test]
fn estimates_bracket_rayleigh_quotients() {
    let pr = problem(8, MaterialParams::reference());
    let sys = &pr.system;
    let est = estimate_spectrum(sys, &PowerOptions::fine()).unwrap();
    let slack = 1e-6 * est.lambda_max;
    for k in 0..100 {
        let p = seeded_vector::<f64>(sys.num_p(), 1000 + k);
        let rq = dot(&p, &schur_apply(sys, &p).unwrap()) / sys.mp.quadratic_form(&p).unwrap();
        assert!(rq >= est.lambda_min - slack && rq <= est.lambda_max + slack);
    }
}

#[test]
fn beta_matches_dense_lagrangian_oracle() {
    let pr = problem(4, MaterialParams::reference());
    let sys = &pr.system;
    let s = dense_schur(sys);
    let dense = dense_generalized_symmetric_eigen(&s, &sys.mp.to_dense()).unwrap();
    let beta_oracle = sys.params.alpha.powi(2) / dense.eigenvalues[0];
    let est = estimate_spectrum(sys, &PowerOptions::fine()).unwrap();
    assert!(rel(est.beta, beta_oracle) <= 1e-6);
}

#[test]
fn moduli_order_and_stabilization_interval() {
    let pr = problem(8, MaterialParams::reference());
    let sys = &pr.system;
    let est = estimate_spectrum(sys, &PowerOptions::fine()).unwrap();
    let k_div = estimate_k_star(sys, &PowerOptions::fine()).unwrap().value;
    let k_dr = sys.params.drained_bulk_modulus();
    assert!(est.beta >= est.k_star);
    assert!(est.k_star >= k_div && k_div >= k_dr);
    assert!(est.l_opt >= 0.5 / est.k_star && est.l_opt <= 1.0 / est.k_star);
}

#[test]
fn scaling_moduli_scales_estimates() {
    let base = MaterialParams::reference();
    let c = 3.0;
    let opts = PowerOptions { tol: 1e-12, ..PowerOptions::fine() };
    let e1 = estimate_spectrum(&problem(4, base).system, &opts).unwrap();
    let e2 = estimate_spectrum(&problem(4, base.with_scaled_moduli(c)).system, &opts).unwrap();
    assert!(rel(e2.k_star, c * e1.k_star) < 1e-9);
    assert!(rel(e2.beta, c * e1.beta) < 1e-9);
    assert!(rel(e2.lambda_max, e1.lambda_max / c) < 1e-9);
    assert!(rel(e2.l_opt, e1.l_opt / c) < 1e-9);
}

#[test]
fn coarse_estimate_is_close_to_fine() {
    let sys = problem(8, MaterialParams::reference()).system;
    let fine = estimate_spectrum(&sys, &PowerOptions::fine()).unwrap();
    let coarse = estimate_spectrum(&sys, &PowerOptions::coarse()).unwrap();
    assert!(coarse.iterations_used.0 < fine.iterations_used.0);
    assert!(rel(coarse.l_opt, fine.l_opt) < 0.02);
}

#[test]
fn single_precision_estimates_track_double() {
    let p64 = problem(4, MaterialParams::reference());
    let p32 =
        BiotProblem::<f32>::new(4, MaterialParams::reference(), ManufacturedSources::default()).unwrap();
    let e64 = estimate_spectrum(&p64.system, &PowerOptions::fine()).unwrap();
    let opts = PowerOptions { tol: 1e-5f32, max_iter: 5000, seed: 2024 };
    let e32 = estimate_spectrum(&p32.system, &opts).unwrap();
    assert!(rel(e32.l_opt as f64, e64.l_opt) < 1e-2);
}
