//! Spectral estimates of the pressure Schur complement.
//!
//! With `S = (1/M) Mp + B A⁻¹ Bᵀ`, the fixed-stress iteration for impermeable media
//! is a Richardson iteration on `S p = g̃` preconditioned by `Mp` with step
//! `ω = (L + 1/M)⁻¹`. Its optimal step is `2 / (λ_max + λ_min)` where the λ are the
//! extreme eigenvalues of the pencil `(S, Mp)`. They are identified with the
//! mathematical bulk modulus `K*` and the inf-sup constant `β` through
//! `λ_max = 1/M + α²/K*` and `λ_min = 1/M + α²/β`, which gives
//! `L_opt = (α²/2)(1/K* + 1/β)`.
//!
//! All eigenproblems are posed on generalized pencils, so no matrix square roots
//! are formed, and `S` is only ever applied matrix-free.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::params::MaterialParams;
use crate::scalar::{dot, Scalar};
use crate::sparse::{factorize, Factorization, SparseMatrix};
use crate::system::BiotSystem;

/// A symmetric-definite pencil `S v = λ M v`, applied matrix-free.
pub trait Pencil<T> {
    fn dim(&self) -> usize;
    fn apply_s(&self, x: &[T]) -> Result<Vec<T>>;
    fn apply_m(&self, x: &[T]) -> Result<Vec<T>>;
    fn solve_m(&self, x: &[T]) -> Result<Vec<T>>;
}

/// `S p = (1/M) Mp p + B A⁻¹ Bᵀ p`, never formed explicitly.
pub fn schur_apply<T: Scalar>(system: &BiotSystem<T>, p: &[T]) -> Result<Vec<T>> {
    check_len("schur operand", system.num_p(), p.len())?;
    let btp = system.b.transpose_matvec(p)?;
    let u = system
        .solve_a(&btp)
        .map_err(|e| e.context("schur complement inner solve"))?;
    let mut out = system.b.matvec(&u)?;
    if system.params.inv_m != T::zero() {
        let mp = system.mp.matvec(p)?;
        for (o, m) in out.iter_mut().zip(mp) {
            *o += system.params.inv_m * m;
        }
    }
    Ok(out)
}

/// The pencil `(S, Mp)` of a Biot system.
#[derive(Clone, Copy, Debug)]
pub struct SchurPencil<'a, T> {
    pub system: &'a BiotSystem<T>,
}

impl<T: Scalar> Pencil<T> for SchurPencil<'_, T> {
    fn dim(&self) -> usize {
        self.system.num_p()
    }

    fn apply_s(&self, x: &[T]) -> Result<Vec<T>> {
        schur_apply(self.system, x)
    }

    fn apply_m(&self, x: &[T]) -> Result<Vec<T>> {
        self.system.mp.matvec(x)
    }

    fn solve_m(&self, x: &[T]) -> Result<Vec<T>> {
        self.system.solve_m(x)
    }
}

/// The pencil `(Ddiv, A)` whose largest eigenvalue is `1/K*`.
#[derive(Clone, Copy, Debug)]
pub struct DivergencePencil<'a, T> {
    pub system: &'a BiotSystem<T>,
}

impl<T: Scalar> Pencil<T> for DivergencePencil<'_, T> {
    fn dim(&self) -> usize {
        self.system.num_u()
    }

    fn apply_s(&self, x: &[T]) -> Result<Vec<T>> {
        self.system.ddiv.matvec(x)
    }

    fn apply_m(&self, x: &[T]) -> Result<Vec<T>> {
        self.system.a.matvec(x)
    }

    fn solve_m(&self, x: &[T]) -> Result<Vec<T>> {
        self.system.solve_a(x)
    }
}

/// A pencil of two assembled sparse matrices.
#[derive(Clone, Debug)]
pub struct MatrixPencil<T> {
    s: SparseMatrix<T>,
    m: SparseMatrix<T>,
    m_factor: Factorization<T>,
}

impl<T: Scalar> MatrixPencil<T> {
    pub fn new(s: SparseMatrix<T>, m: SparseMatrix<T>) -> Result<Self> {
        check_len("pencil rows", m.nrows(), s.nrows())?;
        check_len("pencil cols", m.ncols(), s.ncols())?;
        let m_factor = factorize(&m)?;
        Ok(Self { s, m, m_factor })
    }
}

impl<T: Scalar> Pencil<T> for MatrixPencil<T> {
    fn dim(&self) -> usize {
        self.s.nrows()
    }

    fn apply_s(&self, x: &[T]) -> Result<Vec<T>> {
        self.s.matvec(x)
    }

    fn apply_m(&self, x: &[T]) -> Result<Vec<T>> {
        self.m.matvec(x)
    }

    fn solve_m(&self, x: &[T]) -> Result<Vec<T>> {
        self.m_factor.solve(x)
    }
}

/// `(shift·M − S, M)`: its largest eigenvalue is `shift − λ_min(S, M)`.
struct Shifted<'a, T, P: ?Sized> {
    inner: &'a P,
    shift: T,
}

impl<T: Scalar, P: Pencil<T> + ?Sized> Pencil<T> for Shifted<'_, T, P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_s(&self, x: &[T]) -> Result<Vec<T>> {
        let s = self.inner.apply_s(x)?;
        let m = self.inner.apply_m(x)?;
        Ok(m.iter().zip(&s).map(|(&mi, &si)| self.shift * mi - si).collect())
    }

    fn apply_m(&self, x: &[T]) -> Result<Vec<T>> {
        self.inner.apply_m(x)
    }

    fn solve_m(&self, x: &[T]) -> Result<Vec<T>> {
        self.inner.solve_m(x)
    }
}

/// Power iteration controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerOptions<T> {
    /// Relative change of successive Rayleigh quotients (or relative eigen-residual)
    /// at which the iteration stops.
    pub tol: T,
    pub max_iter: usize,
    pub seed: u64,
}

impl<T: Scalar> PowerOptions<T> {
    /// Tight tolerance used for reference estimates.
    pub fn fine() -> Self {
        Self {
            tol: T::lit(1e-8),
            max_iter: 20_000,
            seed: 2024,
        }
    }

    /// Cheap a priori estimate.
    pub fn coarse() -> Self {
        Self {
            tol: T::lit(1e-3),
            ..Self::fine()
        }
    }
}

/// Dominant eigenpair estimate of a pencil.
#[derive(Clone, Debug)]
pub struct PowerEstimate<T> {
    pub value: T,
    /// Operator applications performed.
    pub steps: usize,
    /// `false` when `max_iter` was reached; `value` is then the best estimate.
    pub converged: bool,
    /// `M`-normalized iterate the value was computed from.
    pub vector: Vec<T>,
}

/// Deterministic pseudo-random start vector.
pub fn seeded_vector<T: Scalar>(n: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect()
}

/// Largest eigenvalue of `(S, M)` by the iteration `x ← M⁻¹ S x` with
/// `M`-normalization and Rayleigh quotients `xᵀSx / xᵀMx`.
///
/// Assumes the spectrum is non-negative, so the dominant eigenvalue is the largest.
pub fn power_iteration<T: Scalar, P: Pencil<T> + ?Sized>(
    pencil: &P,
    opts: &PowerOptions<T>,
) -> Result<PowerEstimate<T>> {
    power_iteration_from(pencil, seeded_vector(pencil.dim(), opts.seed), opts)
}

pub fn power_iteration_from<T: Scalar, P: Pencil<T> + ?Sized>(
    pencil: &P,
    start: Vec<T>,
    opts: &PowerOptions<T>,
) -> Result<PowerEstimate<T>> {
    check_len("power iteration start", pencil.dim(), start.len())?;
    if !(opts.tol > T::zero()) {
        return Err(Error::InvalidArgument("power iteration tolerance must be positive".into()));
    }
    let mut x = start;
    let norm = m_normalize(pencil, &mut x)?;
    if norm == T::zero() {
        return Err(Error::InvalidArgument("power iteration start vector is zero".into()));
    }

    let mut previous: Option<T> = None;
    let mut value = T::zero();
    for step in 1..=opts.max_iter {
        let sx = pencil.apply_s(&x)?;
        let mx = pencil.apply_m(&x)?;
        value = dot(&x, &sx) / dot(&x, &mx);
        let mut y = pencil.solve_m(&sx)?;

        // M-norm of M⁻¹(Sx − θ Mx) = y − θ x
        let z: Vec<T> = y.iter().zip(&x).map(|(&yi, &xi)| yi - value * xi).collect();
        let mz = pencil.apply_m(&z)?;
        let residual = dot(&z, &mz).max(T::zero()).sqrt();

        let scale = value.abs().max(T::min_positive_value());
        let small_change = previous.is_some_and(|p| (value - p).abs() <= opts.tol * scale);
        if small_change || residual <= opts.tol * scale {
            return Ok(PowerEstimate {
                value,
                steps: step,
                converged: true,
                vector: x,
            });
        }
        previous = Some(value);

        if m_normalize(pencil, &mut y)? == T::zero() {
            // x lies in the kernel of S; every Rayleigh quotient from here on is zero
            return Ok(PowerEstimate {
                value: T::zero(),
                steps: step,
                converged: true,
                vector: x,
            });
        }
        x = y;
    }
    Ok(PowerEstimate {
        value,
        steps: opts.max_iter,
        converged: false,
        vector: x,
    })
}

fn m_normalize<T: Scalar, P: Pencil<T> + ?Sized>(pencil: &P, x: &mut [T]) -> Result<T> {
    let mx = pencil.apply_m(x)?;
    let norm = dot(x, &mx).max(T::zero()).sqrt();
    if norm > T::zero() {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(norm)
}

/// Smallest eigenvalue by power iteration on `(λ_max M − S, M)`.
pub fn power_iteration_min_with<T: Scalar, P: Pencil<T> + ?Sized>(
    pencil: &P,
    lambda_max: T,
    opts: &PowerOptions<T>,
) -> Result<PowerEstimate<T>> {
    let shifted = Shifted {
        inner: pencil,
        shift: lambda_max,
    };
    // seed differs from the max run so the two start vectors are independent
    let est = power_iteration_from(
        &shifted,
        seeded_vector(pencil.dim(), opts.seed.wrapping_add(1)),
        opts,
    )?;
    Ok(PowerEstimate {
        value: lambda_max - est.value,
        ..est
    })
}

/// `λ_max` of the Schur pencil `(S, Mp)`.
pub fn power_iteration_max<T: Scalar>(
    system: &BiotSystem<T>,
    opts: &PowerOptions<T>,
) -> Result<PowerEstimate<T>> {
    power_iteration(&SchurPencil { system }, opts)
}

/// `λ_min` of the Schur pencil `(S, Mp)`, given an estimate of `λ_max`.
pub fn power_iteration_min<T: Scalar>(
    system: &BiotSystem<T>,
    lambda_max: T,
    opts: &PowerOptions<T>,
) -> Result<PowerEstimate<T>> {
    power_iteration_min_with(&SchurPencil { system }, lambda_max, opts)
}

/// Mathematical bulk modulus: the largest `K` with
/// `2μ‖ε(u)‖² + λ‖div u‖² ≥ K ‖div u‖²` on the discrete displacement space,
/// i.e. the reciprocal of the largest eigenvalue of `(Ddiv, A)`.
pub fn estimate_k_star<T: Scalar>(
    system: &BiotSystem<T>,
    opts: &PowerOptions<T>,
) -> Result<PowerEstimate<T>> {
    let est = power_iteration(&DivergencePencil { system }, opts)?;
    if !(est.value > T::zero()) {
        return Err(Error::Degenerate(
            "div-div form vanishes on the displacement space; K* is undefined".into(),
        ));
    }
    Ok(PowerEstimate {
        value: T::one() / est.value,
        ..est
    })
}

/// Relative margin below which `λ_min − 1/M` is treated as zero.
const INF_SUP_MARGIN: f64 = 1e-12;

/// `β = α² / (λ_min − 1/M)`.
pub fn estimate_beta<T: Scalar>(params: &MaterialParams<T>, lambda_min: T) -> Result<T> {
    let gap = lambda_min - params.inv_m;
    if !(gap > T::lit(INF_SUP_MARGIN) * lambda_min.abs()) || !(gap > T::zero()) {
        return Err(Error::Degenerate(format!(
            "inf-sup stability violated: lambda_min = {lambda_min:e} does not exceed 1/M = {:e}",
            params.inv_m
        )));
    }
    Ok(params.alpha * params.alpha / gap)
}

/// Richardson contraction factor `max(|1 − ω λ_min|, |1 − ω λ_max|)`.
pub fn contraction_factor<T: Scalar>(omega: T, lambda_min: T, lambda_max: T) -> T {
    (T::one() - omega * lambda_min)
        .abs()
        .max((T::one() - omega * lambda_max).abs())
}

/// Everything derived from the two extreme eigenvalues of `(S, Mp)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralEstimates<T> {
    pub lambda_max: T,
    pub lambda_min: T,
    /// `α² / (λ_max − 1/M)`
    pub k_star: T,
    /// `α² / (λ_min − 1/M)`
    pub beta: T,
    /// `2 / (λ_max + λ_min)`
    pub omega_opt: T,
    /// `1/ω_opt − 1/M = (α²/2)(1/K* + 1/β)`
    pub l_opt: T,
    /// `(λ_max − λ_min) / (λ_max + λ_min)`
    pub rho_opt: T,
    /// Power iteration steps for `(λ_max, λ_min)`.
    pub iterations_used: (usize, usize),
    /// Whether both power iterations met their tolerance.
    pub converged: bool,
}

impl<T: Scalar> SpectralEstimates<T> {
    /// Contraction factor of the Richardson iteration with step `omega`.
    pub fn rho(&self, omega: T) -> T {
        contraction_factor(omega, self.lambda_min, self.lambda_max)
    }

    /// `D_opt = α² / L_opt`.
    pub fn d_opt(&self, params: &MaterialParams<T>) -> T {
        params.alpha * params.alpha / self.l_opt
    }
}

pub fn optimal_parameters<T: Scalar>(
    lambda_max: T,
    lambda_min: T,
    params: &MaterialParams<T>,
) -> Result<SpectralEstimates<T>> {
    if !(lambda_min > T::zero()) || !(lambda_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue estimates must satisfy 0 < lambda_min, got {lambda_min:e}"
        )));
    }
    if lambda_min > lambda_max {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue estimates out of order: lambda_min = {lambda_min:e} > lambda_max = {lambda_max:e}"
        )));
    }
    let a2 = params.alpha * params.alpha;
    let beta = estimate_beta(params, lambda_min)?;
    let k_star = a2 / (lambda_max - params.inv_m);
    let omega_opt = T::lit(2.0) / (lambda_max + lambda_min);
    Ok(SpectralEstimates {
        lambda_max,
        lambda_min,
        k_star,
        beta,
        omega_opt,
        l_opt: T::one() / omega_opt - params.inv_m,
        rho_opt: (lambda_max - lambda_min) / (lambda_max + lambda_min),
        iterations_used: (0, 0),
        converged: true,
    })
}

/// Runs both power iterations on the Schur pencil and derives the optimal parameters.
pub fn estimate_spectrum<T: Scalar>(
    system: &BiotSystem<T>,
    opts: &PowerOptions<T>,
) -> Result<SpectralEstimates<T>> {
    let max = power_iteration_max(system, opts).map_err(|e| e.context("lambda_max"))?;
    let min = power_iteration_min(system, max.value, opts).map_err(|e| e.context("lambda_min"))?;
    // the shifted estimate can overshoot by round-off when the spectrum is a single point
    let lambda_min = min.value.min(max.value);
    let mut est = optimal_parameters(max.value, lambda_min, &system.params)?;
    est.iterations_used = (max.steps, min.steps);
    est.converged = max.converged && min.converged;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::DenseMatrix;

    fn diag_pencil(d: &[f64]) -> MatrixPencil<f64> {
        MatrixPencil::new(SparseMatrix::from_diagonal(d), SparseMatrix::identity(d.len())).unwrap()
    }

    #[test]
    fn diagonal_fixture_extremes() {
        let p = diag_pencil(&[1.0, 2.0, 3.0]);
        let opts = PowerOptions { tol: 1e-12, max_iter: 10_000, seed: 1 };
        let max = power_iteration(&p, &opts).unwrap();
        assert!((max.value - 3.0).abs() < 1e-9, "{}", max.value);
        let min = power_iteration_min_with(&p, max.value, &opts).unwrap();
        assert!((min.value - 1.0).abs() < 1e-9, "{}", min.value);
    }

    #[test]
    fn proportional_pencil_converges_immediately() {
        let c = 2.5f64;
        let m = SparseMatrix::from_triplets(
            3,
            3,
            [(0, 0, 2.0), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 1.0), (2, 2, 3.0)],
        )
        .unwrap();
        let p = MatrixPencil::new(m.scaled(c), m).unwrap();
        let opts = PowerOptions::fine();
        let max = power_iteration(&p, &opts).unwrap();
        assert_eq!(max.steps, 1);
        assert!((max.value - c).abs() < 1e-14);
        let min = power_iteration_min_with(&p, max.value, &opts).unwrap();
        assert!((min.value - c).abs() < 1e-14);
    }

    #[test]
    fn iteration_cap_flags_inexact() {
        let p = diag_pencil(&[1.0, 1.999, 2.0]);
        let opts = PowerOptions { tol: 1e-15, max_iter: 3, seed: 1 };
        let est = power_iteration(&p, &opts).unwrap();
        assert!(!est.converged);
        assert_eq!(est.steps, 3);
        assert!(est.value > 1.0 && est.value <= 2.0);
    }

    #[test]
    fn degenerate_spectrum_parameters() {
        let params = MaterialParams::<f64>::reference();
        let lam = 1.0 / 9e10;
        let e = optimal_parameters(lam, lam, &params).unwrap();
        assert!((e.omega_opt - 1.0 / lam).abs() <= 1e-12 / lam);
        assert_eq!(e.rho_opt, 0.0);
        assert!((e.l_opt - 1.0 / e.k_star).abs() <= 1e-12 * e.l_opt);
        assert_eq!(e.k_star, e.beta);
    }

    #[test]
    fn equal_moduli_reduce_to_single_modulus() {
        let params = MaterialParams::<f64>::reference();
        let k = 1.2e11;
        let e = optimal_parameters(1.0 / k, 1.0 / k, &params).unwrap();
        assert!((e.l_opt - 1.0 / k).abs() <= 1e-14 / k);
    }

    #[test]
    fn identification_chain_closes() {
        let params = MaterialParams::new(1.0f64, 2.0, 0.8, 0.05, 0.0).unwrap();
        let e = optimal_parameters(0.7, 0.2, &params).unwrap();
        let a2 = params.alpha * params.alpha;
        let from_moduli = a2 / 2.0 * (1.0 / e.k_star + 1.0 / e.beta);
        assert!((from_moduli - e.l_opt).abs() <= 1e-10 * e.l_opt);
        assert!(e.beta >= e.k_star);
        assert!((0.0..1.0).contains(&e.rho_opt));
        assert!((e.rho(e.omega_opt) - e.rho_opt).abs() < 1e-15);
    }

    #[test]
    fn ordering_violation_rejected() {
        let params = MaterialParams::<f64>::reference();
        assert!(optimal_parameters(1.0, 2.0, &params).is_err());
        assert!(optimal_parameters(1.0, 0.0, &params).is_err());
    }

    #[test]
    fn beta_inversion_and_inf_sup_failure() {
        let params = MaterialParams::<f64>::reference();
        let c = 3.0e11;
        assert!((estimate_beta(&params, 1.0 / c).unwrap() - c).abs() <= 1e-4);
        let compressible = MaterialParams::new(1.0, 1.0, 1.0, 0.5, 0.0).unwrap();
        assert!(estimate_beta(&compressible, 0.5).is_err());
        assert!(estimate_beta(&compressible, 0.4).is_err());
    }

    #[test]
    fn proportional_forms_give_exact_k_star() {
        // A = (2μ + λ) Ddiv: every displacement attains the bound
        let (mu, lambda) = (3.0f64, 4.0);
        let params = MaterialParams::new(mu, lambda, 1.0, 0.0, 0.0).unwrap();
        let ddiv = SparseMatrix::from_triplets(
            2,
            2,
            [(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)],
        )
        .unwrap();
        let a = ddiv.scaled(2.0 * mu + lambda);
        let b = SparseMatrix::from_triplets(1, 2, [(0, 0, 1.0), (0, 1, 0.5)]).unwrap();
        let mp = SparseMatrix::identity(1);
        let sys = BiotSystem::from_reduced(params, a, b, mp, ddiv).unwrap();
        let k = estimate_k_star(&sys, &PowerOptions::fine()).unwrap();
        assert!((k.value - (2.0 * mu + lambda)).abs() < 1e-12);
    }

    #[test]
    fn decoupled_fixture_has_zero_schur() {
        let params = MaterialParams::new(1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let sys = BiotSystem::from_reduced(
            params,
            SparseMatrix::identity(3),
            SparseMatrix::zeros(2, 3),
            SparseMatrix::identity(2),
            SparseMatrix::identity(3),
        )
        .unwrap();
        assert_eq!(schur_apply(&sys, &[1.0, -2.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(schur_apply(&sys, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn rayleigh_quotients_are_bracketed_on_small_dense_pencil() {
        let s = DenseMatrix::from_fn(4, 4, |i, j| if i == j { 2.0 + i as f64 } else { 0.3 });
        let m = DenseMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.1 });
        let p = MatrixPencil::new(SparseMatrix::from_dense(&s), SparseMatrix::from_dense(&m)).unwrap();
        let opts = PowerOptions { tol: 1e-13, max_iter: 100_000, seed: 3 };
        let max = power_iteration(&p, &opts).unwrap();
        let min = power_iteration_min_with(&p, max.value, &opts).unwrap();
        let dense = crate::sparse::dense_generalized_symmetric_eigen(&s, &m).unwrap();
        assert!((max.value - dense.eigenvalues[3]).abs() < 1e-9);
        assert!((min.value - dense.eigenvalues[0]).abs() < 1e-9);
    }
}
