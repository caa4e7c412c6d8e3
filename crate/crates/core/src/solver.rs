//! Fixed-stress splitting, its Richardson form, and the monolithic reference solve.
//!
//! One fixed-stress iteration first updates the pressure with a stabilized flow
//! solve and then the displacement with a mechanics solve:
//!
//! ```text
//! p ← p + [(L + 1/M) Mp]⁻¹ (g − B u − (1/M) Mp p)
//! u ← A⁻¹ (f + Bᵀ p)
//! ```
//!
//! Eliminating `u` turns the pressure sequence into `p ← p + ω Mp⁻¹ (g̃ − S p)`
//! with `ω = (L + 1/M)⁻¹`, `S = (1/M) Mp + B A⁻¹ Bᵀ` and `g̃ = g − B A⁻¹ f`.

use crate::error::{check_len, Error, Result};
use crate::params::TimeGrid;
use crate::scalar::{dot, norm2, Scalar};
use crate::sparse::{cg_solve, LinearOperator};
use crate::spectral::schur_apply;
use crate::system::{BiotProblem, BiotSystem, Loads};

const NORM_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig<T> {
    /// Stabilization parameter `L` (1/Pa).
    pub l: T,
    /// Relative increment tolerance.
    pub eps_r: T,
    /// Iteration cap per solve (per time step).
    pub max_iter: usize,
    /// Relative residual target of the Schur-complement CG in [`monolithic_solve`].
    pub inner_tol: T,
    /// Keep every iterate in the trace, not only the norms.
    pub keep_iterates: bool,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(l: T) -> Self {
        Self {
            l,
            eps_r: T::lit(1e-6),
            max_iter: 500,
            inner_tol: T::lit(1e-12),
            keep_iterates: false,
        }
    }

    pub fn validate(&self, inv_m: T) -> Result<()> {
        if !(self.l >= T::zero()) || !self.l.is_finite() {
            return Err(Error::InvalidArgument(format!("L must be non-negative, got {}", self.l)));
        }
        if !(self.l + inv_m > T::zero()) {
            return Err(Error::InvalidArgument(
                "L must be positive when 1/M = 0".into(),
            ));
        }
        if !(self.eps_r > T::zero()) {
            return Err(Error::InvalidArgument(format!("eps_r must be positive, got {}", self.eps_r)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.inner_tol > T::zero()) {
            return Err(Error::InvalidArgument("inner_tol must be positive".into()));
        }
        Ok(())
    }

    /// Richardson step length equivalent to this stabilization.
    pub fn omega(&self, inv_m: T) -> T {
        T::one() / (self.l + inv_m)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord<T> {
    /// `‖Δp‖_M`
    pub dp_norm: T,
    /// `‖Δu‖_A`
    pub du_norm: T,
    /// `‖p‖_M` of the new iterate.
    pub p_norm: T,
    /// `‖u‖_A` of the new iterate.
    pub u_norm: T,
    /// Present when [`SolverConfig::keep_iterates`] is set.
    pub iterate: Option<(Vec<T>, Vec<T>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace<T> {
    pub records: Vec<IterationRecord<T>>,
    pub converged: bool,
    /// Index of the first iteration meeting the tolerance, or the number of
    /// iterations performed when it was never met.
    pub iterations: usize,
}

/// Result of [`fixed_stress_solve`]. Non-convergence is not an `Err`; it is
/// reported through `trace.converged` so sweeps can record it and move on.
#[derive(Clone, Debug)]
pub struct SplitSolution<T> {
    pub u: Vec<T>,
    pub p: Vec<T>,
    pub trace: IterationTrace<T>,
}

impl<T> SplitSolution<T> {
    pub fn converged(&self) -> bool {
        self.trace.converged
    }
}

/// One fixed-stress iteration from `(u_prev, p_prev)`.
pub fn fixed_stress_step<T: Scalar>(
    system: &BiotSystem<T>,
    loads: &Loads<T>,
    u_prev: &[T],
    p_prev: &[T],
    l: T,
) -> Result<(Vec<T>, Vec<T>)> {
    check_len("displacement iterate", system.num_u(), u_prev.len())?;
    check_len("pressure iterate", system.num_p(), p_prev.len())?;
    check_len("flow load", system.num_p(), loads.g.len())?;
    let inv_m = system.params.inv_m;
    let stab = l + inv_m;
    if !(stab > T::zero()) {
        return Err(Error::InvalidArgument("L + 1/M must be positive".into()));
    }

    let bu = system.b.matvec(u_prev)?;
    let mp = system.mp.matvec(p_prev)?;
    let r: Vec<T> = loads
        .g
        .iter()
        .zip(&bu)
        .zip(&mp)
        .map(|((&g, &bu), &mp)| g - bu - inv_m * mp)
        .collect();
    let dp = system.solve_m(&r).map_err(|e| e.context("flow solve"))?;
    let p_next: Vec<T> = p_prev.iter().zip(&dp).map(|(&p, &d)| p + d / stab).collect();
    let u_next = system
        .displacement_for(&loads.f, &p_next)
        .map_err(|e| e.context("mechanics solve"))?;
    Ok((u_next, p_next))
}

/// Iterates [`fixed_stress_step`] until both relative energy-norm increments are
/// at most `eps_r`, counting the first iteration that satisfies the test.
pub fn fixed_stress_solve<T: Scalar>(
    system: &BiotSystem<T>,
    loads: &Loads<T>,
    config: &SolverConfig<T>,
    u_init: &[T],
    p_init: &[T],
) -> Result<SplitSolution<T>> {
    config.validate(system.params.inv_m)?;
    let floor = T::lit(NORM_FLOOR);
    let mut u = u_init.to_vec();
    let mut p = p_init.to_vec();
    let mut records = Vec::new();

    for i in 1..=config.max_iter {
        let (u_next, p_next) = fixed_stress_step(system, loads, &u, &p, config.l)?;
        let du: Vec<T> = u_next.iter().zip(&u).map(|(&a, &b)| a - b).collect();
        let dp: Vec<T> = p_next.iter().zip(&p).map(|(&a, &b)| a - b).collect();
        let rec = IterationRecord {
            dp_norm: system.mp.energy_norm(&dp)?,
            du_norm: system.a.energy_norm(&du)?,
            p_norm: system.mp.energy_norm(&p_next)?,
            u_norm: system.a.energy_norm(&u_next)?,
            iterate: config
                .keep_iterates
                .then(|| (u_next.clone(), p_next.clone())),
        };
        u = u_next;
        p = p_next;

        let finite = rec.dp_norm.is_finite() && rec.du_norm.is_finite();
        let done = rec.dp_norm <= config.eps_r * rec.p_norm.max(floor)
            && rec.du_norm <= config.eps_r * rec.u_norm.max(floor);
        records.push(rec);
        if !finite || done {
            return Ok(SplitSolution {
                u,
                p,
                trace: IterationTrace {
                    records,
                    converged: done && finite,
                    iterations: i,
                },
            });
        }
    }
    Ok(SplitSolution {
        u,
        p,
        trace: IterationTrace {
            records,
            converged: false,
            iterations: config.max_iter,
        },
    })
}

/// `g̃ = g − B A⁻¹ f`.
pub fn reduced_flow_rhs<T: Scalar>(system: &BiotSystem<T>, loads: &Loads<T>) -> Result<Vec<T>> {
    check_len("flow load", system.num_p(), loads.g.len())?;
    let a_inv_f = system.solve_a(&loads.f)?;
    let b = system.b.matvec(&a_inv_f)?;
    Ok(loads.g.iter().zip(&b).map(|(&g, &b)| g - b).collect())
}

/// `p + ω Mp⁻¹ (g̃ − S p)`, with `g̃` from [`reduced_flow_rhs`].
pub fn richardson_step<T: Scalar>(
    system: &BiotSystem<T>,
    g_tilde: &[T],
    p_prev: &[T],
    omega: T,
) -> Result<Vec<T>> {
    check_len("reduced flow load", system.num_p(), g_tilde.len())?;
    if !(omega >= T::zero()) {
        return Err(Error::InvalidArgument(format!("omega must be non-negative, got {omega}")));
    }
    if omega == T::zero() {
        return Ok(p_prev.to_vec());
    }
    let sp = schur_apply(system, p_prev)?;
    let r: Vec<T> = g_tilde.iter().zip(&sp).map(|(&g, &s)| g - s).collect();
    let d = system.solve_m(&r)?;
    Ok(p_prev.iter().zip(&d).map(|(&p, &d)| p + omega * d).collect())
}

/// The Schur complement as a [`LinearOperator`].
#[derive(Clone, Copy, Debug)]
pub struct SchurOperator<'a, T> {
    pub system: &'a BiotSystem<T>,
}

impl<T: Scalar> LinearOperator<T> for SchurOperator<'_, T> {
    fn dim(&self) -> usize {
        self.system.num_p()
    }

    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()> {
        y.copy_from_slice(&schur_apply(self.system, x)?);
        Ok(())
    }
}

/// Solves the coupled block system by CG on `S p = g̃` to relative residual `tol`
/// followed by `u = A⁻¹ (f + Bᵀ p)`.
pub fn monolithic_solve<T: Scalar>(
    system: &BiotSystem<T>,
    loads: &Loads<T>,
    tol: T,
) -> Result<(Vec<T>, Vec<T>)> {
    let g_tilde = reduced_flow_rhs(system, loads)?;
    let max_iter = 10 * system.num_p() + 100;
    let sol = cg_solve(&SchurOperator { system }, &g_tilde, tol, max_iter)
        .map_err(|e| e.context("Schur complement solve"))?;
    let u = system.displacement_for(&loads.f, &sol.x)?;
    Ok((u, sol.x))
}

/// `‖K [u; p] − [f; g]‖ / ‖[f; g]‖` for the block operator
/// `K = [A  −Bᵀ; B  (1/M) Mp]`.
pub fn block_residual<T: Scalar>(
    system: &BiotSystem<T>,
    loads: &Loads<T>,
    u: &[T],
    p: &[T],
) -> Result<T> {
    let au = system.a.matvec(u)?;
    let btp = system.b.transpose_matvec(p)?;
    let bu = system.b.matvec(u)?;
    let mp = system.mp.matvec(p)?;
    let inv_m = system.params.inv_m;
    let r1: Vec<T> = (0..u.len()).map(|i| au[i] - btp[i] - loads.f[i]).collect();
    let r2: Vec<T> = (0..p.len())
        .map(|i| bu[i] + inv_m * mp[i] - loads.g[i])
        .collect();
    let num = (dot(&r1, &r1) + dot(&r2, &r2)).sqrt();
    let den = (dot(&loads.f, &loads.f) + dot(&loads.g, &loads.g)).sqrt();
    Ok(if den == T::zero() { num } else { num / den })
}

#[derive(Clone, Debug)]
pub struct TimeMarchReport<T> {
    /// Fixed-stress iterations of every completed step.
    pub iterations: Vec<usize>,
    /// Whether each of those steps converged; marching stops at the first failure.
    pub converged: Vec<bool>,
    /// Mean iterations per step, or `+∞` when any step failed.
    pub average: f64,
    pub u: Vec<T>,
    pub p: Vec<T>,
}

impl<T> TimeMarchReport<T> {
    pub fn diverged(&self) -> bool {
        self.converged.iter().any(|c| !c)
    }
}

/// Implicit Euler from a zero initial state with warm-started fixed-stress solves.
pub fn time_march<T: Scalar>(
    problem: &BiotProblem<T>,
    config: &SolverConfig<T>,
    grid: &TimeGrid<T>,
) -> Result<TimeMarchReport<T>> {
    let sys = &problem.system;
    config.validate(sys.params.inv_m)?;
    let mut u = vec![T::zero(); sys.num_u()];
    let mut p = vec![T::zero(); sys.num_p()];
    let mut iterations = Vec::new();
    let mut converged = Vec::new();
    for t in grid.step_times()? {
        let loads = problem.step_loads(&u, &p, t, grid.tau)?;
        let sol = fixed_stress_solve(sys, &loads, config, &u, &p)?;
        iterations.push(sol.trace.iterations);
        converged.push(sol.trace.converged);
        u = sol.u;
        p = sol.p;
        if !sol.trace.converged {
            break;
        }
    }
    let average = if converged.iter().all(|&c| c) {
        iterations.iter().sum::<usize>() as f64 / iterations.len() as f64
    } else {
        f64::INFINITY
    };
    Ok(TimeMarchReport {
        iterations,
        converged,
        average,
        u,
        p,
    })
}

/// Relative difference `‖x − y‖ / max(‖y‖, tiny)` in the Euclidean norm.
pub fn relative_difference<T: Scalar>(x: &[T], y: &[T]) -> T {
    let d: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
    norm2(&d) / norm2(y).max(T::lit(NORM_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::ManufacturedSources;
    use crate::params::MaterialParams;
    use crate::spectral::seeded_vector;

    fn problem(n: usize) -> BiotProblem<f64> {
        BiotProblem::new(n, MaterialParams::reference(), ManufacturedSources::default()).unwrap()
    }

    fn random_loads(sys: &BiotSystem<f64>, seed: u64) -> Loads<f64> {
        Loads {
            f: seeded_vector::<f64>(sys.num_u(), seed).iter().map(|v| v * 1e9).collect(),
            g: seeded_vector(sys.num_p(), seed + 7),
        }
    }

    fn l_drained(p: &MaterialParams<f64>) -> f64 {
        p.alpha * p.alpha / p.drained_bulk_modulus()
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let pr = problem(4);
        let sys = &pr.system;
        let loads = Loads::zeros(sys);
        let (u, p) =
            fixed_stress_step(sys, &loads, &vec![0.0; sys.num_u()], &vec![0.0; sys.num_p()], 1e-11)
                .unwrap();
        assert!(u.iter().chain(&p).all(|&v| v == 0.0));
        let cfg = SolverConfig::new(1e-11);
        let sol = fixed_stress_solve(sys, &loads, &cfg, &u, &p).unwrap();
        assert!(sol.converged());
        assert_eq!(sol.trace.iterations, 1);
        let (u, p) = monolithic_solve(sys, &loads, 1e-12).unwrap();
        assert!(u.iter().chain(&p).all(|&v| v == 0.0));
    }

    #[test]
    fn step_matches_dense_block_oracle() {
        let pr = problem(8);
        let sys = &pr.system;
        let loads = random_loads(sys, 11);
        let l = l_drained(&sys.params);
        let u0 = seeded_vector::<f64>(sys.num_u(), 3);
        let p0 = seeded_vector::<f64>(sys.num_p(), 4);

        let a = sys.a.to_dense();
        let b = sys.b.to_dense();
        let m = sys.mp.to_dense();
        let stab = m.clone().scaled(l + sys.params.inv_m);
        let r: Vec<f64> = {
            let bu = b.matvec(&u0);
            let mp = m.matvec(&p0);
            (0..p0.len()).map(|i| loads.g[i] - bu[i] - sys.params.inv_m * mp[i]).collect()
        };
        let dp = stab.solve(&r).unwrap();
        let p1: Vec<f64> = p0.iter().zip(&dp).map(|(a, b)| a + b).collect();
        let btp = b.transpose().matvec(&p1);
        let rhs: Vec<f64> = loads.f.iter().zip(&btp).map(|(a, b)| a + b).collect();
        let u1 = a.cholesky().unwrap().solve(&rhs);

        let (u, p) = fixed_stress_step(sys, &loads, &u0, &p0, l).unwrap();
        assert!(relative_difference(&p, &p1) < 1e-10);
        assert!(relative_difference(&u, &u1) < 1e-10);
    }

    #[test]
    fn monolithic_residual_and_schur_route() {
        let pr = problem(8);
        let sys = &pr.system;
        let loads = random_loads(sys, 5);
        let (u, p) = monolithic_solve(sys, &loads, 1e-12).unwrap();
        assert!(block_residual(sys, &loads, &u, &p).unwrap() <= 1e-10);

        let a = sys.a.to_dense();
        let b = sys.b.to_dense();
        let ainv_bt = a.solve_matrix(&b.transpose()).unwrap();
        let s = b.matmul(&ainv_bt).add(&sys.mp.to_dense().scaled(sys.params.inv_m));
        let g_tilde = reduced_flow_rhs(sys, &loads).unwrap();
        let p_dense = s.solve(&g_tilde).unwrap();
        assert!(relative_difference(&p, &p_dense) < 1e-9);
    }

    #[test]
    fn split_solution_matches_monolithic() {
        let pr = problem(8);
        let sys = &pr.system;
        let loads = random_loads(sys, 9);
        let mut cfg = SolverConfig::new(l_drained(&sys.params));
        cfg.max_iter = 2000;
        let zu = vec![0.0; sys.num_u()];
        let zp = vec![0.0; sys.num_p()];
        let sol = fixed_stress_solve(sys, &loads, &cfg, &zu, &zp).unwrap();
        assert!(sol.converged());
        let (u, p) = monolithic_solve(sys, &loads, 1e-13).unwrap();
        let ep: Vec<f64> = sol.p.iter().zip(&p).map(|(a, b)| a - b).collect();
        let eu: Vec<f64> = sol.u.iter().zip(&u).map(|(a, b)| a - b).collect();
        let pn = sys.mp.energy_norm(&p).unwrap();
        let un = sys.a.energy_norm(&u).unwrap();
        assert!(sys.mp.energy_norm(&ep).unwrap() <= 10.0 * cfg.eps_r * pn);
        assert!(sys.a.energy_norm(&eu).unwrap() <= 10.0 * cfg.eps_r * un);

        // exact start: converged after the first iteration
        let warm = fixed_stress_solve(sys, &loads, &cfg, &u, &p).unwrap();
        assert_eq!(warm.trace.iterations, 1);
    }

    #[test]
    fn richardson_fixed_point_and_zero_step() {
        let pr = problem(4);
        let sys = &pr.system;
        let loads = random_loads(sys, 2);
        let (_, p) = monolithic_solve(sys, &loads, 1e-14).unwrap();
        let gt = reduced_flow_rhs(sys, &loads).unwrap();
        let next = richardson_step(sys, &gt, &p, 1e10).unwrap();
        assert!(relative_difference(&next, &p) < 1e-10);
        let q = seeded_vector::<f64>(sys.num_p(), 1);
        assert_eq!(richardson_step(sys, &gt, &q, 0.0).unwrap(), q);
    }

    #[test]
    fn one_step_grid_emits_one_count() {
        let pr = problem(4);
        let cfg = SolverConfig::new(l_drained(&pr.params));
        let grid = TimeGrid::new(0.0, 0.1, 0.1).unwrap();
        let rep = time_march(&pr, &cfg, &grid).unwrap();
        assert_eq!(rep.iterations.len(), 1);
        assert!(rep.average.is_finite());
    }

    #[test]
    fn zero_sources_converge_in_one_iteration() {
        let pr = BiotProblem::<f64>::new(4, MaterialParams::reference(), ManufacturedSources::zero())
            .unwrap();
        let cfg = SolverConfig::new(l_drained(&pr.params));
        let grid = TimeGrid::new(0.0, 0.1, 1.0).unwrap();
        let rep = time_march(&pr, &cfg, &grid).unwrap();
        assert_eq!(rep.iterations, vec![1; 10]);
        assert_eq!(rep.average, 1.0);
    }

    #[test]
    fn iteration_cap_marks_divergence() {
        let pr = problem(4);
        let mut cfg = SolverConfig::new(l_drained(&pr.params));
        cfg.max_iter = 1;
        let grid = TimeGrid::new(0.0, 0.1, 1.0).unwrap();
        let rep = time_march(&pr, &cfg, &grid).unwrap();
        assert!(rep.diverged());
        assert_eq!(rep.average, f64::INFINITY);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.0).validate(0.0).is_err());
        assert!(SolverConfig::new(0.0).validate(1e-3).is_ok());
        let mut c = SolverConfig::new(1.0);
        c.eps_r = 0.0;
        assert!(c.validate(0.0).is_err());
    }
}
