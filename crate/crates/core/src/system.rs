//! The reduced block system
//!
//! ```text
//! [ A  -Bᵀ      ] [u]   [f]
//! [ B  (1/M) Mp ] [p] = [g]
//! ```
//!
//! on free displacement dofs and interior pressure dofs, plus the problem setup
//! (mesh, sources, right-hand sides) that produces it.

use std::path::Path;

use crate::assembly::{
    assemble_coupling, assemble_divdiv, assemble_elasticity, assemble_momentum_load,
    assemble_pressure_load, assemble_pressure_mass, ManufacturedSources,
};
use crate::error::{check_len, Error, Result};
use crate::mesh::{BoundaryTag, DofMap, Mesh};
use crate::params::MaterialParams;
use crate::scalar::Scalar;
use crate::sparse::matrix_market::{save_matrix_market, Storage};
use crate::sparse::{factorize, Factorization, SparseMatrix};

/// Operators over all dofs, before boundary conditions.
#[derive(Clone, Debug)]
pub struct FullOperators<T> {
    pub elasticity: SparseMatrix<T>,
    pub coupling: SparseMatrix<T>,
    pub pressure_mass: SparseMatrix<T>,
    pub divdiv: SparseMatrix<T>,
}

impl<T: Scalar> FullOperators<T> {
    pub fn assemble(mesh: &Mesh<T>, dofs: &DofMap, params: &MaterialParams<T>) -> Result<Self> {
        Ok(Self {
            elasticity: assemble_elasticity(mesh, dofs, params)?,
            coupling: assemble_coupling(mesh, dofs, params.alpha)?,
            pressure_mass: assemble_pressure_mass(mesh, dofs)?,
            divdiv: assemble_divdiv(mesh, dofs)?,
        })
    }
}

/// Right-hand side of one linear solve: momentum load `f` on free displacement
/// dofs and flow load `g` on interior pressure dofs.
#[derive(Clone, Debug, PartialEq)]
pub struct Loads<T> {
    pub f: Vec<T>,
    pub g: Vec<T>,
}

impl<T: Scalar> Loads<T> {
    pub fn zeros(system: &BiotSystem<T>) -> Self {
        Self {
            f: vec![T::zero(); system.num_u()],
            g: vec![T::zero(); system.num_p()],
        }
    }
}

/// Reduced operators with cached SPD factorizations of `A` and `Mp`.
///
/// Immutable after construction; the factorizations support concurrent solves.
#[derive(Clone, Debug)]
pub struct BiotSystem<T> {
    pub params: MaterialParams<T>,
    /// Elasticity on free displacement dofs (SPD).
    pub a: SparseMatrix<T>,
    /// Coupling, interior pressure × free displacement.
    pub b: SparseMatrix<T>,
    /// Pressure mass matrix on interior pressure dofs (SPD).
    pub mp: SparseMatrix<T>,
    /// `∫ div u div v` on free displacement dofs (SPSD).
    pub ddiv: SparseMatrix<T>,
    a_factor: Factorization<T>,
    m_factor: Factorization<T>,
    free_u: Vec<usize>,
    interior_p: Vec<usize>,
    full_u: usize,
    full_p: usize,
}

impl<T: Scalar> BiotSystem<T> {
    /// Builds a system directly from reduced matrices (all dofs free).
    pub fn from_reduced(
        params: MaterialParams<T>,
        a: SparseMatrix<T>,
        b: SparseMatrix<T>,
        mp: SparseMatrix<T>,
        ddiv: SparseMatrix<T>,
    ) -> Result<Self> {
        let (nu, np) = (a.nrows(), mp.nrows());
        Self::with_maps(params, a, b, mp, ddiv, (0..nu).collect(), (0..np).collect(), nu, np)
    }

    #[allow(clippy::too_many_arguments)]
    fn with_maps(
        params: MaterialParams<T>,
        a: SparseMatrix<T>,
        b: SparseMatrix<T>,
        mp: SparseMatrix<T>,
        ddiv: SparseMatrix<T>,
        free_u: Vec<usize>,
        interior_p: Vec<usize>,
        full_u: usize,
        full_p: usize,
    ) -> Result<Self> {
        params.validate()?;
        let nu = free_u.len();
        let np = interior_p.len();
        check_len("elasticity rows", nu, a.nrows())?;
        check_len("elasticity cols", nu, a.ncols())?;
        check_len("coupling rows", np, b.nrows())?;
        check_len("coupling cols", nu, b.ncols())?;
        check_len("mass rows", np, mp.nrows())?;
        check_len("mass cols", np, mp.ncols())?;
        check_len("div-div rows", nu, ddiv.nrows())?;
        check_len("div-div cols", nu, ddiv.ncols())?;
        let a_factor = factorize(&a).map_err(|e| e.context("elasticity matrix"))?;
        let m_factor = factorize(&mp).map_err(|e| e.context("pressure mass matrix"))?;
        Ok(Self {
            params,
            a,
            b,
            mp,
            ddiv,
            a_factor,
            m_factor,
            free_u,
            interior_p,
            full_u,
            full_p,
        })
    }

    pub fn num_u(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_p(&self) -> usize {
        self.mp.nrows()
    }

    /// `A⁻¹ x` with the cached factorization.
    pub fn solve_a(&self, x: &[T]) -> Result<Vec<T>> {
        self.a_factor.solve(x)
    }

    /// `Mp⁻¹ x` with the cached factorization.
    pub fn solve_m(&self, x: &[T]) -> Result<Vec<T>> {
        self.m_factor.solve(x)
    }

    pub fn a_factorization(&self) -> &Factorization<T> {
        &self.a_factor
    }

    pub fn m_factorization(&self) -> &Factorization<T> {
        &self.m_factor
    }

    /// Displacement solving the mechanics equation for a given pressure,
    /// `u(p) = A⁻¹ (f + Bᵀ p)`.
    pub fn displacement_for(&self, f: &[T], p: &[T]) -> Result<Vec<T>> {
        check_len("momentum load", self.num_u(), f.len())?;
        let btp = self.b.transpose_matvec(p)?;
        let rhs: Vec<T> = f.iter().zip(&btp).map(|(&a, &b)| a + b).collect();
        self.solve_a(&rhs)
    }

    pub fn free_displacement_dofs(&self) -> &[usize] {
        &self.free_u
    }

    pub fn interior_pressure_dofs(&self) -> &[usize] {
        &self.interior_p
    }

    pub fn restrict_displacement(&self, full: &[T]) -> Result<Vec<T>> {
        check_len("full displacement vector", self.full_u, full.len())?;
        Ok(self.free_u.iter().map(|&d| full[d]).collect())
    }

    pub fn restrict_pressure(&self, full: &[T]) -> Result<Vec<T>> {
        check_len("full pressure vector", self.full_p, full.len())?;
        Ok(self.interior_p.iter().map(|&d| full[d]).collect())
    }

    /// Extends a reduced displacement by the homogeneous Dirichlet values.
    pub fn expand_displacement(&self, reduced: &[T]) -> Result<Vec<T>> {
        check_len("reduced displacement vector", self.num_u(), reduced.len())?;
        let mut full = vec![T::zero(); self.full_u];
        for (&d, &v) in self.free_u.iter().zip(reduced) {
            full[d] = v;
        }
        Ok(full)
    }

    pub fn expand_pressure(&self, reduced: &[T]) -> Result<Vec<T>> {
        check_len("reduced pressure vector", self.num_p(), reduced.len())?;
        let mut full = vec![T::zero(); self.full_p];
        for (&d, &v) in self.interior_p.iter().zip(reduced) {
            full[d] = v;
        }
        Ok(full)
    }

    /// Writes `A`, `B`, `Mp` and `Ddiv` as Matrix Market files into `dir`.
    pub fn dump_matrices(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::MatrixMarket(format!("{}: {e}", dir.display())))?;
        save_matrix_market(&self.a, Storage::Symmetric, dir.join("A.mtx"))?;
        save_matrix_market(&self.b, Storage::General, dir.join("B.mtx"))?;
        save_matrix_market(&self.mp, Storage::Symmetric, dir.join("Mp.mtx"))?;
        save_matrix_market(&self.ddiv, Storage::Symmetric, dir.join("Ddiv.mtx"))?;
        Ok(())
    }
}

/// Removes the rows and columns of constrained dofs (homogeneous Dirichlet data).
pub fn apply_boundary_conditions<T: Scalar>(
    full: &FullOperators<T>,
    dofs: &DofMap,
    params: &MaterialParams<T>,
) -> Result<BiotSystem<T>> {
    let ut = dofs.displacement_tags();
    let pt = dofs.pressure_tags();
    check_len("displacement tags", full.elasticity.nrows(), ut.len())?;
    check_len("pressure tags", full.pressure_mass.nrows(), pt.len())?;
    if ut.contains(&BoundaryTag::DirichletFlow) {
        return Err(Error::InvalidArgument(
            "displacement dof tagged with a flow boundary condition".into(),
        ));
    }
    if pt
        .iter()
        .any(|t| matches!(t, BoundaryTag::DirichletMomentum | BoundaryTag::NeumannTop))
    {
        return Err(Error::InvalidArgument(
            "pressure dof tagged with a momentum boundary condition".into(),
        ));
    }
    let free_u = dofs.free_displacement_dofs();
    let interior_p = dofs.interior_pressure_dofs();
    if free_u.is_empty() || interior_p.is_empty() {
        return Err(Error::Degenerate(
            "no free displacement or interior pressure dofs".into(),
        ));
    }
    BiotSystem::with_maps(
        *params,
        full.elasticity.submatrix(&free_u, &free_u)?,
        full.coupling.submatrix(&interior_p, &free_u)?,
        full.pressure_mass.submatrix(&interior_p, &interior_p)?,
        full.divdiv.submatrix(&free_u, &free_u)?,
        free_u,
        interior_p,
        ut.len(),
        pt.len(),
    )
}

/// A fully set up test problem on the unit square.
#[derive(Clone, Debug)]
pub struct BiotProblem<T> {
    pub mesh: Mesh<T>,
    pub dofs: DofMap,
    pub params: MaterialParams<T>,
    pub sources: ManufacturedSources<T>,
    pub full: FullOperators<T>,
    pub system: BiotSystem<T>,
}

impl<T: Scalar> BiotProblem<T> {
    pub fn new(n: usize, params: MaterialParams<T>, sources: ManufacturedSources<T>) -> Result<Self> {
        params.validate()?;
        let mesh = Mesh::structured(n)?;
        let dofs = DofMap::taylor_hood(&mesh);
        let full = FullOperators::assemble(&mesh, &dofs, &params)?;
        let system = apply_boundary_conditions(&full, &dofs, &params)?;
        Ok(Self {
            mesh,
            dofs,
            params,
            sources,
            full,
            system,
        })
    }

    /// Reduced momentum load `∫ f(·, t) · φ`.
    pub fn momentum_load(&self, t: T) -> Result<Vec<T>> {
        let s = self.sources;
        let full = assemble_momentum_load(&self.mesh, &self.dofs, |x, y| s.momentum(x, y, t))?;
        self.system.restrict_displacement(&full)
    }

    /// Reduced flow source load `∫ S_f(·, t) ψ`.
    pub fn flow_source_load(&self, t: T) -> Result<Vec<T>> {
        let s = self.sources;
        let full = assemble_pressure_load(&self.mesh, &self.dofs, |x, y| s.flow(x, y, t))?;
        self.system.restrict_pressure(&full)
    }

    /// Implicit Euler loads of the step ending at `t` given the previous state.
    pub fn step_loads(&self, u_prev: &[T], p_prev: &[T], t: T, tau: T) -> Result<Loads<T>> {
        Ok(Loads {
            f: self.momentum_load(t)?,
            g: assemble_flow_rhs(self, u_prev, p_prev, t, tau)?,
        })
    }
}

/// Flow load of one implicit Euler step on interior pressure dofs:
/// `g = (1/M) Mp p_prev + B u_prev + τ ∫ S_f(·, t) ψ`.
pub fn assemble_flow_rhs<T: Scalar>(
    problem: &BiotProblem<T>,
    u_prev: &[T],
    p_prev: &[T],
    t: T,
    tau: T,
) -> Result<Vec<T>> {
    let sys = &problem.system;
    check_len("previous displacement", sys.num_u(), u_prev.len())?;
    check_len("previous pressure", sys.num_p(), p_prev.len())?;
    let mut g = sys.b.matvec(u_prev)?;
    if sys.params.inv_m != T::zero() {
        let mp = sys.mp.matvec(p_prev)?;
        for (gi, mi) in g.iter_mut().zip(mp) {
            *gi += sys.params.inv_m * mi;
        }
    }
    let src = problem.flow_source_load(t)?;
    for (gi, si) in g.iter_mut().zip(src) {
        *gi += tau * si;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::interpolate_displacement;
    use crate::sparse::DenseMatrix;

    #[test]
    fn n2_has_one_interior_pressure() {
        let p = BiotProblem::<f64>::new(2, MaterialParams::reference(), ManufacturedSources::default())
            .unwrap();
        assert_eq!(p.system.num_p(), 1);
        assert_eq!(p.system.interior_pressure_dofs(), &[4]);
    }

    #[test]
    fn reduced_operators_are_spd() {
        let p = BiotProblem::<f64>::new(4, MaterialParams::reference(), ManufacturedSources::default())
            .unwrap();
        p.system.a.to_dense().cholesky().unwrap();
        p.system.mp.to_dense().cholesky().unwrap();
        assert!(p.system.a.symmetry_defect() <= 1e-14);
    }

    #[test]
    fn reduced_solve_matches_full_solve_with_homogeneous_data() {
        // Solve the elasticity problem on all dofs with constrained rows replaced by
        // identity rows and zero data, then compare with the reduced solve.
        let p = BiotProblem::<f64>::new(3, MaterialParams::reference(), ManufacturedSources::default())
            .unwrap();
        let full = &p.full.elasticity;
        let n = full.nrows();
        let free = p.system.free_displacement_dofs();
        let mut is_free = vec![false; n];
        free.iter().for_each(|&d| is_free[d] = true);
        let mut dense = DenseMatrix::zeros(n, n);
        for (r, c, v) in full.triplets() {
            if is_free[r] && is_free[c] {
                dense[(r, c)] = v;
            }
        }
        for d in 0..n {
            if !is_free[d] {
                dense[(d, d)] = 1.0;
            }
        }
        let load = p.momentum_load(1.0).unwrap();
        let rhs = p.system.expand_displacement(&load).unwrap();
        let u_full = dense.solve(&rhs).unwrap();
        let u_red = p.system.solve_a(&load).unwrap();
        let scale = u_red.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (k, &d) in free.iter().enumerate() {
            assert!((u_full[d] - u_red[k]).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn flow_rhs_cases() {
        let p = BiotProblem::<f64>::new(4, MaterialParams::reference(), ManufacturedSources::zero())
            .unwrap();
        let sys = &p.system;
        let zero_u = vec![0.0; sys.num_u()];
        let zero_p = vec![0.0; sys.num_p()];
        assert!(assemble_flow_rhs(&p, &zero_u, &zero_p, 1.0, 0.1)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));

        // constant divergence c through u = (c x, 0): α-term is c · (mass row sums)
        let c = 3.0;
        let u_full = interpolate_displacement(&p.dofs, |x, _| [c * x, 0.0]);
        let bu = p.full.coupling.matvec(&u_full).unwrap();
        let ones = vec![1.0; p.dofs.num_pressure_dofs()];
        let rows = p.full.pressure_mass.matvec(&ones).unwrap();
        for q in 0..bu.len() {
            assert!((bu[q] - c * rows[q]).abs() < 1e-12);
        }

        let wrong = vec![0.0; sys.num_u() + 1];
        assert!(assemble_flow_rhs(&p, &wrong, &zero_p, 1.0, 0.1).is_err());
    }

    #[test]
    fn inconsistent_tags_rejected() {
        let p = BiotProblem::<f64>::new(2, MaterialParams::reference(), ManufacturedSources::default())
            .unwrap();
        let other = DofMap::taylor_hood(&Mesh::<f64>::structured(3).unwrap());
        assert!(apply_boundary_conditions(&p.full, &other, &p.params).is_err());
    }
}
