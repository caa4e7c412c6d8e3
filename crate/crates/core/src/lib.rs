//! Fixed-stress splitting for the quasi-static linear Biot equations in
//! impermeable media, discretized with P2-P1 Taylor-Hood elements on the unit
//! square, together with matrix-free spectral estimates of its optimal
//! stabilization parameter.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which is what the drivers use.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod error;
pub mod mesh;
pub mod params;
pub mod scalar;
pub mod solver;
pub mod sparse;
pub mod spectral;
pub mod system;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SparseMatrixF64 = sparse::SparseMatrix<f64>;
pub type MeshF64 = mesh::Mesh<f64>;
pub type MaterialParamsF64 = params::MaterialParams<f64>;
pub type TimeGridF64 = params::TimeGrid<f64>;
pub type BiotSystemF64 = system::BiotSystem<f64>;
pub type BiotProblemF64 = system::BiotProblem<f64>;
pub type LoadsF64 = system::Loads<f64>;
pub type SolverConfigF64 = solver::SolverConfig<f64>;
pub type IterationTraceF64 = solver::IterationTrace<f64>;
pub type SpectralEstimatesF64 = spectral::SpectralEstimates<f64>;
pub type PowerOptionsF64 = spectral::PowerOptions<f64>;
