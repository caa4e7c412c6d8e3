//! Sparse and dense linear algebra used by the discretization and the solvers.

pub mod cg;
pub mod cholesky;
pub mod csr;
pub mod dense;
pub mod matrix_market;
pub mod ordering;

pub use cg::{cg_solve, CgSolution};
pub use cholesky::{factorize, Factorization};
pub use csr::{m_norm, LinearOperator, SparseMatrix};
pub use dense::{dense_generalized_symmetric_eigen, DenseCholesky, DenseMatrix, GeneralizedEigen};
pub use matrix_market::{load_matrix_market, save_matrix_market, Storage};
pub use ordering::Ordering;
