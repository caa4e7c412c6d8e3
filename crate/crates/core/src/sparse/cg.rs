use crate::error::{check_len, Error, Result};
use crate::scalar::{axpy, dot, norm2, Scalar};
use crate::sparse::csr::LinearOperator;

/// Outcome of a converged conjugate gradient solve.
#[derive(Clone, Debug)]
pub struct CgSolution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// `‖A x − b‖ / ‖b‖` at exit (recurrence value).
    pub relative_residual: T,
}

/// Unpreconditioned conjugate gradients for an SPD operator, stopping on the
/// Euclidean relative residual `‖A x − b‖ / ‖b‖ ≤ tol`.
///
/// Exceeding `max_iter` returns [`Error::NotConverged`] carrying the final residual.
pub fn cg_solve<T: Scalar, A: LinearOperator<T> + ?Sized>(
    a: &A,
    b: &[T],
    tol: T,
    max_iter: usize,
) -> Result<CgSolution<T>> {
    let n = a.dim();
    check_len("cg rhs", n, b.len())?;
    let bnorm = norm2(b);
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return Ok(CgSolution {
            x,
            iterations: 0,
            relative_residual: T::zero(),
        });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![T::zero(); n];
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        a.apply(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::NotPositiveDefinite {
                row: it,
                pivot: pap.to_f64_lossy(),
            });
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / bnorm;
        if rel <= tol {
            return Ok(CgSolution {
                x,
                iterations: it,
                relative_residual: rel,
            });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Err(Error::NotConverged {
        method: "conjugate gradient",
        iterations: max_iter,
        residual: (rr.sqrt() / bnorm).to_f64_lossy(),
    })
}
