//! Small dense matrices, used as oracles and for the generalized symmetric
//! eigenproblem at desk scale.

use std::ops::{Index, IndexMut};

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![T::zero(); nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<T>) -> Result<Self> {
        check_len("dense data", nrows * ncols, data.len())?;
        Ok(Self { nrows, ncols, data })
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds the matrix whose columns are `cols`.
    pub fn from_columns(nrows: usize, cols: &[Vec<T>]) -> Self {
        Self::from_fn(nrows, cols.len(), |i, j| cols[j][i])
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols, "dense matvec dimension");
        (0..self.nrows)
            .map(|i| {
                self.data[i * self.ncols..(i + 1) * self.ncols]
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "dense matmul dimension");
        let mut out = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.ncols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add_identity(mut self, shift: T) -> Self {
        for i in 0..self.nrows.min(self.ncols) {
            self[(i, i)] += shift;
        }
        self
    }

    pub fn scaled(mut self, a: T) -> Self {
        self.data.iter_mut().for_each(|v| *v *= a);
        self
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.nrows, self.ncols, |i, j| self[(i, j)] - other[(i, j)])
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(self.nrows, self.ncols, |i, j| self[(i, j)] + other[(i, j)])
    }

    pub fn trace(&self) -> T {
        (0..self.nrows.min(self.ncols)).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Lower Cholesky factor `L` with `A = L Lᵀ`.
    pub fn cholesky(&self) -> Result<DenseCholesky<T>> {
        if self.nrows != self.ncols {
            return Err(Error::InvalidArgument("cholesky of a non-square matrix".into()));
        }
        let n = self.nrows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return Err(Error::NotPositiveDefinite {
                    row: j,
                    pivot: d.to_f64_lossy(),
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(DenseCholesky { l })
    }

    /// Dense Gaussian elimination with partial pivoting; columns of `rhs` are solved
    /// simultaneously.
    pub fn solve_matrix(&self, rhs: &Self) -> Result<Self> {
        if self.nrows != self.ncols || rhs.nrows != self.nrows {
            return Err(Error::InvalidArgument("dense solve dimensions".into()));
        }
        let n = self.nrows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        for k in 0..n {
            let piv = (k..n)
                .max_by(|&i, &j| a[(i, k)].abs().partial_cmp(&a[(j, k)].abs()).unwrap())
                .unwrap();
            if a[(piv, k)] == T::zero() {
                return Err(Error::Degenerate(format!("singular dense matrix at column {k}")));
            }
            if piv != k {
                for j in 0..n {
                    let t = a[(k, j)];
                    a[(k, j)] = a[(piv, j)];
                    a[(piv, j)] = t;
                }
                for j in 0..b.ncols {
                    let t = b[(k, j)];
                    b[(k, j)] = b[(piv, j)];
                    b[(piv, j)] = t;
                }
            }
            for i in k + 1..n {
                let f = a[(i, k)] / a[(k, k)];
                if f == T::zero() {
                    continue;
                }
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
                for j in 0..b.ncols {
                    let v = b[(k, j)];
                    b[(i, j)] -= f * v;
                }
            }
        }
        for j in 0..b.ncols {
            for i in (0..n).rev() {
                let mut s = b[(i, j)];
                for k in i + 1..n {
                    s -= a[(i, k)] * b[(k, j)];
                }
                b[(i, j)] = s / a[(i, i)];
            }
        }
        Ok(b)
    }

    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        let b = Self::from_columns(rhs.len(), &[rhs.to_vec()]);
        Ok(self.solve_matrix(&b)?.column(0))
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.ncols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.ncols + j]
    }
}

#[derive(Clone, Debug)]
pub struct DenseCholesky<T> {
    l: DenseMatrix<T>,
}

impl<T: Scalar> DenseCholesky<T> {
    pub fn factor(&self) -> &DenseMatrix<T> {
        &self.l
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let n = self.l.nrows();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[T]) -> Vec<T> {
        let n = self.l.nrows();
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.backward(&self.forward(b))
    }
}

/// Eigen-decomposition of a symmetric-definite pencil `S v = λ M v`.
#[derive(Clone, Debug)]
pub struct GeneralizedEigen<T> {
    /// Ascending.
    pub eigenvalues: Vec<T>,
    /// Columns are `M`-orthonormal eigenvectors matching `eigenvalues`.
    pub eigenvectors: DenseMatrix<T>,
}

/// Solves the generalized symmetric eigenproblem `S v = λ M v` with `M` SPD.
///
/// The pencil is reduced with the Cholesky factor of `M` (`C = L⁻¹ S L⁻ᵀ`) and `C`
/// is diagonalized with cyclic Jacobi rotations.
pub fn dense_generalized_symmetric_eigen<T: Scalar>(
    s: &DenseMatrix<T>,
    m: &DenseMatrix<T>,
) -> Result<GeneralizedEigen<T>> {
    let n = s.nrows();
    if s.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidArgument("pencil matrices must be square and equal size".into()));
    }
    let chol = m.cholesky().map_err(|e| e.context("mass matrix of the pencil"))?;

    // C = L⁻¹ S L⁻ᵀ, built column by column then symmetrized.
    let mut w = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = chol.forward(&s.column(j));
        for i in 0..n {
            w[(i, j)] = col[i];
        }
    }
    let wt = w.transpose();
    let mut c = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = chol.forward(&wt.column(j));
        for i in 0..n {
            c[(i, j)] = col[i];
        }
    }
    let c = DenseMatrix::from_fn(n, n, |i, j| (c[(i, j)] + c[(j, i)]) * T::lit(0.5));

    let (vals, vecs) = jacobi_eigen(c)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
    let eigenvalues = order.iter().map(|&k| vals[k]).collect();
    let cols: Vec<Vec<T>> = order
        .iter()
        .map(|&k| chol.backward(&vecs.column(k)))
        .collect();
    Ok(GeneralizedEigen {
        eigenvalues,
        eigenvectors: DenseMatrix::from_columns(n, &cols),
    })
}

/// Cyclic Jacobi for a symmetric matrix; returns unsorted eigenvalues and the
/// orthogonal matrix of eigenvectors (as columns).
fn jacobi_eigen<T: Scalar>(mut a: DenseMatrix<T>) -> Result<(Vec<T>, DenseMatrix<T>)> {
    let n = a.nrows();
    let mut v = DenseMatrix::identity(n);
    let max_sweeps = 100;
    for _ in 0..max_sweeps {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let diag: T = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
        let total = diag + off;
        let floor = T::epsilon() * T::from_usize_lossy(n.max(1));
        if off <= floor * floor * total || off == T::zero() {
            return Ok(((0..n).map(|i| a[(i, i)]).collect(), v));
        }
        // rotations below this size cannot move any eigenvalue by more than round-off
        let negligible = T::epsilon() * T::lit(1e-2) * total.sqrt();
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= negligible {
                    a[(p, q)] = T::zero();
                    a[(q, p)] = T::zero();
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::NotConverged {
        method: "jacobi eigensolver",
        iterations: max_sweeps,
        residual: f64::NAN,
    })
}
