//! Up-looking sparse Cholesky factorization `P A Pᵀ = L Lᵀ`.
//!
//! Symbolic phase: elimination tree and column counts from row subtrees.
//! Numeric phase: row `k` of `L` is a sparse triangular solve whose pattern is the
//! reach of row `k` of `A` in the elimination tree.

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;
use crate::sparse::csr::{LinearOperator, SparseMatrix};
use crate::sparse::ordering::{nested_dissection, Graph, Ordering};

const NONE: usize = usize::MAX;

/// Sparse SPD factorization, reusable for any number of solves.
///
/// Immutable after construction, so it can be shared between threads.
#[derive(Clone, Debug)]
pub struct Factorization<T> {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// column-compressed `L`, diagonal entry first in each column
    col_offsets: Vec<usize>,
    row_indices: Vec<usize>,
    values: Vec<T>,
}

/// Factorizes an SPD matrix with the default nested dissection ordering.
pub fn factorize<T: Scalar>(a: &SparseMatrix<T>) -> Result<Factorization<T>> {
    Factorization::new(a, Ordering::default())
}

impl<T: Scalar> Factorization<T> {
    pub fn new(a: &SparseMatrix<T>, ordering: Ordering) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument(format!(
                "cannot factorize a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let perm = match ordering {
            Ordering::Natural => (0..n).collect(),
            Ordering::NestedDissection => {
                nested_dissection(&Graph::from_pattern(n, a.row_offsets(), a.col_indices()))
            }
        };
        let c = if ordering == Ordering::Natural {
            a.clone()
        } else {
            a.permute_symmetric(&perm)?
        };

        let parent = etree(&c);
        let counts = column_counts(&c, &parent);
        let mut col_offsets = vec![0usize; n + 1];
        for k in 0..n {
            col_offsets[k + 1] = col_offsets[k] + counts[k];
        }
        let nnz = col_offsets[n];
        let mut row_indices = vec![0usize; nnz];
        let mut values = vec![T::zero(); nnz];

        let mut next = col_offsets.clone();
        let mut x = vec![T::zero(); n];
        let mut stack = vec![0usize; n];
        let mut mark = vec![NONE; n];

        for k in 0..n {
            let top = reach(&c, k, &parent, &mut stack, &mut mark);
            let (cols, vals) = c.row(k);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= k {
                    x[j] = v;
                }
            }
            let mut d = x[k];
            x[k] = T::zero();
            for &i in &stack[top..] {
                let lki = x[i] / values[col_offsets[i]];
                x[i] = T::zero();
                for p in col_offsets[i] + 1..next[i] {
                    x[row_indices[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                row_indices[p] = k;
                values[p] = lki;
                next[i] += 1;
            }
            if !(d > T::zero()) {
                return Err(Error::NotPositiveDefinite {
                    row: perm[k],
                    pivot: d.to_f64_lossy(),
                });
            }
            let p = next[k];
            row_indices[p] = k;
            values[p] = d.sqrt();
            next[k] += 1;
        }

        Ok(Self {
            n,
            perm,
            col_offsets,
            row_indices,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries of `L`.
    pub fn factor_nnz(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let mut x = vec![T::zero(); self.n];
        self.solve_into(b, &mut x)?;
        Ok(x)
    }

    pub fn solve_into(&self, b: &[T], x: &mut [T]) -> Result<()> {
        check_len("factorization rhs", self.n, b.len())?;
        check_len("factorization solution", self.n, x.len())?;
        let mut y: Vec<T> = self.perm.iter().map(|&old| b[old]).collect();
        // L y = b
        for j in 0..self.n {
            let start = self.col_offsets[j];
            let yj = y[j] / self.values[start];
            y[j] = yj;
            for p in start + 1..self.col_offsets[j + 1] {
                y[self.row_indices[p]] -= self.values[p] * yj;
            }
        }
        // Lᵀ x = y
        for j in (0..self.n).rev() {
            let start = self.col_offsets[j];
            let mut s = y[j];
            for p in start + 1..self.col_offsets[j + 1] {
                s -= self.values[p] * y[self.row_indices[p]];
            }
            y[j] = s / self.values[start];
        }
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(())
    }
}

/// Applies `A⁻¹` as an operator.
impl<T: Scalar> LinearOperator<T> for Factorization<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()> {
        self.solve_into(x, y)
    }
}

/// Elimination tree of a symmetric matrix, using the lower triangle of each row.
fn etree<T: Scalar>(c: &SparseMatrix<T>) -> Vec<usize> {
    let n = c.nrows();
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &j in c.row(k).0 {
            let mut i = j;
            while i != NONE && i < k {
                let inext = ancestor[i];
                ancestor[i] = k;
                if inext == NONE {
                    parent[i] = k;
                }
                i = inext;
            }
        }
    }
    parent
}

/// Pattern of row `k` of `L` (excluding the diagonal), written to `stack[top..]` in
/// topological order.
fn reach<T: Scalar>(
    c: &SparseMatrix<T>,
    k: usize,
    parent: &[usize],
    stack: &mut [usize],
    mark: &mut [usize],
) -> usize {
    let n = c.nrows();
    let mut top = n;
    mark[k] = k;
    for &j in c.row(k).0 {
        if j > k {
            continue;
        }
        let mut i = j;
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            top -= 1;
            len -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

fn column_counts<T: Scalar>(c: &SparseMatrix<T>, parent: &[usize]) -> Vec<usize> {
    let n = c.nrows();
    let mut counts = vec![1usize; n];
    let mut stack = vec![0usize; n];
    let mut mark = vec![NONE; n];
    for k in 0..n {
        let top = reach(c, k, parent, &mut stack, &mut mark);
        for &i in &stack[top..] {
            counts[i] += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::dense::DenseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian_2d(k: usize) -> SparseMatrix<f64> {
        let mut t = Vec::new();
        for j in 0..k {
            for i in 0..k {
                let v = j * k + i;
                t.push((v, v, 4.0));
                if i > 0 {
                    t.push((v, v - 1, -1.0));
                }
                if i + 1 < k {
                    t.push((v, v + 1, -1.0));
                }
                if j > 0 {
                    t.push((v, v - k, -1.0));
                }
                if j + 1 < k {
                    t.push((v, v + k, -1.0));
                }
            }
        }
        SparseMatrix::from_triplets(k * k, k * k, t).unwrap()
    }

    #[test]
    fn identity_and_diagonal() {
        let f = factorize(&SparseMatrix::<f64>::identity(5)).unwrap();
        let b = [1.0, -2.0, 3.0, 0.5, 9.0];
        assert_eq!(f.solve(&b).unwrap(), b.to_vec());

        let d = [2.0f64, 4.0, 0.5];
        let f = factorize(&SparseMatrix::from_diagonal(&d)).unwrap();
        let x = f.solve(&[1.0, 1.0, 1.0]).unwrap();
        for i in 0..3 {
            assert!((x[i] - 1.0 / d[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn orderings_agree_on_laplacian() {
        let a = laplacian_2d(23);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..a.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&x).unwrap();
        for ord in [Ordering::Natural, Ordering::NestedDissection] {
            let f = Factorization::new(&a, ord).unwrap();
            let y = f.solve(&b).unwrap();
            let err = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "{ord:?}: {err}");
        }
    }

    #[test]
    fn nested_dissection_reduces_fill() {
        let a = laplacian_2d(40);
        let nat = Factorization::new(&a, Ordering::Natural).unwrap();
        let nd = Factorization::new(&a, Ordering::NestedDissection).unwrap();
        assert!(nd.factor_nnz() < nat.factor_nnz(), "{} vs {}", nd.factor_nnz(), nat.factor_nnz());
    }

    #[test]
    fn matches_dense_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = DenseMatrix::from_fn(15, 15, |_, _| {
            if rng.gen::<f64>() < 0.3 {
                rng.gen_range(-1.0..1.0)
            } else {
                0.0
            }
        });
        let a = b.transpose().matmul(&b).add_identity(1.0);
        let sa = SparseMatrix::from_dense(&a);
        let f: Factorization<f64> = Factorization::new(&sa, Ordering::Natural).unwrap();
        let l = a.cholesky().unwrap();
        for j in 0..15 {
            for p in f.col_offsets[j]..f.col_offsets[j + 1] {
                let i = f.row_indices[p];
                assert!((f.values[p] - l.factor()[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn indefinite_rejected() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)])
            .unwrap();
        assert!(matches!(factorize(&a), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn single_precision() {
        let a = SparseMatrix::<f32>::from_triplets(
            3,
            3,
            [(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 2.0)],
        )
        .unwrap();
        let f = factorize(&a).unwrap();
        let x = f.solve(&a.matvec(&[1.0, 2.0, 3.0]).unwrap()).unwrap();
        for (a, b) in x.iter().zip([1.0f32, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    proptest::proptest! {
        #[test]
        fn solve_inverts_matvec(seed in 0u64..500, k in 2usize..14) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = laplacian_2d(k);
            let x: Vec<f64> = (0..k * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = factorize(&a).unwrap().solve(&a.matvec(&x).unwrap()).unwrap();
            let xn = crate::scalar::norm2(&x);
            let en = crate::scalar::norm2(&crate::scalar::sub(&x, &y));
            proptest::prop_assert!(en <= 1e-10 * xn);
        }
    }
}
