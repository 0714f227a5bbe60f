use crate::error::{Error, Result};
use crate::linalg::band::BandLu;
use crate::linalg::dense::{dot, estimate_inverse_norm_1, norm_2_vec, Condition, DenseMatrix};
use crate::precision::Real;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SparseMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut per_row: Vec<Vec<(usize, T)>> = vec![Vec::new(); rows];
        for &(i, j, v) in triplets {
            if i >= rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    got: i + 1,
                });
            }
            if j >= cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: j + 1,
                });
            }
            per_row[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for mut entries in per_row {
            entries.sort_by_key(|e| e.0);
            for (j, v) in entries {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::identity(diag.len());
        m.values.copy_from_slice(diag);
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => T::zero(),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|i| {
                let (c, v) = self.row(i);
                let mut acc = T::zero();
                for (&j, &a) in c.iter().zip(v) {
                    acc += a * x[j];
                }
                acc
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                trip.push((j, i, a));
            }
        }
        Self::from_triplets(self.cols, self.rows, &trip).expect("indices in range")
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                d[(i, j)] = a;
            }
        }
        d
    }

    pub fn norm_1(&self) -> T {
        let mut sums = vec![T::zero(); self.cols];
        for (&j, &v) in self.col_idx.iter().zip(&self.values) {
            sums[j] += v.abs();
        }
        sums.into_iter().fold(T::zero(), T::max)
    }

    /// Column indices strictly increase within every row.
    pub fn is_sorted(&self) -> bool {
        (0..self.rows).all(|i| self.row(i).0.windows(2).all(|w| w[0] < w[1]))
    }
}

/// Options for [`sparse_solve`].
#[derive(Clone, Copy, Debug)]
pub struct SparseSolveOptions {
    /// Relative residual target `||S x - b||_2 / ||b||_2`.
    pub tol: f64,
    /// Iteration cap; `None` means `10 n`.
    pub max_iter: Option<usize>,
    pub restart: usize,
    /// Fall back to a banded direct solve when GMRES stalls.
    pub direct_fallback: bool,
    /// Give up after this many consecutive restart cycles that fail to halve
    /// the residual.
    pub stall_cycles: usize,
}

/// Below this order the condition number is computed from a dense inverse.
pub const EXACT_CONDITION_MAX: usize = 500;

impl SparseSolveOptions {
    /// Defaults for the given precision: `1e-12` in double, `1e-24` in extended.
    pub fn for_precision<T: Real>() -> Self {
        let tol = if T::unit_roundoff() < 1e-20 {
            1e-24
        } else {
            1e-12
        };
        SparseSolveOptions {
            tol,
            max_iter: None,
            restart: 60,
            direct_fallback: true,
            stall_cycles: 5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SparseSolution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub residual: f64,
    pub used_direct_fallback: bool,
}

pub fn sparse_solve<T: Real>(s: &SparseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    sparse_solve_with(s, b, SparseSolveOptions::for_precision::<T>()).map(|r| r.x)
}

pub fn sparse_solve_with<T: Real>(
    s: &SparseMatrix<T>,
    b: &[T],
    opts: SparseSolveOptions,
) -> Result<SparseSolution<T>> {
    if s.rows != s.cols {
        return Err(Error::DimensionMismatch {
            expected: s.rows,
            got: s.cols,
        });
    }
    if b.len() != s.rows {
        return Err(Error::DimensionMismatch {
            expected: s.rows,
            got: b.len(),
        });
    }
    match gmres(s, b, opts) {
        Ok(sol) => Ok(sol),
        Err(Error::NoConvergence { iterations, .. }) if opts.direct_fallback => {
            let x = BandLu::factor(s)?.solve(b)?;
            let residual = relative_residual(s, &x, b);
            Ok(SparseSolution {
                x,
                iterations,
                residual,
                used_direct_fallback: true,
            })
        }
        Err(e) => Err(e),
    }
}

fn relative_residual<T: Real>(s: &SparseMatrix<T>, x: &[T], b: &[T]) -> f64 {
    let r: Vec<T> = s
        .matvec(x)
        .iter()
        .zip(b)
        .map(|(&ax, &bi)| bi - ax)
        .collect();
    let bn = norm_2_vec(b);
    if bn == T::zero() {
        norm_2_vec(&r).to_f64()
    } else {
        (norm_2_vec(&r) / bn).to_f64()
    }
}

/// Inverse diagonal used for left row scaling; rows with a zero diagonal
/// are scaled by their largest entry instead.
fn row_scaling<T: Real>(s: &SparseMatrix<T>) -> Vec<T> {
    (0..s.rows)
        .map(|i| {
            let d = s.get(i, i);
            let d = if d == T::zero() {
                s.row(i).1.iter().map(|v| v.abs()).fold(T::zero(), T::max)
            } else {
                d
            };
            if d == T::zero() {
                T::one()
            } else {
                T::one() / d
            }
        })
        .collect()
}

/// Restarted GMRES on the row-scaled system `D^-1 S x = D^-1 b`, with the
/// convergence test applied to the unscaled residual.
fn gmres<T: Real>(
    s: &SparseMatrix<T>,
    b: &[T],
    opts: SparseSolveOptions,
) -> Result<SparseSolution<T>> {
    let n = s.rows;
    let bnorm = norm_2_vec(b);
    if bnorm == T::zero() {
        return Ok(SparseSolution {
            x: vec![T::zero(); n],
            iterations: 0,
            residual: 0.0,
            used_direct_fallback: false,
        });
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let m = opts.restart.max(1).min(n.max(1));
    let dinv = row_scaling(s);
    let apply = |v: &[T]| -> Vec<T> {
        s.matvec(v)
            .into_iter()
            .zip(&dinv)
            .map(|(a, &d)| a * d)
            .collect()
    };
    let tol = T::from_f64(opts.tol);

    let mut x = vec![T::zero(); n];
    let mut total = 0usize;
    let mut best = f64::INFINITY;
    let mut stalled = 0usize;
    loop {
        let r_true: Vec<T> = s
            .matvec(&x)
            .iter()
            .zip(b)
            .map(|(&ax, &bi)| bi - ax)
            .collect();
        let true_res = norm_2_vec(&r_true) / bnorm;
        if true_res <= tol {
            return Ok(SparseSolution {
                x,
                iterations: total,
                residual: true_res.to_f64(),
                used_direct_fallback: false,
            });
        }
        if true_res.to_f64() <= 0.5 * best {
            best = true_res.to_f64();
            stalled = 0;
        } else {
            stalled += 1;
        }
        if total >= max_iter || stalled > opts.stall_cycles {
            return Err(Error::NoConvergence {
                iterations: total,
                residual: true_res.to_f64(),
            });
        }
        let r: Vec<T> = r_true.iter().zip(&dinv).map(|(&ri, &d)| ri * d).collect();
        let beta = norm_2_vec(&r);
        // the scaled residual tracks the true one up to the spread of the scaling
        let scaled_target = beta * tol / true_res;
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|&v| v / beta).collect());
        let mut h = vec![vec![T::zero(); m]; m + 1];
        let mut cs = vec![T::zero(); m];
        let mut sn = vec![T::zero(); m];
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut w = apply(&basis[k]);
            // modified Gram-Schmidt, two passes
            for _ in 0..2 {
                for (j, v) in basis.iter().enumerate() {
                    let hij = dot(&w, v);
                    h[j][k] += hij;
                    for (wi, &vi) in w.iter_mut().zip(v) {
                        *wi -= hij * vi;
                    }
                }
            }
            let wn = norm_2_vec(&w);
            h[k + 1][k] = wn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom == T::zero() {
                cs[k] = T::one();
                sn[k] = T::zero();
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = cs[k] * h[k][k] + sn[k] * h[k + 1][k];
            h[k + 1][k] = T::zero();
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            k_used = k + 1;
            total += 1;
            if g[k + 1].abs() <= scaled_target || wn == T::zero() || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|&v| v / wn).collect());
        }
        let mut y = vec![T::zero(); k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (j, &yj) in y.iter().enumerate() {
            for (xi, &vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
    }
}

/// 1-norm condition number of a sparse matrix: exact through a dense
/// inverse for small orders, otherwise estimated with banded LU solves.
pub fn sparse_cond_1<T: Real>(s: &SparseMatrix<T>) -> Result<Condition> {
    let n = s.rows;
    if n < EXACT_CONDITION_MAX {
        return crate::linalg::dense::cond_1(&s.to_dense());
    }
    let f = BandLu::factor(s)?;
    let ft = BandLu::factor(&s.transpose())?;
    let solve = |b: &[T]| f.solve(b).expect("order checked");
    let solve_t = |b: &[T]| ft.solve(b).expect("order checked");
    let est = estimate_inverse_norm_1(n, solve, solve_t);
    Ok(Condition {
        value: (s.norm_1() * est).to_f64(),
        estimated: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let s = SparseMatrix::<f64>::identity(4);
        let b = vec![1.0, -2.0, 3.0, 0.5];
        assert_eq!(sparse_solve(&s, &b).unwrap(), b);
    }

    #[test]
    fn diagonal_system() {
        let s = SparseMatrix::from_diag(&[2.0f64; 5]);
        let x = sparse_solve(&s, &[2.0; 5]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let s = SparseMatrix::from_triplets(
            2,
            3,
            &[(0, 2, 1.0f64), (0, 0, 2.0), (0, 2, 0.5), (1, 1, 4.0)],
        )
        .unwrap();
        assert!(s.is_sorted());
        assert_eq!(s.nnz(), 3);
        assert_eq!(s.get(0, 2), 1.5);
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0f64)]).is_err());
    }

    #[test]
    fn stalled_solve_reports_no_convergence() {
        // a rotation-like system where one GMRES step cannot make progress
        let s = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0f64), (1, 0, 1.0), (0, 0, 1e-8)])
            .unwrap();
        let opts = SparseSolveOptions {
            tol: 1e-14,
            max_iter: Some(1),
            restart: 1,
            direct_fallback: false,
            stall_cycles: 5,
        };
        assert!(matches!(
            sparse_solve_with(&s, &[1.0, 0.0], opts),
            Err(Error::NoConvergence { .. })
        ));
        let opts = SparseSolveOptions {
            direct_fallback: true,
            ..opts
        };
        let sol = sparse_solve_with(&s, &[1.0, 0.0], opts).unwrap();
        assert!(sol.used_direct_fallback);
        assert!(sol.residual < 1e-14);
    }
}
