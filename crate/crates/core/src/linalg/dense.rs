use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::precision::Real;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    /// Builds a matrix from row vectors; all rows must have equal length.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            if r.len() != ncols {
                return Err(Error::DimensionMismatch {
                    expected: ncols,
                    got: r.len(),
                });
            }
            data.extend(r);
        }
        Ok(DenseMatrix {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    pub fn from_f64_rows(rows: &[&[f64]]) -> Self {
        let v = rows
            .iter()
            .map(|r| r.iter().map(|&x| T::from_f64(x)).collect())
            .collect();
        Self::from_rows(v).expect("ragged rows")
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `self * other`. Zero entries of `self` are skipped, which makes products
    /// with block matrices carrying zero rows cheap.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                axpy(out_row, a, other.row(k));
            }
        }
        Ok(out)
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_scaled(&mut self, s: T, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.data.len(),
                got: other.data.len(),
            });
        }
        axpy(&mut self.data, s, &other.data);
        Ok(())
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> T {
        let mut sums = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            for (s, &v) in sums.iter_mut().zip(self.row(i)) {
                *s += v.abs();
            }
        }
        sums.into_iter().fold(T::zero(), T::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn convert<U: Real>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::from_dd(v.to_dd())).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `y += a * x`
#[inline]
pub fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm_1_vec<T: Real>(x: &[T]) -> T {
    x.iter().map(|v| v.abs()).sum()
}

pub fn norm_2_vec<T: Real>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

pub fn norm_inf_vec<T: Real>(x: &[T]) -> T {
    x.iter().map(|v| v.abs()).fold(T::zero(), T::max)
}

/// Partial-pivoted LU factors, `P A = L U` with unit lower `L`.
#[derive(Clone, Debug)]
pub struct LuFactors<T> {
    /// `perm[i]` is the row of `A` moved to position `i`.
    pub perm: Vec<usize>,
    /// `L` strictly below the diagonal, `U` on and above.
    pub lu: DenseMatrix<T>,
}

impl<T: Real> LuFactors<T> {
    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn lower(&self) -> DenseMatrix<T> {
        let n = self.dim();
        DenseMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.lu[(i, j)],
            std::cmp::Ordering::Equal => T::one(),
            std::cmp::Ordering::Less => T::zero(),
        })
    }

    pub fn upper(&self) -> DenseMatrix<T> {
        let n = self.dim();
        DenseMatrix::from_fn(
            n,
            n,
            |i, j| if j >= i { self.lu[(i, j)] } else { T::zero() },
        )
    }

    /// Rows of `a` in pivot order.
    pub fn permute_rows(&self, a: &DenseMatrix<T>) -> DenseMatrix<T> {
        DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(self.perm[i], j)])
    }
}

pub fn lu_factor<T: Real>(a: &DenseMatrix<T>) -> Result<LuFactors<T>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: a.cols(),
        });
    }
    let n = a.rows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].abs();
        for i in k + 1..n {
            let v = lu[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == T::zero() {
            return Err(Error::SingularMatrix { column: k });
        }
        if p != k {
            perm.swap(p, k);
            for j in 0..n {
                lu.data.swap(p * n + j, k * n + j);
            }
        }
        let (head, tail) = lu.data.split_at_mut((k + 1) * n);
        let pivot_row = &head[k * n..(k + 1) * n];
        let pivot = pivot_row[k];
        for row in tail.chunks_exact_mut(n) {
            let l = row[k] / pivot;
            row[k] = l;
            if l != T::zero() {
                let neg = -l;
                axpy(&mut row[k + 1..], neg, &pivot_row[k + 1..]);
            }
        }
    }
    Ok(LuFactors { perm, lu })
}

pub fn lu_solve<T: Real>(f: &LuFactors<T>, b: &[T]) -> Result<Vec<T>> {
    let n = f.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let mut x: Vec<T> = f.perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        let row = f.lu.row(i);
        let s = dot(&row[..i], &x[..i]);
        x[i] -= s;
    }
    for i in (0..n).rev() {
        let row = f.lu.row(i);
        let s = dot(&row[i + 1..], &x[i + 1..]);
        x[i] = (x[i] - s) / row[i];
    }
    Ok(x)
}

/// Solves `A^T x = b` with the factors of `A`.
pub fn lu_solve_transpose<T: Real>(f: &LuFactors<T>, b: &[T]) -> Result<Vec<T>> {
    let n = f.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    // U^T z = b
    let mut z = b.to_vec();
    for i in 0..n {
        let zi = z[i] / f.lu[(i, i)];
        z[i] = zi;
        if zi != T::zero() {
            axpy(&mut z[i + 1..], -zi, &f.lu.row(i)[i + 1..]);
        }
    }
    // L^T w = z
    for i in (0..n).rev() {
        let wi = z[i];
        if wi != T::zero() {
            axpy(&mut z[..i], -wi, &f.lu.row(i)[..i]);
        }
    }
    let mut x = vec![T::zero(); n];
    for (i, &p) in f.perm.iter().enumerate() {
        x[p] = z[i];
    }
    Ok(x)
}

/// Solves `A X = B` for a block of right-hand sides.
pub fn lu_solve_matrix<T: Real>(f: &LuFactors<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let n = f.dim();
    if b.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.rows(),
        });
    }
    let m = b.cols();
    let mut x = f.permute_rows(b);
    for i in 0..n {
        let (head, tail) = x.data.split_at_mut(i * m);
        let xi = &mut tail[..m];
        for (k, &l) in f.lu.row(i)[..i].iter().enumerate() {
            if l != T::zero() {
                axpy(xi, -l, &head[k * m..(k + 1) * m]);
            }
        }
    }
    for i in (0..n).rev() {
        let (head, tail) = x.data.split_at_mut((i + 1) * m);
        let xi = &mut head[i * m..];
        let row = f.lu.row(i);
        for (off, &u) in row[i + 1..].iter().enumerate() {
            if u != T::zero() {
                axpy(xi, -u, &tail[off * m..(off + 1) * m]);
            }
        }
        let inv = T::one() / row[i];
        for v in xi.iter_mut() {
            *v *= inv;
        }
    }
    Ok(x)
}

pub fn inverse<T: Real>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let f = lu_factor(a)?;
    lu_solve_matrix(&f, &DenseMatrix::identity(a.rows()))
}

/// Convenience dense solve.
pub fn solve<T: Real>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    lu_solve(&lu_factor(a)?, b)
}

/// Matrices up to this order get an exact 1-norm condition number through
/// their explicit inverse; larger ones use the estimator.
pub const EXPLICIT_INVERSE_MAX: usize = 300;

/// A 1-norm condition number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Condition {
    pub value: f64,
    /// `true` when `||A^-1||_1` came from the iterative estimator.
    pub estimated: bool,
}

impl Condition {
    pub const SINGULAR: Condition = Condition {
        value: f64::INFINITY,
        estimated: false,
    };

    /// Whether the condition number stays below `1/u` of the precision.
    pub fn within(&self, unit_roundoff: f64) -> bool {
        self.value.is_finite() && self.value * unit_roundoff < 1.0
    }
}

/// `||A||_1 ||A^-1||_1`; a zero pivot yields the infinite sentinel.
pub fn cond_1<T: Real>(a: &DenseMatrix<T>) -> Result<Condition> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: a.cols(),
        });
    }
    let f = match lu_factor(a) {
        Ok(f) => f,
        Err(Error::SingularMatrix { .. }) => return Ok(Condition::SINGULAR),
        Err(e) => return Err(e),
    };
    Ok(cond_1_from_lu(a, &f))
}

/// Condition number reusing an existing factorization of `a`.
pub fn cond_1_from_lu<T: Real>(a: &DenseMatrix<T>, f: &LuFactors<T>) -> Condition {
    let n = a.rows();
    let anorm = a.norm_1();
    if n <= EXPLICIT_INVERSE_MAX {
        let inv = lu_solve_matrix(f, &DenseMatrix::identity(n)).expect("square factors");
        Condition {
            value: (anorm * inv.norm_1()).to_f64(),
            estimated: false,
        }
    } else {
        let est = estimate_inverse_norm_1(
            n,
            |b| lu_solve(f, b).expect("square factors"),
            |b| lu_solve_transpose(f, b).expect("square factors"),
        );
        Condition {
            value: (anorm * est).to_f64(),
            estimated: true,
        }
    }
}

/// Hager/Higham lower bound for `||A^-1||_1` given solves with `A` and `A^T`.
///
/// Runs at least three sweeps (at most five) and finishes with Higham's
/// alternating-sign test vector.
pub fn estimate_inverse_norm_1<T: Real>(
    n: usize,
    solve: impl Fn(&[T]) -> Vec<T>,
    solve_transpose: impl Fn(&[T]) -> Vec<T>,
) -> T {
    if n == 0 {
        return T::zero();
    }
    let mut x = vec![T::one() / T::from_f64(n as f64); n];
    let mut est = T::zero();
    let mut last_j = usize::MAX;
    for iter in 0..5 {
        let y = solve(&x);
        est = est.max(norm_1_vec(&y));
        let xi: Vec<T> = y.iter().map(|v| v.signum()).collect();
        let z = solve_transpose(&xi);
        let (j, zmax) = z
            .iter()
            .enumerate()
            .fold((0, T::zero()), |(bj, bv), (i, v)| {
                if v.abs() > bv {
                    (i, v.abs())
                } else {
                    (bj, bv)
                }
            });
        let ztx = dot(&z, &x);
        if iter >= 2 && (zmax <= ztx || j == last_j) {
            break;
        }
        last_j = j;
        x = vec![T::zero(); n];
        x[j] = T::one();
    }
    let alt: Vec<T> = (0..n)
        .map(|i| {
            let mag = if n > 1 {
                1.0 + i as f64 / (n - 1) as f64
            } else {
                1.0
            };
            T::from_f64(if i % 2 == 0 { mag } else { -mag })
        })
        .collect();
    let y = solve(&alt);
    let alt_est = T::from_f64(2.0) * norm_1_vec(&y) / T::from_f64(3.0 * n as f64);
    est.max(alt_est)
}
