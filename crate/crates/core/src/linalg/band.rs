//! Banded LU with partial pivoting after a reverse Cuthill-McKee reordering.
//! Direct solver for the sparse global systems when GMRES stalls.

use sprs::linalg::reverse_cuthill_mckee;
use sprs::TriMat;

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::precision::Real;

/// Largest band storage (in entries) accepted by [`BandLu::factor`].
pub const MAX_BAND_ENTRIES: usize = 60_000_000;

/// `P S P^t = L U` with row interchanges confined to the band.
#[derive(Clone, Debug)]
pub struct BandLu<T> {
    n: usize,
    /// Lower bandwidth of the reordered matrix.
    lower: usize,
    /// Row width: `2 lower + upper + 1`.
    width: usize,
    data: Vec<T>,
    mult: Vec<T>,
    pivots: Vec<usize>,
    /// `order[new] = old`.
    order: Vec<usize>,
}

/// Symmetric reordering that shrinks the bandwidth of `S + S^t`.
pub fn rcm_order<T: Real>(s: &SparseMatrix<T>) -> Vec<usize> {
    let n = s.rows();
    let mut pattern = TriMat::<f64>::new((n, n));
    for i in 0..n {
        pattern.add_triplet(i, i, 1.0);
        for &j in s.row(i).0 {
            pattern.add_triplet(i, j, 1.0);
            pattern.add_triplet(j, i, 1.0);
        }
    }
    let csr = pattern.to_csr::<usize>();
    reverse_cuthill_mckee(csr.view()).perm.vec()
}

impl<T: Real> BandLu<T> {
    pub fn factor(s: &SparseMatrix<T>) -> Result<Self> {
        let n = s.rows();
        if s.cols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.cols(),
            });
        }
        let order = rcm_order(s);
        let mut position = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        let (mut lower, mut upper) = (0usize, 0usize);
        for i in 0..n {
            for &j in s.row(i).0 {
                let (a, b) = (position[i], position[j]);
                lower = lower.max(a.saturating_sub(b));
                upper = upper.max(b.saturating_sub(a));
            }
        }
        let width = 2 * lower + upper + 1;
        if n.saturating_mul(width) > MAX_BAND_ENTRIES {
            return Err(Error::InvalidConfig(format!(
                "band storage {n} x {width} exceeds the direct solver limit"
            )));
        }
        let mut f = BandLu {
            n,
            lower,
            width,
            data: vec![T::zero(); n * width],
            mult: vec![T::zero(); n * lower],
            pivots: vec![0; n],
            order,
        };
        for i in 0..n {
            let (cols, vals) = s.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let at = f.at(position[i], position[j]);
                f.data[at] += v;
            }
        }
        f.eliminate()?;
        Ok(f)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.lower - i)
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, p) = (self.n, self.lower);
        let reach = self.width - p - 1;
        for k in 0..n {
            let last_row = (k + p).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let mut r = k;
            let mut best = self.data[self.at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.at(i, k)].abs();
                if v > best {
                    best = v;
                    r = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::SingularMatrix { column: k });
            }
            self.pivots[k] = r;
            if r != k {
                for j in k..=last_col {
                    let (a, b) = (self.at(k, j), self.at(r, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.at(k, k)];
            for i in k + 1..=last_row {
                let m = self.data[self.at(i, k)] / pivot;
                self.mult[k * p + (i - k - 1)] = m;
                if m == T::zero() {
                    continue;
                }
                for j in k + 1..=last_col {
                    let a = self.at(k, j);
                    let b = self.at(i, j);
                    let v = self.data[a];
                    self.data[b] -= m * v;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Half-bandwidths `(lower, upper)` of the reordered matrix.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.width - 2 * self.lower - 1)
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let (n, p) = (self.n, self.lower);
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut y: Vec<T> = self.order.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            y.swap(k, self.pivots[k]);
            let yk = y[k];
            let end = (k + p).min(n.saturating_sub(1));
            for (off, yi) in y[k + 1..=end].iter_mut().enumerate() {
                *yi -= self.mult[k * p + off] * yk;
            }
        }
        let reach = self.width - p - 1;
        for i in (0..n).rev() {
            let mut s = y[i];
            let end = (i + reach).min(n - 1);
            for (j, &yj) in y.iter().enumerate().take(end + 1).skip(i + 1) {
                s -= self.data[self.at(i, j)] * yj;
            }
            y[i] = s / self.data[self.at(i, i)];
        }
        let mut x = vec![T::zero(); n];
        for (new, &old) in self.order.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{lu_factor, lu_solve};
    use crate::precision::DoubleDouble;

    fn scattered(n: usize) -> SparseMatrix<f64> {
        // shuffled 1-D stencil plus a weak diagonal, so pivoting is exercised
        let shuffle = |i: usize| (i * 37 + 11) % n;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((shuffle(i), shuffle(i), 1e-3 * (i % 3) as f64));
            if i + 1 < n {
                t.push((shuffle(i), shuffle(i + 1), 2.0 + (i % 5) as f64));
                t.push((shuffle(i + 1), shuffle(i), -1.0));
            }
            if i + 3 < n {
                t.push((shuffle(i + 3), shuffle(i), 0.5));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn matches_dense_lu() {
        let s = scattered(200);
        let b: Vec<f64> = (0..200).map(|i| (i as f64 * 0.3).sin()).collect();
        let band = BandLu::factor(&s).unwrap();
        let x = band.solve(&b).unwrap();
        let dense = lu_solve(&lu_factor(&s.to_dense()).unwrap(), &b).unwrap();
        let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, d) in x.iter().zip(&dense) {
            assert!((a - d).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn reordering_shrinks_bandwidth() {
        let band = BandLu::factor(&scattered(300)).unwrap();
        let (lo, up) = band.bandwidths();
        assert!(lo <= 6 && up <= 6, "{lo} {up}");
    }

    #[test]
    fn extended_residual() {
        let s = scattered(120);
        let s: SparseMatrix<DoubleDouble> = SparseMatrix::from_triplets(
            120,
            120,
            &(0..120)
                .flat_map(|i| {
                    let (c, v) = s.row(i);
                    c.iter()
                        .zip(v)
                        .map(move |(&j, &x)| (i, j, DoubleDouble::from(x)))
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let b = vec![DoubleDouble::from(1.0); 120];
        let x = BandLu::factor(&s).unwrap().solve(&b).unwrap();
        let r = s.matvec(&x);
        let scale = 10.0 * x.iter().fold(0.0f64, |m, v| m.max(v.abs().hi()));
        for (ri, bi) in r.iter().zip(&b) {
            assert!((*ri - *bi).abs().hi() < 1e-28 * scale);
        }
    }

    #[test]
    fn singular_is_reported() {
        let s = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0f64), (1, 1, 1.0)]).unwrap();
        assert!(matches!(
            BandLu::factor(&s),
            Err(Error::SingularMatrix { .. })
        ));
    }
}
