//! Differential quadrature for `E`: `(E f)(x_k) ~ sum_j w_kj f(x_kj)` over the
//! `n_k` nearest nodes, used to recover the control `u = E y` from the state.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{nearest, NodeSet};
use crate::kernels::{
    eval_kernel_op, eval_poly_op, lift, monomial, Multiquadric, OpTag, OperatorSpec, PolyDegree,
};
use crate::linalg::{lu_factor, lu_solve_transpose, DenseMatrix};
use crate::precision::Real;

/// Quadrature row of one evaluation node.
#[derive(Clone, Debug)]
pub struct DqRow<T> {
    pub node: usize,
    pub neighbors: Vec<usize>,
    pub weights: Vec<T>,
    /// Multipliers of the polynomial constraints.
    pub poly_weights: Vec<T>,
}

fn augmented_gram<T: Real>(
    kernel: &Multiquadric<T>,
    poly: PolyDegree,
    pts: &[[T; 2]],
) -> DenseMatrix<T> {
    let m = pts.len();
    let np = poly.n_terms();
    let mut g = DenseMatrix::zeros(m + np, m + np);
    for i in 0..m {
        for j in 0..m {
            g[(i, j)] = kernel.eval([pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]]);
        }
        for l in 0..np {
            let v = monomial(l, pts[i]);
            g[(i, m + l)] = v;
            g[(m + l, i)] = v;
        }
    }
    g
}

/// Solves `[Phi P; P^t 0]^t [w; v] = [E Phi(x_k - x_j); E p(x_k)]`.
pub fn dq_weights<T: Real>(
    nodes: &NodeSet,
    kernel: &Multiquadric<T>,
    poly: PolyDegree,
    spec: &OperatorSpec<T>,
    k: usize,
    n_k: usize,
) -> Result<DqRow<T>> {
    if n_k == 0 || n_k > nodes.len() {
        return Err(Error::TooFewNodes {
            requested: n_k,
            available: nodes.len(),
        });
    }
    let neighbors = nearest(nodes, nodes.point(k), n_k);
    let pts: Vec<[T; 2]> = neighbors.iter().map(|&j| lift(nodes.point(j))).collect();
    let xk = lift(nodes.point(k));
    let gram = augmented_gram(kernel, poly, &pts);
    let mut rhs: Vec<T> = pts
        .iter()
        .map(|&xj| eval_kernel_op(OpTag::E, spec, kernel, xk, xj))
        .collect();
    rhs.extend((0..poly.n_terms()).map(|l| eval_poly_op(OpTag::E, spec, l, xk)));
    let mut sol = lu_solve_transpose(&lu_factor(&gram)?, &rhs)?;
    let poly_weights = sol.split_off(n_k);
    Ok(DqRow {
        node: k,
        neighbors,
        weights: sol,
        poly_weights,
    })
}

/// Largest `|sum_j w_j Phi(x_j - x_i) + sum_l v_l p_l(x_i) - E Phi(x_k - x_i)|`
/// over the members `i`.
pub fn defining_residual<T: Real>(
    nodes: &NodeSet,
    kernel: &Multiquadric<T>,
    spec: &OperatorSpec<T>,
    row: &DqRow<T>,
) -> T {
    let pts: Vec<[T; 2]> = row
        .neighbors
        .iter()
        .map(|&j| lift(nodes.point(j)))
        .collect();
    let xk = lift(nodes.point(row.node));
    let mut worst = T::zero();
    for &xi in &pts {
        let mut s = T::zero();
        for (&w, &xj) in row.weights.iter().zip(&pts) {
            s += w * kernel.eval([xj[0] - xi[0], xj[1] - xi[1]]);
        }
        for (l, &v) in row.poly_weights.iter().enumerate() {
            s += v * monomial(l, xi);
        }
        worst = worst.max((s - eval_kernel_op(OpTag::E, spec, kernel, xk, xi)).abs());
    }
    worst
}

/// Rows for every interior node, in node order.
pub fn dq_operator<T: Real>(
    nodes: &NodeSet,
    kernel: &Multiquadric<T>,
    poly: PolyDegree,
    spec: &OperatorSpec<T>,
    n_k: usize,
) -> Result<Vec<DqRow<T>>> {
    nodes
        .interior()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&k| dq_weights(nodes, kernel, poly, spec, k, n_k))
        .collect()
}

/// `u = E y` at interior nodes, `u = 0` on the boundary. Non-finite state
/// entries count as missing.
pub fn recover_control_dq<T: Real>(nodes: &NodeSet, rows: &[DqRow<T>], y: &[T]) -> Result<Vec<T>> {
    if y.len() != nodes.len() {
        return Err(Error::DimensionMismatch {
            expected: nodes.len(),
            got: y.len(),
        });
    }
    let mut u = vec![T::zero(); nodes.len()];
    for row in rows {
        let mut s = T::zero();
        for (&w, &j) in row.weights.iter().zip(&row.neighbors) {
            if !y[j].is_finite() {
                return Err(Error::MissingStateValue { node: j });
            }
            s += w * y[j];
        }
        if !nodes.is_boundary(row.node) {
            u[row.node] = s;
        }
    }
    Ok(u)
}
