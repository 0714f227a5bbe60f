//! Global asymmetric collocation for the coupled state/adjoint system.
//!
//! With `y = H lambda` and `u = H mu` over all nodes, the system is
//!
//! ```text
//! [  G   beta E* ] [lambda]   [d]
//! [ -E     G     ] [  mu  ] = [0]
//! ```
//!
//! where `G` is the augmented Gram matrix and `E`, `E*` carry operator rows
//! at interior nodes only. It is solved through the Schur complement
//! `R = G + beta E G^-1 E*`.

use crate::error::{Error, Result};
use crate::geometry::{BcTag, NodeSet};
use crate::kernels::{
    eval_kernel_op, eval_poly_op, lift, monomial, reconstruction_row, Multiquadric, OpTag,
    OperatorSpec, PolyDegree,
};
use crate::linalg::{
    cond_1_from_lu, lu_factor, lu_solve, lu_solve_matrix, solve, Condition, DenseMatrix, LuFactors,
};
use crate::precision::Real;
use crate::problems::ControlProblem;

/// Assembled blocks, independent of `beta` except through `spec`.
#[derive(Clone, Debug)]
pub struct AcSystem<T> {
    pub points: Vec<[T; 2]>,
    pub n_boundary: usize,
    pub kernel: Multiquadric<T>,
    pub poly: PolyDegree,
    pub spec: OperatorSpec<T>,
    /// `[Phi P; P^t 0]`
    pub gram: DenseMatrix<T>,
    /// `E` rows at interior nodes, zero elsewhere.
    pub transport: DenseMatrix<T>,
    /// `E*` rows at interior nodes, zero elsewhere.
    pub adjoint: DenseMatrix<T>,
    /// `[g | target | 0]`
    pub data: Vec<T>,
}

impl<T: Real> AcSystem<T> {
    /// `n + n_p`.
    pub fn dim(&self) -> usize {
        self.gram.rows()
    }
}

pub fn assemble_ac<T: Real>(
    nodes: &NodeSet,
    kernel: Multiquadric<T>,
    poly: PolyDegree,
    spec: OperatorSpec<T>,
    problem: &ControlProblem,
) -> Result<AcSystem<T>> {
    if let Some(k) = (0..nodes.n_boundary()).find(|&k| nodes.tag(k) != Some(BcTag::Dirichlet)) {
        return Err(Error::UnsupportedBoundaryOperator(format!(
            "global collocation supports Dirichlet boundary rows only (node {k} is tagged {:?})",
            nodes.tag(k)
        )));
    }
    let n = nodes.len();
    let np = poly.n_terms();
    let dim = n + np;
    let points: Vec<[T; 2]> = nodes.points().iter().map(|&p| lift(p)).collect();
    let mut gram = DenseMatrix::zeros(dim, dim);
    let mut transport = DenseMatrix::zeros(dim, dim);
    let mut adjoint = DenseMatrix::zeros(dim, dim);
    for k in 0..n {
        let x = points[k];
        let row = reconstruction_row(OpTag::Identity, &spec, &kernel, poly, x, &points);
        gram.row_mut(k).copy_from_slice(&row);
        for l in 0..np {
            gram[(n + l, k)] = monomial(l, x);
        }
        if nodes.is_boundary(k) {
            continue;
        }
        for (j, &xj) in points.iter().enumerate() {
            transport[(k, j)] = eval_kernel_op(OpTag::E, &spec, &kernel, x, xj);
            adjoint[(k, j)] = eval_kernel_op(OpTag::Estar, &spec, &kernel, x, xj);
        }
        for l in 0..np {
            transport[(k, n + l)] = eval_poly_op(OpTag::E, &spec, l, x);
            adjoint[(k, n + l)] = eval_poly_op(OpTag::Estar, &spec, l, x);
        }
    }
    let mut data = vec![T::zero(); dim];
    for k in 0..n {
        data[k] = if nodes.is_boundary(k) {
            problem.boundary(points[k])
        } else {
            problem.target(points[k])
        };
    }
    Ok(AcSystem {
        points,
        n_boundary: nodes.n_boundary(),
        kernel,
        poly,
        spec,
        gram,
        transport,
        adjoint,
        data,
    })
}

/// Coefficients of the state and control expansions.
#[derive(Clone, Debug)]
pub struct AcSolution<T> {
    pub lambda: Vec<T>,
    pub mu: Vec<T>,
    pub beta: T,
    /// 1-norm condition number of `G`.
    pub kappa: Condition,
    /// `false` when `kappa` exceeds `1/u` of the working precision.
    pub reliable: bool,
    /// `||A [lambda; mu] - [d; 0]||_inf / ||d||_inf`.
    pub residual: f64,
}

/// Factorization of `G` and the products needed by every `beta`.
pub struct AcFactorization<'a, T> {
    sys: &'a AcSystem<T>,
    lu_gram: LuFactors<T>,
    /// `G^-1 E*`
    gram_inv_adjoint: DenseMatrix<T>,
    /// `E G^-1 E*`
    coupled: DenseMatrix<T>,
    /// `G^-1 d`
    gram_inv_data: Vec<T>,
    /// `E G^-1 d`
    transported_data: Vec<T>,
    kappa: Condition,
}

impl<'a, T: Real> AcFactorization<'a, T> {
    pub fn new(sys: &'a AcSystem<T>) -> Result<Self> {
        let lu_gram = lu_factor(&sys.gram)?;
        let kappa = cond_1_from_lu(&sys.gram, &lu_gram);
        let gram_inv_adjoint = lu_solve_matrix(&lu_gram, &sys.adjoint)?;
        let coupled = sys.transport.matmul(&gram_inv_adjoint)?;
        let gram_inv_data = lu_solve(&lu_gram, &sys.data)?;
        let transported_data = sys.transport.matvec(&gram_inv_data)?;
        Ok(AcFactorization {
            sys,
            lu_gram,
            gram_inv_adjoint,
            coupled,
            gram_inv_data,
            transported_data,
            kappa,
        })
    }

    pub fn kappa(&self) -> Condition {
        self.kappa
    }

    pub fn factors(&self) -> &LuFactors<T> {
        &self.lu_gram
    }

    /// `R mu = E G^-1 d`, then `lambda = G^-1 d - beta G^-1 E* mu`.
    pub fn solve(&self, beta: T) -> Result<AcSolution<T>> {
        let mut schur = self.sys.gram.clone();
        schur.add_scaled(beta, &self.coupled)?;
        let mu = solve(&schur, &self.transported_data)?;
        let correction = self.gram_inv_adjoint.matvec(&mu)?;
        let lambda: Vec<T> = self
            .gram_inv_data
            .iter()
            .zip(&correction)
            .map(|(&z, &c)| z - beta * c)
            .collect();
        Ok(finish(self.sys, lambda, mu, beta, self.kappa))
    }
}

fn finish<T: Real>(
    sys: &AcSystem<T>,
    lambda: Vec<T>,
    mu: Vec<T>,
    beta: T,
    kappa: Condition,
) -> AcSolution<T> {
    let residual = system_residual(sys, beta, &lambda, &mu);
    AcSolution {
        lambda,
        mu,
        beta,
        kappa,
        reliable: kappa.within(T::unit_roundoff()),
        residual,
    }
}

/// Block factorization path.
pub fn solve_ac_schur<T: Real>(sys: &AcSystem<T>, beta: T) -> Result<AcSolution<T>> {
    AcFactorization::new(sys)?.solve(beta)
}

/// Dense solve of the full `2(n + n_p)` system, used for verification.
pub fn solve_ac_monolithic<T: Real>(sys: &AcSystem<T>, beta: T) -> Result<AcSolution<T>> {
    let m = sys.dim();
    let mut full = DenseMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            full[(i, j)] = sys.gram[(i, j)];
            full[(i, m + j)] = beta * sys.adjoint[(i, j)];
            full[(m + i, j)] = -sys.transport[(i, j)];
            full[(m + i, m + j)] = sys.gram[(i, j)];
        }
    }
    let mut rhs = sys.data.clone();
    rhs.resize(2 * m, T::zero());
    let x = solve(&full, &rhs)?;
    let kappa = match lu_factor(&sys.gram) {
        Ok(f) => cond_1_from_lu(&sys.gram, &f),
        Err(_) => Condition::SINGULAR,
    };
    let (lambda, mu) = x.split_at(m);
    Ok(finish(sys, lambda.to_vec(), mu.to_vec(), beta, kappa))
}

fn system_residual<T: Real>(sys: &AcSystem<T>, beta: T, lambda: &[T], mu: &[T]) -> f64 {
    let g_lambda = sys.gram.matvec(lambda).expect("square blocks");
    let g_mu = sys.gram.matvec(mu).expect("square blocks");
    let adj_mu = sys.adjoint.matvec(mu).expect("square blocks");
    let tr_lambda = sys.transport.matvec(lambda).expect("square blocks");
    let mut worst = T::zero();
    for i in 0..sys.dim() {
        let r1 = g_lambda[i] + beta * adj_mu[i] - sys.data[i];
        let r2 = g_mu[i] - tr_lambda[i];
        worst = worst.max(r1.abs()).max(r2.abs());
    }
    let scale = sys.data.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        worst.to_f64()
    } else {
        (worst / scale).to_f64()
    }
}

/// `(y(x), u(x))` from the expansions.
pub fn evaluate_ac<T: Real>(sys: &AcSystem<T>, sol: &AcSolution<T>, x: [T; 2]) -> (T, T) {
    let row = reconstruction_row(
        OpTag::Identity,
        &sys.spec,
        &sys.kernel,
        sys.poly,
        x,
        &sys.points,
    );
    let dot = |c: &[T]| row.iter().zip(c).fold(T::zero(), |s, (&a, &b)| s + a * b);
    (dot(&sol.lambda), dot(&sol.mu))
}

/// State and control at every node, in node order.
pub fn nodal_values<T: Real>(sys: &AcSystem<T>, sol: &AcSolution<T>) -> (Vec<T>, Vec<T>) {
    let n = sys.points.len();
    let y = sys.gram.matvec(&sol.lambda).expect("square blocks");
    let u = sys.gram.matvec(&sol.mu).expect("square blocks");
    (y[..n].to_vec(), u[..n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_nodes, Layout, NodeOptions, TagPolicy};
    use crate::linalg::cond_1;
    use crate::problems::{compute_metrics, problem_1, problem_2};

    fn nodes(n: usize, layout: Layout) -> NodeSet {
        generate_nodes(&NodeOptions::new(n, layout).tags(TagPolicy::AllDirichlet)).unwrap()
    }

    #[test]
    fn structure_on_small_grid() {
        let nodes = nodes(9, Layout::Grid);
        let p = problem_1();
        let sys = assemble_ac(
            &nodes,
            Multiquadric::new(1.0).unwrap(),
            PolyDegree::Linear,
            p.spec(1e-6),
            &p,
        )
        .unwrap();
        assert_eq!(2 * sys.dim(), 24);
        for k in (0..8).chain(9..12) {
            assert!(sys.transport.row(k).iter().all(|&v| v == 0.0));
            assert!(sys.adjoint.row(k).iter().all(|&v| v == 0.0));
        }
        assert!(sys.transport.row(8).iter().any(|&v| v != 0.0));
        assert_eq!(sys.data[8], 1.0);
        assert_eq!(&sys.data[9..], &[0.0; 3]);
    }

    #[test]
    fn rejects_operator_boundary_rows() {
        let nodes = generate_nodes(&NodeOptions::new(25, Layout::Grid)).unwrap();
        let p = problem_1();
        let err = assemble_ac(
            &nodes,
            Multiquadric::new(1.0).unwrap(),
            PolyDegree::Linear,
            p.spec(1e-6),
            &p,
        );
        assert!(matches!(err, Err(Error::UnsupportedBoundaryOperator(_))));
    }

    #[test]
    fn zero_data_gives_zero_coefficients() {
        let nodes = nodes(49, Layout::Grid);
        let p = problem_2();
        let mut sys = assemble_ac(
            &nodes,
            Multiquadric::new(0.1).unwrap(),
            PolyDegree::Linear,
            p.spec(1e3),
            &p,
        )
        .unwrap();
        sys.data.iter_mut().for_each(|v| *v = 0.0);
        let sol = solve_ac_schur(&sys, 1e3).unwrap();
        assert!(sol.lambda.iter().chain(&sol.mu).all(|&v| v == 0.0));
        let (y, u) = evaluate_ac(&sys, &sol, [0.3, 0.4]);
        assert_eq!((y, u), (0.0, 0.0));
    }

    #[test]
    fn schur_matches_monolithic() {
        let nodes = nodes(100, Layout::Halton);
        for (c, beta, prob) in [
            (0.05, 1e-2, problem_1()),
            (0.02, 1e-6, problem_1()),
            (0.01, 1e-4, problem_2()),
        ] {
            let sys = assemble_ac(
                &nodes,
                Multiquadric::new(c).unwrap(),
                PolyDegree::Linear,
                prob.spec(beta),
                &prob,
            )
            .unwrap();
            let a = solve_ac_schur(&sys, beta).unwrap();
            let b = solve_ac_monolithic(&sys, beta).unwrap();
            assert!(a.kappa.value < 1e12);
            let scale = a.lambda.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a.lambda.iter().zip(&b.lambda) {
                assert!((x - y).abs() <= 1e-8 * scale, "c={c} beta={beta}");
            }
            let scale = a.mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a.mu.iter().zip(&b.mu) {
                assert!((x - y).abs() <= 1e-8 * scale, "c={c} beta={beta}");
            }
        }
    }

    #[test]
    fn boundary_conditions_hold_after_solve() {
        let nodes = nodes(100, Layout::Halton);
        let p = problem_2();
        let beta = 1e-4;
        let sys = assemble_ac(
            &nodes,
            Multiquadric::new(0.05).unwrap(),
            PolyDegree::Linear,
            p.spec(beta),
            &p,
        )
        .unwrap();
        let sol = solve_ac_schur(&sys, beta).unwrap();
        assert!(sol.residual < 1e-8, "residual {}", sol.residual);
        for k in 0..nodes.n_boundary() {
            let (y, u) = evaluate_ac(&sys, &sol, sys.points[k]);
            assert!((y - p.boundary(sys.points[k])).abs() < 1e-8);
            assert!(u.abs() < 1e-8);
        }
        let (y, u) = nodal_values(&sys, &sol);
        let (y0, u0) = evaluate_ac(&sys, &sol, sys.points[50]);
        assert!((y[50] - y0).abs() < 1e-12 && (u[50] - u0).abs() < 1e-9);
    }

    #[test]
    fn kappa_matches_direct_condition_number() {
        let nodes = nodes(49, Layout::Grid);
        let p = problem_1();
        let sys = assemble_ac(
            &nodes,
            Multiquadric::new(0.2).unwrap(),
            PolyDegree::Linear,
            p.spec(1e-6),
            &p,
        )
        .unwrap();
        let sol = solve_ac_schur(&sys, 1e-6).unwrap();
        assert_eq!(sol.kappa, cond_1(&sys.gram).unwrap());
        assert!(sol.reliable);
    }

    #[test]
    fn poisson_solution_is_accurate_in_double() {
        let nodes = nodes(225, Layout::Halton);
        let p = problem_1();
        let beta = 1e-6;
        let sys = assemble_ac(
            &nodes,
            Multiquadric::new(0.05).unwrap(),
            PolyDegree::Linear,
            p.spec(beta),
            &p,
        )
        .unwrap();
        let sol = solve_ac_schur(&sys, beta).unwrap();
        let (y, u) = nodal_values(&sys, &sol);
        let m = compute_metrics(&nodes, &y, &u, &p, beta).unwrap();
        assert!(m.re_y.unwrap().hi() < 1e-3, "{:?}", m);
    }
}
