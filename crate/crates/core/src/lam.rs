//! Local asymmetric method.
//!
//! The state solves `M y = target` with `M = I + beta E*E`, the pair
//! `{y = g, E y = 0}` split over the boundary nodes. Every center owns a
//! stencil and a local collocation matrix; the `M`-weight row at the center
//! couples the unknown center values into a sparse global system `S y_c = b`.
//! The same pipeline with interior operator `beta E*` and `u = 0` on the
//! boundary recovers the control from `beta E* u = target - y`.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{build_stencil, dist2, MemberRole, NodeSet, Stencil};
use crate::kernels::{
    lift, monomial, reconstruction_row, Multiquadric, OpTag, OperatorSpec, PolyDegree,
};
use crate::linalg::{
    cond_1, cond_1_from_lu, lu_factor, lu_solve, lu_solve_matrix, lu_solve_transpose,
    sparse_cond_1, sparse_solve_with, Condition, DenseMatrix, SparseMatrix, SparseSolveOptions,
};
use crate::precision::Real;

/// Which equation the interior rows enforce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pass {
    /// `M y = target`, boundary pair `{y = g, E y = 0}`.
    State,
    /// `beta E* u = target - y`, `u = 0` on the boundary.
    Control,
}

impl Pass {
    pub fn interior_op(self) -> OpTag {
        match self {
            Pass::State => OpTag::M,
            Pass::Control => OpTag::BetaEstar,
        }
    }
}

/// Shape used for the preconditioning matrix: `c = m 10^a` becomes
/// `(m + 0.001) 10^a`.
pub fn shifted_shape(c: f64) -> f64 {
    let mut a = c.log10().floor() as i32;
    let mut scale = 10f64.powi(a);
    if c / scale >= 10.0 {
        a += 1;
        scale = 10f64.powi(a);
    } else if c / scale < 1.0 {
        a -= 1;
        scale = 10f64.powi(a);
    }
    c + 0.001 * scale
}

/// One center's collocation matrix, rows ordered like the stencil members
/// followed by the polynomial constraints.
#[derive(Clone, Debug)]
pub struct LocalSystem<T> {
    pub stencil: Stencil,
    pub points: Vec<[T; 2]>,
    pub matrix: DenseMatrix<T>,
    pub kernel: Multiquadric<T>,
    pub poly: PolyDegree,
    pub spec: OperatorSpec<T>,
    pub pass: Pass,
}

fn row_op(role: MemberRole, pass: Pass) -> OpTag {
    match role {
        MemberRole::Center => OpTag::Identity,
        MemberRole::Dirichlet => OpTag::Dirichlet,
        MemberRole::OperatorE => OpTag::E,
        MemberRole::Interior => pass.interior_op(),
    }
}

fn local_matrix<T: Real>(
    stencil: &Stencil,
    points: &[[T; 2]],
    kernel: &Multiquadric<T>,
    poly: PolyDegree,
    spec: &OperatorSpec<T>,
    pass: Pass,
) -> DenseMatrix<T> {
    let m = points.len();
    let np = poly.n_terms();
    let mut a = DenseMatrix::zeros(m + np, m + np);
    for (i, &x) in points.iter().enumerate() {
        let row = reconstruction_row(row_op(stencil.role(i), pass), spec, kernel, poly, x, points);
        a.row_mut(i).copy_from_slice(&row);
        for l in 0..np {
            a[(m + l, i)] = monomial(l, x);
        }
    }
    a
}

/// Minimum member separation below this fraction of the domain diameter
/// (`sqrt 2`) counts as coincident.
const DEGENERATE_SEPARATION: f64 = 1e-14 * std::f64::consts::SQRT_2;

pub fn assemble_local<T: Real>(
    nodes: &NodeSet,
    stencil: Stencil,
    kernel: Multiquadric<T>,
    poly: PolyDegree,
    spec: OperatorSpec<T>,
    pass: Pass,
) -> Result<LocalSystem<T>> {
    let raw: Vec<_> = stencil.members.iter().map(|&id| nodes.point(id)).collect();
    for i in 0..raw.len() {
        for j in 0..i {
            if dist2(raw[i], raw[j]).sqrt() < DEGENERATE_SEPARATION {
                return Err(Error::DegenerateStencil {
                    center: stencil.center,
                });
            }
        }
    }
    let points: Vec<[T; 2]> = raw.iter().map(|&p| lift(p)).collect();
    let matrix = local_matrix(&stencil, &points, &kernel, poly, &spec, pass);
    Ok(LocalSystem {
        stencil,
        points,
        matrix,
        kernel,
        poly,
        spec,
        pass,
    })
}

/// `(op H)(x) A^-1` for one center.
#[derive(Clone, Debug)]
pub struct WeightRow<T> {
    pub center: usize,
    pub weights: Vec<T>,
    pub op: OpTag,
    /// `cond_1(A)`, or `cond_1(P A)` when preconditioned.
    pub kappa: Condition,
}

impl<T: Real> LocalSystem<T> {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `[op Phi(x - x_j) | op p_l(x)]` over the stencil members.
    pub fn operator_row(&self, op: OpTag, x: [T; 2]) -> Vec<T> {
        reconstruction_row(op, &self.spec, &self.kernel, self.poly, x, &self.points)
    }

    /// Weight row of `op` at the center.
    pub fn weight_row(&self, op: OpTag, precond: Option<T>) -> Result<WeightRow<T>> {
        self.weight_row_at(op, self.points[0], precond)
    }

    /// Solves `w A = (op H)(x)`, i.e. `A^t w = h`. With a perturbed shape
    /// `c_hat`, the transposed system is multiplied on the left by
    /// `P = A(c_hat)^-t`: `(P A^t) w = P h`.
    pub fn weight_row_at(&self, op: OpTag, x: [T; 2], precond: Option<T>) -> Result<WeightRow<T>> {
        let h = self.operator_row(op, x);
        let (weights, kappa) = match precond {
            None => {
                let f = lu_factor(&self.matrix)?;
                let kappa = cond_1_from_lu(&self.matrix, &f);
                (lu_solve_transpose(&f, &h)?, kappa)
            }
            Some(c_hat) => {
                let kernel = Multiquadric::new(c_hat)?;
                let shifted = local_matrix(
                    &self.stencil,
                    &self.points,
                    &kernel,
                    self.poly,
                    &self.spec,
                    self.pass,
                );
                let p = lu_factor(&shifted.transpose())?;
                let pa = lu_solve_matrix(&p, &self.matrix.transpose())?;
                let f = lu_factor(&pa)?;
                let kappa = cond_1_from_lu(&pa, &f);
                (lu_solve(&f, &lu_solve(&p, &h)?)?, kappa)
            }
        };
        Ok(WeightRow {
            center: self.stencil.center,
            weights,
            op,
            kappa,
        })
    }

    /// Condition number of the unpreconditioned local matrix.
    pub fn condition(&self) -> Result<Condition> {
        cond_1(&self.matrix)
    }
}

/// Known right-hand side pieces of the local data vectors.
pub struct LocalData<'a, T> {
    /// Value carried by Dirichlet rows.
    pub boundary: &'a (dyn Fn(usize) -> T + Sync),
    /// Value carried by interior operator rows, and the equation's
    /// right-hand side at the center.
    pub interior: &'a (dyn Fn(usize) -> T + Sync),
}

/// Local data vector with known center values filled in.
pub fn local_data<T: Real>(
    stencil: &Stencil,
    center_value: impl Fn(usize) -> T,
    data: &LocalData<'_, T>,
    n_poly: usize,
) -> Vec<T> {
    let mut d: Vec<T> = stencil
        .members
        .iter()
        .enumerate()
        .map(|(pos, &id)| match stencil.role(pos) {
            MemberRole::Center => center_value(id),
            MemberRole::Dirichlet => (data.boundary)(id),
            MemberRole::OperatorE => T::zero(),
            MemberRole::Interior => (data.interior)(id),
        })
        .collect();
    d.resize(stencil.len() + n_poly, T::zero());
    d
}

/// `S y_c = b` over the centers.
#[derive(Clone, Debug)]
pub struct GlobalSystem<T> {
    pub matrix: SparseMatrix<T>,
    pub rhs: Vec<T>,
    /// Global node id of each unknown.
    pub centers: Vec<usize>,
}

/// Row `k`: weights at center positions go to `S`, the weighted known data
/// moves to `b`.
pub fn assemble_global<T: Real>(
    nodes: &NodeSet,
    rows: &[WeightRow<T>],
    stencils: &[&Stencil],
    n_poly: usize,
    data: &LocalData<'_, T>,
) -> Result<GlobalSystem<T>> {
    let centers = nodes.centers();
    if rows.len() != centers.len() || stencils.len() != centers.len() {
        return Err(Error::InconsistentLayout(format!(
            "{} weight rows and {} stencils for {} centers",
            rows.len(),
            stencils.len(),
            centers.len()
        )));
    }
    let mut index = vec![usize::MAX; nodes.len()];
    for (k, &c) in centers.iter().enumerate() {
        index[c] = k;
    }
    let mut triplets = Vec::new();
    let mut rhs = Vec::with_capacity(centers.len());
    for (k, (row, st)) in rows.iter().zip(stencils).enumerate() {
        if row.center != centers[k] || st.center != centers[k] {
            return Err(Error::InconsistentLayout(format!(
                "row {k} belongs to node {} not {}",
                row.center, centers[k]
            )));
        }
        if row.weights.len() != st.len() + n_poly {
            return Err(Error::InconsistentLayout(format!(
                "center {}: {} weights for {} data entries",
                row.center,
                row.weights.len(),
                st.len() + n_poly
            )));
        }
        let d = local_data(st, |_| T::zero(), data, n_poly);
        let known = row
            .weights
            .iter()
            .zip(&d)
            .fold(T::zero(), |s, (&w, &v)| s + w * v);
        rhs.push((data.interior)(row.center) - known);
        for pos in 0..st.n_centers {
            let col = index[st.members[pos]];
            if col == usize::MAX {
                return Err(Error::InconsistentLayout(format!(
                    "member {} is not a center",
                    st.members[pos]
                )));
            }
            triplets.push((k, col, row.weights[pos]));
        }
    }
    let matrix = SparseMatrix::from_triplets(centers.len(), centers.len(), &triplets)?;
    Ok(GlobalSystem {
        matrix,
        rhs,
        centers,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct LamOptions {
    pub n_local: usize,
    pub poly: PolyDegree,
    pub precondition: bool,
    /// Compute `cond_1(S)` (untimed); skipping it saves two factorizations.
    pub global_condition: bool,
}

impl Default for LamOptions {
    fn default() -> Self {
        LamOptions {
            n_local: 50,
            poly: PolyDegree::Linear,
            precondition: false,
            global_condition: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Phases {
    pub weights: Duration,
    pub assembly: Duration,
    pub solve: Duration,
}

/// Result of one local pass.
#[derive(Clone, Debug)]
pub struct LamField<T> {
    /// Field value at every node.
    pub values: Vec<T>,
    /// `max_k cond_1` of the local matrices (preconditioned when enabled).
    pub kappa: Condition,
    pub kappa_global: Option<Condition>,
    pub iterations: usize,
    pub phases: Phases,
}

struct Pipeline<'a, T> {
    nodes: &'a NodeSet,
    kernel: Multiquadric<T>,
    spec: OperatorSpec<T>,
    opts: LamOptions,
    pass: Pass,
}

impl<T: Real> Pipeline<'_, T> {
    fn local(&self, center: usize) -> Result<LocalSystem<T>> {
        let st = build_stencil(self.nodes, center, self.opts.n_local)?;
        assemble_local(
            self.nodes,
            st,
            self.kernel,
            self.opts.poly,
            self.spec,
            self.pass,
        )
    }

    fn precond_shape(&self) -> Option<T> {
        self.opts
            .precondition
            .then(|| T::from_f64(shifted_shape(self.kernel.shape().to_f64())))
    }

    fn run(&self, data: &LocalData<'_, T>) -> Result<LamField<T>> {
        let nodes = self.nodes;
        let centers = nodes.centers();
        let op = self.pass.interior_op();
        let precond = self.precond_shape();

        let t = Instant::now();
        let locals: Vec<(Stencil, WeightRow<T>)> = centers
            .par_iter()
            .map(|&c| {
                let ls = self.local(c)?;
                let w = ls.weight_row(op, precond)?;
                Ok((ls.stencil, w))
            })
            .collect::<Result<_>>()?;
        let weights_time = t.elapsed();

        let t = Instant::now();
        let kappa = locals.iter().fold(
            Condition {
                value: 0.0,
                estimated: false,
            },
            |m, (_, w)| Condition {
                value: m.value.max(w.kappa.value),
                estimated: m.estimated || w.kappa.estimated,
            },
        );
        let (stencils, rows): (Vec<&Stencil>, Vec<WeightRow<T>>) =
            locals.iter().map(|(s, w)| (s, w.clone())).unzip();
        let np = self.opts.poly.n_terms();
        let global = assemble_global(nodes, &rows, &stencils, np, data)?;
        let assembly_time = t.elapsed();

        let t = Instant::now();
        let sol = sparse_solve_with(
            &global.matrix,
            &global.rhs,
            SparseSolveOptions::for_precision::<T>(),
        )?;
        let mut values = vec![T::zero(); nodes.len()];
        let mut known = vec![false; nodes.len()];
        for k in 0..nodes.n_boundary() {
            values[k] = (data.boundary)(k);
            known[k] = true;
        }
        for (k, &c) in global.centers.iter().enumerate() {
            values[c] = sol.x[k];
            known[c] = true;
        }
        self.fill_non_centers(&mut values, &known, data)?;
        let solve_time = t.elapsed();
        let kappa_global = if self.opts.global_condition {
            Some(sparse_cond_1(&global.matrix)?)
        } else {
            None
        };

        Ok(LamField {
            values,
            kappa,
            kappa_global,
            iterations: sol.iterations,
            phases: Phases {
                weights: weights_time,
                assembly: assembly_time,
                solve: solve_time,
            },
        })
    }

    /// Non-center interior nodes take the value of the nearest center's
    /// local interpolant.
    fn fill_non_centers(
        &self,
        values: &mut [T],
        known: &[bool],
        data: &LocalData<'_, T>,
    ) -> Result<()> {
        let nodes = self.nodes;
        let missing: Vec<usize> = nodes.interior().filter(|&i| !known[i]).collect();
        if missing.is_empty() {
            return Ok(());
        }
        let centers = nodes.centers();
        let precond = self.precond_shape();
        let np = self.opts.poly.n_terms();
        let filled: Vec<(usize, T)> = missing
            .par_iter()
            .map(|&i| {
                let p = nodes.point(i);
                let &c = centers
                    .iter()
                    .min_by(|&&a, &&b| {
                        dist2(p, nodes.point(a)).total_cmp(&dist2(p, nodes.point(b)))
                    })
                    .ok_or_else(|| Error::InvalidLayout("node set has no centers".into()))?;
                let ls = self.local(c)?;
                let w = ls.weight_row_at(OpTag::Identity, lift(p), precond)?;
                let d = local_data(&ls.stencil, |id| values[id], data, np);
                Ok((
                    i,
                    w.weights
                        .iter()
                        .zip(&d)
                        .fold(T::zero(), |s, (&a, &b)| s + a * b),
                ))
            })
            .collect::<Result<_>>()?;
        for (i, v) in filled {
            values[i] = v;
        }
        Ok(())
    }
}

/// State at every node; boundary values come from `g`.
pub fn solve_state<T: Real>(
    nodes: &NodeSet,
    kernel: Multiquadric<T>,
    spec: OperatorSpec<T>,
    boundary: &(dyn Fn([T; 2]) -> T + Sync),
    target: &(dyn Fn([T; 2]) -> T + Sync),
    opts: LamOptions,
) -> Result<LamField<T>> {
    let g = |id: usize| boundary(lift(nodes.point(id)));
    let f = |id: usize| target(lift(nodes.point(id)));
    let data = LocalData {
        boundary: &g,
        interior: &f,
    };
    Pipeline {
        nodes,
        kernel,
        spec,
        opts,
        pass: Pass::State,
    }
    .run(&data)
}

/// Control from `beta E* u = target - y` with `u = 0` on the boundary; every
/// boundary node is treated as Dirichlet.
pub fn solve_control_lam<T: Real>(
    nodes: &NodeSet,
    kernel: Multiquadric<T>,
    spec: OperatorSpec<T>,
    state: &[T],
    target: &(dyn Fn([T; 2]) -> T + Sync),
    opts: LamOptions,
) -> Result<LamField<T>> {
    if state.len() != nodes.len() {
        return Err(Error::DimensionMismatch {
            expected: nodes.len(),
            got: state.len(),
        });
    }
    let nodes = &nodes.with_all_dirichlet();
    let zero = |_: usize| T::zero();
    let f = |id: usize| target(lift(nodes.point(id))) - state[id];
    let data = LocalData {
        boundary: &zero,
        interior: &f,
    };
    Pipeline {
        nodes,
        kernel,
        spec,
        opts,
        pass: Pass::Control,
    }
    .run(&data)
}
