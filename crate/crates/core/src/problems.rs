//! Benchmark control problems on the unit square and the discrete metrics
//! used to compare solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NodeSet, Point};
use crate::kernels::{lift, OperatorSpec};
use crate::precision::{DoubleDouble, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum ProblemId {
    /// Poisson control with a known solution.
    Poisson,
    /// Convection-diffusion with a boundary layer.
    BoundaryLayer,
    /// Convection-diffusion with a corner target.
    CornerTarget,
}

impl ProblemId {
    pub fn number(self) -> u8 {
        match self {
            ProblemId::Poisson => 1,
            ProblemId::BoundaryLayer => 2,
            ProblemId::CornerTarget => 3,
        }
    }
}

impl From<ProblemId> for u8 {
    fn from(p: ProblemId) -> u8 {
        p.number()
    }
}

impl TryFrom<u8> for ProblemId {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        v.to_string().parse()
    }
}

impl std::str::FromStr for ProblemId {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "1" => Ok(ProblemId::Poisson),
            "2" => Ok(ProblemId::BoundaryLayer),
            "3" => Ok(ProblemId::CornerTarget),
            other => Err(format!("unknown problem '{other}' (expected 1, 2 or 3)")),
        }
    }
}

impl std::fmt::Display for ProblemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// State equation `E y = u`, adjoint `beta E* u = target - y`, `y = g` and
/// `u = 0` on the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlProblem {
    pub id: ProblemId,
}

pub fn problem(id: ProblemId) -> ControlProblem {
    ControlProblem { id }
}

pub fn problem_1() -> ControlProblem {
    problem(ProblemId::Poisson)
}

pub fn problem_2() -> ControlProblem {
    problem(ProblemId::BoundaryLayer)
}

pub fn problem_3() -> ControlProblem {
    problem(ProblemId::CornerTarget)
}

fn sin_sin<T: Real>(x: [T; 2]) -> T {
    (T::pi() * x[0]).sin() * (T::pi() * x[1]).sin()
}

fn corner_bump<T: Real>(x: [T; 2]) -> T {
    let half = T::from_f64(0.5);
    if x[0] <= half && x[1] <= half {
        let two = T::from_f64(2.0);
        let a = two * x[0] - T::one();
        let b = two * x[1] - T::one();
        a * a * b * b
    } else {
        T::zero()
    }
}

impl ControlProblem {
    pub fn name(&self) -> &'static str {
        match self.id {
            ProblemId::Poisson => "poisson",
            ProblemId::BoundaryLayer => "boundary-layer",
            ProblemId::CornerTarget => "corner-target",
        }
    }

    pub fn spec<T: Real>(&self, beta: T) -> OperatorSpec<T> {
        let eps = T::one() / T::from_f64(200.0);
        match self.id {
            ProblemId::Poisson => OperatorSpec::poisson(beta),
            ProblemId::BoundaryLayer => {
                OperatorSpec::convection(eps, T::pi() / T::from_f64(6.0), beta)
            }
            ProblemId::CornerTarget => OperatorSpec::convection(eps, T::from_f64(2.4), beta),
        }
    }

    /// Desired state.
    pub fn target<T: Real>(&self, x: [T; 2]) -> T {
        match self.id {
            ProblemId::Poisson => sin_sin(x),
            ProblemId::BoundaryLayer => T::zero(),
            ProblemId::CornerTarget => corner_bump(x),
        }
    }

    /// Dirichlet data for the state. Closed sets: points on the edge of the
    /// unit region of the boundary-layer problem get 1.
    pub fn boundary<T: Real>(&self, x: [T; 2]) -> T {
        match self.id {
            ProblemId::Poisson => T::zero(),
            ProblemId::BoundaryLayer => {
                let on_left_upper = x[0] == T::zero() && x[1] >= T::from_f64(0.5);
                let on_top = x[1] == T::one();
                if on_left_upper || on_top {
                    T::one()
                } else {
                    T::zero()
                }
            }
            ProblemId::CornerTarget => corner_bump(x),
        }
    }

    pub fn has_exact(&self) -> bool {
        self.id == ProblemId::Poisson
    }

    /// Optimal `(y, u)` at `x` when known.
    pub fn exact<T: Real>(&self, beta: T, x: [T; 2]) -> Option<(T, T)> {
        if !self.has_exact() {
            return None;
        }
        let pi2 = T::pi() * T::pi();
        let scale = T::one() + T::from_f64(4.0) * beta * pi2 * pi2;
        let y = sin_sin(x) / scale;
        Some((y, T::from_f64(2.0) * pi2 * y))
    }

    pub fn target_at<T: Real>(&self, p: Point) -> T {
        self.target(lift(p))
    }

    pub fn boundary_at<T: Real>(&self, p: Point) -> T {
        self.boundary(lift(p))
    }
}

/// Largest residual of the Poisson solution pair: `y + beta lap^2 y - target`
/// and `u - (-lap y)`, using `lap sin sin = -2 pi^2 sin sin`.
pub fn verify_exact_solution<T: Real>(beta: T, points: &[[T; 2]]) -> T {
    let p = problem_1();
    let pi2 = T::pi() * T::pi();
    let two_pi2 = T::from_f64(2.0) * pi2;
    let mut worst = T::zero();
    for &x in points {
        let (y, u) = p.exact(beta, x).expect("problem 1 has an exact solution");
        let lap_y = -two_pi2 * y;
        let bilap_y = -two_pi2 * lap_y;
        let r1 = (y + beta * bilap_y - p.target(x)).abs();
        let r2 = (u + lap_y).abs();
        worst = worst.max(r1).max(r2);
    }
    worst
}

/// Discrete norms and cost of a computed state/control pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    /// Tracking misfit over interior nodes.
    pub misfit: DoubleDouble,
    pub control_norm: DoubleDouble,
    pub re_y: Option<DoubleDouble>,
    pub re_u: Option<DoubleDouble>,
    pub cost: DoubleDouble,
}

/// Norms are `sqrt(sum f(x_k)^2)`. The tracking misfit skips boundary nodes,
/// where the state is pinned to `g` and not to the target. Relative errors use
/// every node.
pub fn compute_metrics<T: Real>(
    nodes: &NodeSet,
    y: &[T],
    u: &[T],
    problem: &ControlProblem,
    beta: T,
) -> Result<Metrics> {
    let n = nodes.len();
    for len in [y.len(), u.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let beta_dd = beta.to_dd();
    let mut misfit2 = DoubleDouble::ZERO;
    let mut u2 = DoubleDouble::ZERO;
    let (mut ey2, mut eu2, mut ny2, mut nu2) = (
        DoubleDouble::ZERO,
        DoubleDouble::ZERO,
        DoubleDouble::ZERO,
        DoubleDouble::ZERO,
    );
    for k in 0..n {
        let x: [T; 2] = lift(nodes.point(k));
        let yk = y[k].to_dd();
        let uk = u[k].to_dd();
        u2 += uk * uk;
        if !nodes.is_boundary(k) {
            let d = yk - problem.target(x).to_dd();
            misfit2 += d * d;
        }
        if let Some((ye, ue)) = problem.exact(beta, x) {
            let (ye, ue) = (ye.to_dd(), ue.to_dd());
            ey2 += (yk - ye) * (yk - ye);
            eu2 += (uk - ue) * (uk - ue);
            ny2 += ye * ye;
            nu2 += ue * ue;
        }
    }
    let ratio = |num: DoubleDouble, den: DoubleDouble| {
        if den == DoubleDouble::ZERO {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    };
    let exact = problem.has_exact();
    Ok(Metrics {
        misfit: misfit2.sqrt(),
        control_norm: u2.sqrt(),
        re_y: exact.then(|| ratio(ey2, ny2)),
        re_u: exact.then(|| ratio(eu2, nu2)),
        cost: (misfit2 + beta_dd * u2) * DoubleDouble::from(0.5),
    })
}
