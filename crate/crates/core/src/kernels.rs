//! Multiquadric kernel, polynomial augmentation and the convection-diffusion
//! operator family applied to them.
//!
//! With `r = x - x_j`, `s = |r|^2` and `phi = sqrt(c + s)`:
//!
//! ```text
//! grad phi          = r / phi
//! lap phi           = (2c + s) / phi^3
//! (w.grad) phi      = (w.r) / phi
//! (w.grad)^2 phi    = |w|^2 / phi - (w.r)^2 / phi^3
//! lap^2 phi         = (s^2 + 8cs - 8c^2) / phi^7
//! ```
//!
//! and `E = -eps lap + w.grad`, `E* = -eps lap - w.grad`,
//! `E*E = eps^2 lap^2 - (w.grad)^2`, `M = I + beta E*E`.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::precision::Real;

#[inline]
pub fn lift<T: Real>(p: Point) -> [T; 2] {
    [T::from_f64(p[0]), T::from_f64(p[1])]
}

/// `phi(x) = sqrt(c + |x|^2)`; `c` sits under the root unsquared.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Multiquadric<T> {
    c: T,
}

impl<T: Real> Multiquadric<T> {
    pub fn new(c: T) -> Result<Self> {
        if !c.is_finite() || c <= T::zero() {
            return Err(Error::InvalidConfig(format!(
                "shape parameter must be positive, got {c}"
            )));
        }
        Ok(Multiquadric { c })
    }

    pub fn shape(&self) -> T {
        self.c
    }

    #[inline]
    pub fn eval(&self, r: [T; 2]) -> T {
        (self.c + r[0] * r[0] + r[1] * r[1]).sqrt()
    }

    pub fn gradient(&self, r: [T; 2]) -> [T; 2] {
        let phi = self.eval(r);
        [r[0] / phi, r[1] / phi]
    }

    pub fn laplacian(&self, r: [T; 2]) -> T {
        let s = r[0] * r[0] + r[1] * r[1];
        let phi = (self.c + s).sqrt();
        (T::from_f64(2.0) * self.c + s) / (phi * phi * phi)
    }

    pub fn bilaplacian(&self, r: [T; 2]) -> T {
        let c = self.c;
        let s = r[0] * r[0] + r[1] * r[1];
        let phi = (c + s).sqrt();
        let phi2 = phi * phi;
        let phi7 = phi2 * phi2 * phi2 * phi;
        (s * s + T::from_f64(8.0) * c * s - T::from_f64(8.0) * c * c) / phi7
    }

    /// First derivative along `w`.
    pub fn directional(&self, r: [T; 2], w: [T; 2]) -> T {
        (w[0] * r[0] + w[1] * r[1]) / self.eval(r)
    }

    /// Second derivative along `w`.
    pub fn directional2(&self, r: [T; 2], w: [T; 2]) -> T {
        let phi = self.eval(r);
        let wr = w[0] * r[0] + w[1] * r[1];
        let ww = w[0] * w[0] + w[1] * w[1];
        ww / phi - wr * wr / (phi * phi * phi)
    }
}

/// Polynomial augmentation space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyDegree {
    None,
    Constant,
    Linear,
}

impl PolyDegree {
    /// Number of monomials: 0, 1 (`{1}`) or 3 (`{1, x1, x2}`).
    pub fn n_terms(self) -> usize {
        match self {
            PolyDegree::None => 0,
            PolyDegree::Constant => 1,
            PolyDegree::Linear => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PolyDegree::None => "none",
            PolyDegree::Constant => "0",
            PolyDegree::Linear => "1",
        }
    }
}

impl std::str::FromStr for PolyDegree {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" | "-1" => Ok(PolyDegree::None),
            "0" | "constant" => Ok(PolyDegree::Constant),
            "1" | "linear" => Ok(PolyDegree::Linear),
            other => Err(format!("unknown polynomial degree '{other}'")),
        }
    }
}

/// Coefficients of `E = -eps lap + w.grad` and the penalty `beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorSpec<T> {
    pub eps: T,
    pub wind: [T; 2],
    pub beta: T,
}

impl<T: Real> OperatorSpec<T> {
    /// `E = -lap` (eps = 1, no wind).
    pub fn poisson(beta: T) -> Self {
        OperatorSpec {
            eps: T::one(),
            wind: [T::zero(), T::zero()],
            beta,
        }
    }

    /// Wind `(cos theta, sin theta)`.
    pub fn convection(eps: T, theta: T, beta: T) -> Self {
        OperatorSpec {
            eps,
            wind: [theta.cos(), theta.sin()],
            beta,
        }
    }

    pub fn with_beta(self, beta: T) -> Self {
        OperatorSpec { beta, ..self }
    }
}

/// Operator applied to a basis function before evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpTag {
    Identity,
    /// `B = I`
    Dirichlet,
    E,
    Estar,
    /// `beta E*`
    BetaEstar,
    /// `I + beta E*E`
    M,
    EstarE,
}

/// `(op phi)(x - xj)`.
pub fn eval_kernel_op<T: Real>(
    op: OpTag,
    spec: &OperatorSpec<T>,
    kernel: &Multiquadric<T>,
    x: [T; 2],
    xj: [T; 2],
) -> T {
    let r = [x[0] - xj[0], x[1] - xj[1]];
    let estar_e =
        || spec.eps * spec.eps * kernel.bilaplacian(r) - kernel.directional2(r, spec.wind);
    match op {
        OpTag::Identity | OpTag::Dirichlet => kernel.eval(r),
        OpTag::E => -spec.eps * kernel.laplacian(r) + kernel.directional(r, spec.wind),
        OpTag::Estar => -spec.eps * kernel.laplacian(r) - kernel.directional(r, spec.wind),
        OpTag::BetaEstar => {
            spec.beta * (-spec.eps * kernel.laplacian(r) - kernel.directional(r, spec.wind))
        }
        OpTag::EstarE => estar_e(),
        OpTag::M => kernel.eval(r) + spec.beta * estar_e(),
    }
}

/// Value of monomial `p` (`1`, `x1`, `x2`) at `x`.
#[inline]
pub fn monomial<T: Real>(p: usize, x: [T; 2]) -> T {
    match p {
        0 => T::one(),
        1 => x[0],
        2 => x[1],
        _ => panic!("monomial index {p} out of range"),
    }
}

/// `(op p)(x)`. Second and fourth order terms vanish on degree <= 1.
pub fn eval_poly_op<T: Real>(op: OpTag, spec: &OperatorSpec<T>, p: usize, x: [T; 2]) -> T {
    let grad = match p {
        0 => [T::zero(), T::zero()],
        1 => [T::one(), T::zero()],
        2 => [T::zero(), T::one()],
        _ => panic!("monomial index {p} out of range"),
    };
    let wind_grad = spec.wind[0] * grad[0] + spec.wind[1] * grad[1];
    match op {
        OpTag::Identity | OpTag::Dirichlet | OpTag::M => monomial(p, x),
        OpTag::E => wind_grad,
        OpTag::Estar => -wind_grad,
        OpTag::BetaEstar => -spec.beta * wind_grad,
        OpTag::EstarE => T::zero(),
    }
}

/// `[op phi(x - x_j) for members | op p_l(x)]`, length `members + n_p`.
pub fn reconstruction_row<T: Real>(
    op: OpTag,
    spec: &OperatorSpec<T>,
    kernel: &Multiquadric<T>,
    poly: PolyDegree,
    x: [T; 2],
    members: &[[T; 2]],
) -> Vec<T> {
    let mut row = Vec::with_capacity(members.len() + poly.n_terms());
    row.extend(
        members
            .iter()
            .map(|&xj| eval_kernel_op(op, spec, kernel, x, xj)),
    );
    row.extend((0..poly.n_terms()).map(|p| eval_poly_op(op, spec, p, x)));
    row
}
