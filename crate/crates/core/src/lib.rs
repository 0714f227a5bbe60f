//! Radial basis function solvers for distributed optimal control of
//! stationary convection-diffusion equations.
//!
//! Three discretizations are provided:
//!
//! * [`ac`]: global asymmetric (Kansa) collocation of the coupled
//!   state/adjoint system, solved by block LU through a Schur complement.
//! * [`lam`]: a local asymmetric method that computes the state from the
//!   fourth-order decoupled problem `(I + beta E*E) y = y_target`, then the
//!   control with a second local pass (LAM-LAM),
//! * or with [`dq`] differential-quadrature weights `u = E y` (LAM-DQ).
//!
//! All numerics are generic over [`precision::Real`], so every method runs
//! in hardware double or in double-double precision.

pub mod ac;
pub mod dq;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod lam;
pub mod linalg;
pub mod precision;
pub mod problems;
pub mod runner;

pub use error::{Error, Result};
pub use precision::{DoubleDouble, Precision, Real};
