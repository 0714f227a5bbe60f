//! Dense and sparse linear algebra over any [`Real`](crate::precision::Real).

pub mod band;
pub mod dense;
pub mod sparse;

pub use band::BandLu;
pub use dense::{
    cond_1, cond_1_from_lu, inverse, lu_factor, lu_solve, lu_solve_matrix, lu_solve_transpose,
    solve, Condition, DenseMatrix, LuFactors,
};
pub use sparse::{
    sparse_cond_1, sparse_solve, sparse_solve_with, SparseMatrix, SparseSolution,
    SparseSolveOptions,
};
