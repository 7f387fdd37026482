//! Dual-primal tearing and interconnecting for the C¹ multi-patch space.
//!
//! Corner blocks at interior vertices are kept as global primal unknowns.
//! All other interface couplings are enforced weakly with one Lagrange
//! multiplier per matched pair of value-layer or derivative-layer dofs.

mod constraints;
mod operators;
mod solve;

pub use constraints::{build_jump_and_primal, JumpMatrix, PrimalMap};
pub use operators::{eliminate, DirichletPreconditioner, IetiOperators};
pub use solve::{
    monolithic_solve, solve, solve_discretization, Discretization, IetiOptions, Preconditioner, Solution,
    SolveTimings,
};
