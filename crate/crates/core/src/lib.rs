//! Wei-Norman reduction for the classical simple Lie algebras.
//!
//! A non-autonomous linear system `K'(t) = M(t) K(t)` on a Lie group can be
//! solved through a product-of-exponentials ansatz `K(t) = prod_k exp(u_k(t) X_k)`,
//! which turns the linear non-autonomous problem into a nonlinear autonomous
//! system for the exponents `u_k`. For the algebras `A_N`, `B_N`, `C_N` and
//! `D_N`, a suitable ordered basis splits that system into a hierarchy of
//! matrix Riccati equations followed by plain quadratures. This crate builds
//! the root systems and ordered bases, assembles the coefficient matrix
//! `A(u)`, extracts the staged hierarchy symbolically, and integrates both the
//! hierarchy and a direct reference solver for cross-validation. `G2` is
//! included to demonstrate exactly where the reduction degenerates.
//!
//! Modules:
//! - [`scalars`]: exact arithmetic over `Q(sqrt 2)` and sparse
//!   polynomial/exponential expressions.
//! - [`rootsys`]: root systems, heights, and the `R_k` partition.
//! - [`liealg`]: defining-representation matrices and the ordered basis.
//! - [`adjoint`]: adjoint operators, nilpotency, and closed-form exponentials.
//! - [`wn`]: the symbolic `A(u)` matrix and the staged hierarchy.
//! - [`integrate`]: adaptive integration of the hierarchy plus a direct
//!   reference integrator used as an independent oracle.
//! - [`exprdsl`]: the small expression language for coefficient functions.

pub mod adjoint;
pub mod exprdsl;
pub mod integrate;
pub mod liealg;
pub mod rootsys;
pub mod scalars;
pub mod wn;
