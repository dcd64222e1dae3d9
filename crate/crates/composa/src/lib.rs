//! composa — a second-order solver for composite sparse optimization.
//!
//! Minimizes `f(x) + beta * ||C x||_1` where `f` is smooth (possibly
//! nonconvex) and `C` is an arbitrary pattern matrix: difference operators,
//! graph incidence matrices, Laplacian powers, fused stacks. The solver
//! combines the minimum-norm subgradient (a box-constrained QP over the
//! active rows), generalized second-order information from a Huber
//! smoothing of the penalty, a projection step that pins sign-changing rows
//! to the sparsity subspace, and a projected backtracking line search.
//!
//! Entry points:
//! - [`solver::gsom_solve`] — the main driver.
//! - [`problems`] — built-in problem families (anisotropic TV flow,
//!   deconvolution, Cauchy denoising, graph trend filtering, proximal maps).
//! - [`baselines`] — ADMM reference solver and brute-force oracles.
//! - [`cli`] — the `composa` command-line front end.
//!
//! See the crate `examples/` directory for one runnable walk-through per
//! capability.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod curvature;
pub mod direction;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod problems;
pub mod rng;
pub mod solver;
pub mod subgradient;
