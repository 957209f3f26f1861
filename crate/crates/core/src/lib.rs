//! Viscosity solutions of Hamilton-Jacobi-Bellman equations for affine control
//! systems, computed by training neural value-function approximators.
//!
//! The value function of an optimal-control problem satisfies an HJB equation,
//! but that PDE admits many generalized solutions; only the viscosity solution
//! is the true optimal cost. This crate guarantees the viscosity property in
//! one of two ways:
//!
//! * **Penalty method** — a smooth (tanh) network trained with the PDE
//!   residual plus a penalty on negative leading principal minors of the
//!   input-Hessian, pushing the approximation toward convexity in the state.
//! * **Convex-by-construction** — input-convex networks (nonnegative
//!   hidden-to-output weights, convex nondecreasing activations) whose output
//!   is convex in the state for free, including a partially convex variant
//!   that is convex in the state but unrestricted in time.
//!
//! Finite-horizon problems are trained with a strip curriculum: fit the
//! terminal boundary first, then extend the trained time region backward in
//! small strips, pinning the already-trained region with a large loss weight.
//!
//! Supporting machinery: a second-order forward-mode jet type layered over a
//! reverse-mode tape (exact input gradients/Hessians and parameter gradients
//! of losses containing input derivatives), closed-form benchmark solutions,
//! a scalar Riccati root selector, and a 1D vanishing-viscosity finite
//! difference reference solver.

pub mod autodiff;
pub mod checkpoint;
mod error;
pub mod hjb;
pub mod networks;
pub mod oracle;
pub mod rng;
pub mod surface;
pub mod training;

pub use error::{Error, Result};
