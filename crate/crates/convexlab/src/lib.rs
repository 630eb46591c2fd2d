//! A 2D finite-element laboratory for optimization under second-order
//! constraints (convexity, subharmonicity).
//!
//! The crate provides:
//!
//! - structured triangulations of a rectangle with four diagonal layouts
//!   ([`mesh`]), homothetic refinement and interior-edge geometry;
//! - P1/P2 Lagrange elements with per-triangle gradients, gradient jumps
//!   across interior edges, weak discrete Hessians and the usual
//!   stiffness/mass/load assembly ([`fem`]);
//! - the constraint families built on top of them — conformal P1 convexity
//!   (nonnegative gradient jumps), weak subharmonicity, weak convexity
//!   residuals and the monopolist inequality cone — together with the
//!   direction-pair certificate search and the adversarial quadratic
//!   construction that defeats conformal projection ([`constraints`]);
//! - a deterministic operator-splitting QP solver with KKT reporting used
//!   for constrained projections ([`qp`]);
//! - an order-of-accuracy laboratory that measures the leading term of each
//!   discretized constraint against tabulated predictions ([`consistency`]);
//! - convergence/non-convergence experiments and their CSV/SVG outputs
//!   ([`experiments`], [`svg`]).

pub mod consistency;
pub mod constraints;
pub mod csvio;
mod error;
pub mod experiments;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod qp;
pub mod sparse;
pub mod svg;

pub use error::{Error, Result};
