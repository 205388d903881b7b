//! Numerical verification toolkit for uniformly balancing sublevel
//! inequalities: inequalities of the form
//!
//! ```text
//! ||u||_Lp(Omega) * |{x in Omega : |u(x)| >= c}|^(1/p') >= c
//! ```
//!
//! holding with a constant c uniform over a class of functions (Delta u >= 1
//! for the Laplacian, Hu >= 1 for the heat operator). The crate implements
//! the ball and heatball average families and their derivative formulas, the
//! constructive constants from the proofs, level-set and L^p estimators, and
//! an end-to-end verification harness, all at desk scale in double
//! precision.
//!
//! Space-time points are stored `[x_1, ..., x_n, t]` (time last).

pub mod averages;
pub mod constants;
pub mod error;
pub mod geometry;
pub mod fields;
pub mod harness;
pub mod levelsets;
pub mod quadrature;

pub use error::{Error, Result};
